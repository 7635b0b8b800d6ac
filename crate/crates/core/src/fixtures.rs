//! Small hand-checkable networks used throughout the test suites and docs.

use crate::net::{Network, NetworkBuilder};

/// Three binary nodes in a chain A -> B -> C.
///
/// P(A=1) = 0.2; P(B=1|A=0) = 0.1, P(B=1|A=1) = 0.8;
/// P(C=1|B=0) = 0.2, P(C=1|B=1) = 0.9. Small enough that every posterior,
/// lambda vector, and ICPT is checkable by hand: P(C=1) = 0.368 and
/// P(B=1|C=1) = 0.216/0.368.
pub fn chain3() -> Network {
    NetworkBuilder::new("chain3")
        .node("A", &["0", "1"], &[], vec![vec![0.8, 0.2]])
        .node(
            "B",
            &["0", "1"],
            &["A"],
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
        )
        .node(
            "C",
            &["0", "1"],
            &["B"],
            vec![vec![0.8, 0.2], vec![0.1, 0.9]],
        )
        .build()
        .expect("chain3 fixture is well formed")
}

/// Binary diamond A -> {B, C} -> D; the smallest loopy network.
pub fn diamond() -> Network {
    NetworkBuilder::new("diamond")
        .node("A", &["0", "1"], &[], vec![vec![0.6, 0.4]])
        .node(
            "B",
            &["0", "1"],
            &["A"],
            vec![vec![0.7, 0.3], vec![0.2, 0.8]],
        )
        .node(
            "C",
            &["0", "1"],
            &["A"],
            vec![vec![0.5, 0.5], vec![0.9, 0.1]],
        )
        .node(
            "D",
            &["0", "1"],
            &["B", "C"],
            vec![
                vec![0.95, 0.05],
                vec![0.4, 0.6],
                vec![0.3, 0.7],
                vec![0.1, 0.9],
            ],
        )
        .build()
        .expect("diamond fixture is well formed")
}
