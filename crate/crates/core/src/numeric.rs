//! Small numeric helpers shared across modules.

/// Neumaier-compensated accumulator. Sums of many terms with disparate
/// magnitudes (score tables, enumeration sweeps) stay accurate to a few ulps
/// instead of drifting with the term count.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Compensated sum of an iterator of terms.
pub fn compensated_total<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Normalize a non-negative vector to sum 1. Returns `None` when the sum is
/// zero or not finite, leaving degenerate-message policy to the caller.
pub fn normalized(values: &[f64]) -> Option<Vec<f64>> {
    let total = compensated_total(values.iter().copied());
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    Some(values.iter().map(|v| v / total).collect())
}

/// Exactly-uniform probability vector of the given length.
pub fn uniform(len: usize) -> Vec<f64> {
    vec![1.0 / len as f64; len]
}

/// True when all entries are bit-identical. Used to detect exactly-uniform
/// lambda vectors, which by construction mean "no evidence below this node".
pub fn all_equal(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0].to_bits() == w[1].to_bits())
}

/// SplitMix64 finalizer. Deterministic seed derivation for nested experiment
/// loops (case, arm, sample-count, repetition) without stream correlation.
pub fn mix_seed(state: u64, salt: u64) -> u64 {
    let mut z = state
        .wrapping_add(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(salt.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut acc = CompensatedSum::new();
        acc.add(1.0);
        for _ in 0..10 {
            acc.add(1e-17);
        }
        assert_eq!(acc.value(), 1.0 + 1e-16);
    }

    #[test]
    fn normalized_rejects_zero_and_nan() {
        assert!(normalized(&[0.0, 0.0]).is_none());
        assert!(normalized(&[f64::NAN, 1.0]).is_none());
        let n = normalized(&[1.0, 3.0]).unwrap();
        assert_eq!(n, vec![0.25, 0.75]);
    }

    #[test]
    fn mix_seed_differs_by_salt() {
        assert_ne!(mix_seed(7, 0), mix_seed(7, 1));
        assert_eq!(mix_seed(7, 3), mix_seed(7, 3));
    }
}
