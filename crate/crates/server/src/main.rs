use clap::Parser;

#[derive(Parser)]
#[command(name = "epis-server", about = "Bayesian-network inference service")]
struct Args {
    /// Address to bind.
    #[arg(long, default_value = "127.0.0.1:8733")]
    addr: String,
}

#[tokio::main]
async fn main() {
    let args = Args::parse();
    let listener = match tokio::net::TcpListener::bind(&args.addr).await {
        Ok(listener) => listener,
        Err(e) => {
            eprintln!("failed to bind {}: {e}", args.addr);
            std::process::exit(1);
        }
    };
    println!("listening on {}", listener.local_addr().expect("bound"));
    if let Err(e) = epis_server::serve(listener).await {
        eprintln!("server error: {e}");
        std::process::exit(1);
    }
}
