use clap::Parser;

use metricspace::cli::{execute, Cli};

fn main() {
    if let Some(threads) = std::env::var("METRICSPACE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build_global();
    }
    let cli = Cli::parse();
    let status = match cli.config() {
        Ok(cfg) => execute(&cfg),
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                2
            } else {
                1
            }
        }
    };
    std::process::exit(status);
}
