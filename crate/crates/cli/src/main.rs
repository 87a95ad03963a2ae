use std::io::Write;

use clap::Parser;
use exact_cantor_cli::{run_cli, Cli, ExitStatus};

fn main() {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --workers: {e}");
            std::process::exit(ExitStatus::Usage.code());
        }
    }
    let mut stdout = std::io::stdout().lock();
    let status = run_cli(&cli, &mut stdout, &mut std::io::stderr());
    let _ = stdout.flush();
    std::process::exit(status.code());
}
