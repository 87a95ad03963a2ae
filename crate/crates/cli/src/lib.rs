//! Batch front end: config parsing, subcommands, trace persistence and
//! CSV/JSON reports.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

pub use args::Cli;
pub use config::RunConfig;
pub use error::{CliError, ExitStatus};

fn dispatch(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> error::CliResult<bool> {
    use args::{Command, DimMethod, VerifyTarget};
    match &cli.command {
        Command::Verify { target } => match target {
            VerifyTarget::Space(a) => commands::verify_space(a, stdout),
            VerifyTarget::Wds(a) => commands::verify_wds(a, stdout),
        },
        Command::Build(a) => commands::build(a, stdout, stderr),
        Command::Dim { method } => match method {
            DimMethod::Mdp(a) => commands::dim_mdp(a, stdout),
            DimMethod::Box(a) => commands::dim_box(a, stdout),
            DimMethod::Cover(a) => commands::dim_cover(a, stdout),
        },
        Command::Classify(a) => commands::classify(a, stdout),
        Command::Sample(a) => commands::sample(a, stdout),
    }
}

/// Run one already-parsed command in this process.
pub fn run_cli(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> ExitStatus {
    match dispatch(cli, stdout, stderr) {
        Ok(true) => ExitStatus::Pass,
        Ok(false) => {
            let _ = writeln!(stderr, "checks failed");
            ExitStatus::Failed
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.status()
        }
    }
}

/// Parse `args` (program name first) and run; usage errors exit with 2.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run_cli(&cli, stdout, stderr),
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitStatus::Pass,
                _ => ExitStatus::Usage,
            }
        }
    }
}

#[cfg(test)]
mod tests;
