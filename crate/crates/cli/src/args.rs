//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{read_settings, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "exact-cantor",
    version,
    about = "Audits, builds and dimension reports for Cantor sets of exactly approximable points"
)]
pub struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Audit a space or a point system.
    Verify {
        #[command(subcommand)]
        target: VerifyTarget,
    },
    /// Run the construction and write a trace.
    Build(BuildArgs),
    /// Dimension estimates as CSV or JSON.
    Dim {
        #[command(subcommand)]
        method: DimMethod,
    },
    /// Check sampled limit points of a trace with the continued-fraction oracle.
    Classify(ClassifyArgs),
    /// Draw seeded limit points from a trace.
    Sample(SampleArgs),
}

/// Settings shared by every config-driven command. Flags override `--config`.
#[derive(Clone, Debug, Default, Args)]
pub struct ConfigArgs {
    /// Flat `key = value` file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// circle, interval or cantor3.
    #[arg(long)]
    pub space: Option<String>,
    /// rationals or dyadics.
    #[arg(long)]
    pub system: Option<String>,
    /// `pow:a=<rat>,tau=<rat>`.
    #[arg(long)]
    pub psi: Option<String>,
    /// Replace only the exponent of psi.
    #[arg(long)]
    pub tau: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub beta: Option<String>,
    /// System constant C.
    #[arg(long)]
    pub c: Option<String>,
    /// Root ball `center:radius`, or `random`.
    #[arg(long)]
    pub root: Option<String>,
    /// strict or practical.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub levels: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Children kept per parent.
    #[arg(long)]
    pub branching: Option<String>,
    /// Cap on the points of one band enumeration.
    #[arg(long)]
    pub max_candidates: Option<String>,
    /// Working precision of certified evaluations.
    #[arg(long)]
    pub precision_bits: Option<String>,
    /// Largest bit length allowed for any N_l.
    #[arg(long)]
    pub max_n_bits: Option<String>,
    /// Extra override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply(&read_settings(path)?)?;
        }
        let flags = [
            ("space", &self.space),
            ("system", &self.system),
            ("psi", &self.psi),
            ("tau", &self.tau),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("c", &self.c),
            ("root", &self.root),
            ("mode", &self.mode),
            ("levels", &self.levels),
            ("seed", &self.seed),
            ("branching", &self.branching),
            ("max_candidates", &self.max_candidates),
            ("precision_bits", &self.precision_bits),
            ("max_n_bits", &self.max_n_bits),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(&format!("--{}", key.replace('_', "-")), key, v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::config("--set", format!("expected KEY=VALUE, got {kv:?}")))?;
            cfg.set("--set", k.trim(), v.trim())?;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum VerifyTarget {
    /// Regularity of the ambient space on seeded annuli.
    Space(VerifySpaceArgs),
    /// Separation and distribution of the point system.
    Wds(VerifyWdsArgs),
}

#[derive(Debug, Args)]
pub struct VerifySpaceArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    /// JSON report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyWdsArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Largest height in the exhaustive separation scan.
    #[arg(long, default_value_t = 200)]
    pub qmax: u64,
    /// Bands k for the distribution counts, comma separated; none skips them.
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<u64>,
    /// Seeded balls for the distribution counts.
    #[arg(long, default_value_t = 10)]
    pub balls: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Trace file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Ignore the scratch-directory trace cache.
    #[arg(long)]
    pub no_cache: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum DimMethod {
    /// Mass-distribution lower bounds along a trace.
    Mdp(DimMdpArgs),
    /// Dyadic box counting of the rational cover or of stored arcs.
    Box(DimBoxArgs),
    /// Critical exponent bracket of the rational cover sums.
    Cover(DimCoverArgs),
}

#[derive(Debug, Args)]
pub struct DimMdpArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DimBoxArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Count the arcs of a stored level instead of the rational cover.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Level of `--trace`; the deepest when absent.
    #[arg(long)]
    pub level: Option<usize>,
    /// Explicit closed arc `lo:hi`, repeatable.
    #[arg(long)]
    pub arc: Vec<String>,
    /// Largest denominator of the rational cover.
    #[arg(long, default_value_t = 4096)]
    pub qmax: u64,
    /// Scales run over 2^-kmin ..= 2^-kmax.
    #[arg(long, default_value_t = 8)]
    pub kmin: u32,
    #[arg(long, default_value_t = 20)]
    pub kmax: u32,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DimCoverArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Exponents probed on the grid j/grid.
    #[arg(long, default_value_t = 20)]
    pub grid: u32,
    /// Relative change below which a window ratio counts as flat.
    #[arg(long, default_value = "1/20")]
    pub tol: String,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    /// Factor c < 1 of the violation test; c_{d-1} of the trace depth d when absent.
    #[arg(long)]
    pub c: Option<String>,
    /// Radius band `lo:hi` of the violation test; `1/(C N_d):C/N_{d-1}` when absent.
    #[arg(long)]
    pub band: Option<String>,
    /// Sampling seed; the trace seed when absent.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
