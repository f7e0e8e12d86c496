use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use splitcount::BranchChoice;

#[derive(Debug, Parser)]
#[command(name = "splitcount", version, about = "Estimate the number of solutions of SAT, degree-sequence and 0-1 table problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count the solutions of an instance.
    Count {
        #[command(subcommand)]
        model: ModelCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum ModelCommand {
    /// Satisfying assignments of a DIMACS CNF formula.
    Sat {
        #[arg(long, value_name = "FILE")]
        cnf: PathBuf,
        #[command(flatten)]
        opts: CommonArgs,
    },
    /// Labeled simple graphs with a given degree sequence.
    Graph {
        /// Whitespace-separated degrees.
        #[arg(long, value_name = "FILE")]
        degrees: PathBuf,
        #[command(flatten)]
        opts: CommonArgs,
    },
    /// 0-1 tables with given row and column sums.
    Table {
        /// JSON object with `r`, `c` and an optional `branch`.
        #[arg(long, value_name = "FILE")]
        spec: PathBuf,
        /// Overrides the branch given in the spec file.
        #[arg(long, value_enum)]
        branch: Option<BranchArg>,
        #[command(flatten)]
        opts: CommonArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BranchArg {
    Row,
    Column,
    Auto,
}

impl From<BranchArg> for BranchChoice {
    fn from(b: BranchArg) -> Self {
        match b {
            BranchArg::Row => BranchChoice::Row,
            BranchArg::Column => BranchChoice::Column,
            BranchArg::Auto => BranchChoice::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Product of the level fractions.
    Split,
    /// Chapman estimate from two batches at the final level.
    Caprecap,
    /// Capture-recapture on a shrunken instance, scaled back (SAT only).
    Ecap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Population size per level.
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(100..))]
    pub samples: u64,
    /// Elite fraction per level, strictly between 0 and 1.
    #[arg(long, default_value_t = 0.1, value_parser = parse_rho)]
    pub rho: f64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub runs: u64,
    /// Base seed; run k uses seed + k.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Estimator::Split)]
    pub estimator: Estimator,
    /// Write per-iteration traces here (one file per run when --runs > 1).
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
    /// Write the full run report here.
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
    /// Format of --trace and --report files.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads, 0 for all cores. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, default_value_t = 1_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_iterations: u64,
    /// Gibbs sweeps between recorded chain states during splitting.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub chain_thinning: u64,
    /// Population size once the level is within --boost-trigger of the target.
    #[arg(long)]
    pub boost_samples: Option<u64>,
    #[arg(long)]
    pub boost_trigger: Option<i64>,
    /// Raw size of the first capture batch (default: --samples).
    #[arg(long)]
    pub cap_n1: Option<u64>,
    /// Raw size of the second capture batch (default: --samples).
    #[arg(long)]
    pub cap_n2: Option<u64>,
    /// Gibbs sweeps before each recorded batch state.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub cap_chain_sweeps: u64,
    /// Recorded states per batch chain.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub cap_chain_length: u64,
    #[arg(long, default_value_t = 1e-3)]
    pub ecap_window_low: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub ecap_window_high: f64,
    #[arg(long, default_value_t = 64)]
    pub ecap_max_aux: usize,
    /// Distance to the target at which --boost-samples kicks in under ecap.
    #[arg(long, default_value_t = 1)]
    pub ecap_trigger: i64,
    /// Level-m states used to estimate the auxiliary-clause fraction.
    #[arg(long, default_value_t = 100_000)]
    pub ecap_samples: usize,
    /// Product estimates below this fall back to classic capture-recapture under ecap.
    #[arg(long, default_value_t = splitcount::caprecap::DEFAULT_ECAP_REGIME)]
    pub ecap_regime: f64,
    /// Compare against the exact count when the instance is small enough.
    #[arg(long)]
    pub oracle: bool,
    /// Include wall-clock seconds in the output.
    #[arg(long)]
    pub timing: bool,
}

fn parse_rho(s: &str) -> Result<f64, String> {
    let rho: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if rho > 0.0 && rho < 1.0 {
        Ok(rho)
    } else {
        Err(format!("{rho} is not strictly between 0 and 1"))
    }
}
