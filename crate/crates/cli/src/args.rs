use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "pancake", version, about = "Gaussian / pancake mechanism laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Print σ for (Δ, ε*, δ*)
    Calibrate,
    /// Emit noise vectors
    Sample,
    /// Run the distinguishing attack and write a trial report
    Attack,
    /// Tabulate GM and GPM privacy bounds over δ
    Bounds,
    /// Measure mean L2 error of GM and GPM
    L2,
    /// Time GM and GPM noise sampling
    Bench,
    /// Run the covertness test battery
    CovertTest,
    /// Simulate one distributed round
    Distributed,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Calibrate => "calibrate",
            Command::Sample => "sample",
            Command::Attack => "attack",
            Command::Bounds => "bounds",
            Command::L2 => "l2",
            Command::Bench => "bench",
            Command::CovertTest => "covert-test",
            Command::Distributed => "distributed",
        }
    }
}

/// Every flag is optional so that config-file values can fill the gaps.
#[derive(Debug, Clone, Default, Args)]
pub struct Opts {
    /// Flat `key = value` config file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long = "d", global = true)]
    pub d: Option<usize>,
    #[arg(long, global = true)]
    pub eps_star: Option<f64>,
    #[arg(long, global = true)]
    pub delta_star: Option<f64>,
    /// L2 sensitivity Δ
    #[arg(long, global = true)]
    pub delta_sens: Option<f64>,
    /// Noise scale; calibrated from (Δ, ε*, δ*) when absent
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Defaults to 2√d
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Peak offset used by `bounds`
    #[arg(long = "t", global = true)]
    pub t: Option<f64>,
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// gm | gpm
    #[arg(long, global = true)]
    pub mechanism: Option<String>,
    /// none | rotate | relay
    #[arg(long, global = true)]
    pub mitigation: Option<String>,
    /// fresh | fixed
    #[arg(long, global = true)]
    pub key_policy: Option<String>,
    /// Records per DP-hist dataset
    #[arg(long, global = true)]
    pub n_records: Option<usize>,
    /// remove | add
    #[arg(long, global = true)]
    pub neighbour: Option<String>,
    /// Two-line file of whitespace-separated decimals
    #[arg(long, global = true)]
    pub query_pair: Option<PathBuf>,
    /// Comma-separated δ grid for `bounds`
    #[arg(long, global = true)]
    pub deltas: Option<String>,
    /// Vectors for `sample`, samples per batch for `covert-test`
    #[arg(long, global = true)]
    pub n_samples: Option<usize>,
    #[arg(long, global = true)]
    pub directions: Option<usize>,
    #[arg(long, global = true)]
    pub batches: Option<usize>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    #[arg(long, global = true)]
    pub servers: Option<usize>,
    #[arg(long, global = true)]
    pub backdoored: Option<usize>,
    #[arg(long, global = true)]
    pub colluding: Option<usize>,
    #[arg(long, global = true)]
    pub threshold: Option<usize>,
}
