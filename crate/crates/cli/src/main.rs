//! `supou-lqc` command-line front end.

mod commands;
mod config;
mod fail;
mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::fail::Failure;

#[derive(Parser, Debug)]
#[command(name = "supou-lqc", version, about = "supOU discharge model, Markovian lift and long-run LQ control")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for every random component (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, env = "SUPOU_LQC_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Moments, ACF and PDF of a discharge series.
    Stats {
        #[arg(long)]
        data: Option<PathBuf>,
        /// Largest ACF lag, hours.
        #[arg(long)]
        max_lag: Option<f64>,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        log_bins: bool,
    },
    /// Two-step identification from a discharge series.
    Fit {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        p_nu: Option<f64>,
    },
    /// Monte Carlo paths, uncontrolled or under the optimal lifted feedback.
    Simulate {
        /// Horizon in years.
        #[arg(long)]
        years: Option<f64>,
        #[arg(long)]
        controlled: bool,
    },
    /// Periodic Riccati system and effective Hamiltonian.
    Riccati {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        w: Option<f64>,
    },
    /// Controlling cost C and deviation D for one weight.
    Kbe {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        w: Option<f64>,
    },
    /// (C, D) frontier over the weight list.
    Frontier {
        #[arg(long)]
        n: Option<usize>,
        /// Keep every `stride`-th weight.
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Manufactured-solution convergence table.
    Mms {
        #[arg(long)]
        beta: Option<f64>,
        /// Comma-separated lift sizes.
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
    },
    /// Lifted vs exact characteristic function.
    CharfnCheck {
        #[arg(long, value_delimiter = ',')]
        u: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
    },
    /// Lifted solver against the closed-form jump-free solution.
    OracleD {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        w: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::config(format!("thread pool: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::defaults(),
    };
    if let Some(s) = cli.seed {
        cfg.set_seed(s);
    }
    commands::dispatch(cli.cmd, cfg, &cli.out)
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.code);
    }
}
