//! Command line, and how it combines with a run file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{ConfigFileError, RunFile};
use crate::experiment::{
    AlgoChoice, ExperimentKind, ExperimentSpec, SweepAxis, DEFAULT_CDF_CHANNELS, DEFAULT_DELTA_GRID, DEFAULT_ETA_GRID,
    DEFAULT_RHO2_GRID_DB,
};

pub const DEFAULT_TRIALS: usize = 50;

#[derive(Debug, Parser)]
#[command(name = "duplex-exp", version, about = "Seeded Monte-Carlo experiments for half-array full-duplex cells")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write its result files.
    Run(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Run file with `key = value` lines. Flags given here win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub experiment: ExperimentKind,
    #[arg(long, value_enum, default_value = "sr")]
    pub algo: AlgoChoice,
    /// Trials, or topologies for `cdf`.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Residual SI in dB: the grid of `sweep-rho2`, a single value otherwise.
    #[arg(long = "rho2-db", value_delimiter = ',', allow_hyphen_values = true)]
    pub rho2_db: Vec<f64>,
    /// DL-to-UL rate ratio: the grid of `sweep-eta`, a single value otherwise.
    #[arg(long, value_delimiter = ',')]
    pub eta: Vec<f64>,
    /// CSI error scale: the grid of `sweep-delta`, a single value otherwise.
    #[arg(long, value_delimiter = ',')]
    pub delta: Vec<f64>,
    /// CSI error decay exponent.
    #[arg(long)]
    pub upsilon: Option<f64>,
    /// Channel draws per topology for `cdf`.
    #[arg(long)]
    pub cdf_channels: Option<usize>,
    /// Worker threads; output does not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Record wall time per solve in `solve_ms` (makes output nondeterministic).
    #[arg(long)]
    pub timing: bool,
    /// Write `trace_<trial>.csv` files (always on for `convergence`).
    #[arg(long)]
    pub traces: bool,
}

fn scalar(flag: &str, values: &[f64]) -> Result<Option<f64>, ConfigFileError> {
    match values {
        [] => Ok(None),
        [v] => Ok(Some(*v)),
        _ => Err(ConfigFileError::Other(format!("--{flag} takes one value outside its sweep"))),
    }
}

impl RunArgs {
    /// Merges flags over the run file (or the defaults when there is none).
    pub fn spec(&self) -> Result<ExperimentSpec, ConfigFileError> {
        let file = match &self.config {
            Some(p) => RunFile::load(p)?,
            None => RunFile::default(),
        };
        let mut system = file.system.clone();
        let axis = match self.experiment {
            ExperimentKind::SweepRho2 => Some(SweepAxis::Rho2Db),
            ExperimentKind::SweepEta => Some(SweepAxis::Eta),
            ExperimentKind::SweepDelta => Some(SweepAxis::Delta),
            _ => None,
        };
        let pick = |cli: &[f64], file: &Option<Vec<f64>>, default: &[f64]| {
            if !cli.is_empty() {
                cli.to_vec()
            } else {
                file.clone().unwrap_or_else(|| default.to_vec())
            }
        };
        let sweep = axis.map(|a| {
            let grid = match a {
                SweepAxis::Rho2Db => pick(&self.rho2_db, &file.rho2_grid_db, &DEFAULT_RHO2_GRID_DB),
                SweepAxis::Eta => pick(&self.eta, &file.eta_grid, &DEFAULT_ETA_GRID),
                SweepAxis::Delta => pick(&self.delta, &file.delta_grid, &DEFAULT_DELTA_GRID),
            };
            (a, grid)
        });
        if axis != Some(SweepAxis::Rho2Db) {
            if let Some(v) = scalar("rho2-db", &self.rho2_db)? {
                system.rho2 = duplex::config::db_to_linear(v);
            }
        }
        if axis != Some(SweepAxis::Eta) {
            if let Some(v) = scalar("eta", &self.eta)? {
                system.eta = v;
            }
        }
        if axis != Some(SweepAxis::Delta) {
            if let Some(v) = scalar("delta", &self.delta)? {
                system.csi_delta = v;
            }
        }
        if let Some(v) = self.upsilon {
            system.csi_upsilon = v;
        }
        if let Some(s) = self.seed.or(file.seed) {
            system.rng_seed = s;
        }
        system.validate()?;
        Ok(ExperimentSpec {
            kind: self.experiment,
            algo: self.algo,
            trials: self.trials.or(file.trials).unwrap_or(DEFAULT_TRIALS),
            seed: system.rng_seed,
            sweep,
            cdf_channels: self.cdf_channels.or(file.cdf_channels).unwrap_or(DEFAULT_CDF_CHANNELS),
            workers: self
                .workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
            timing: self.timing,
            traces: self.traces,
            system,
        })
    }
}
