//! Seeded Monte-Carlo runs over trials and sweep points.

use std::f64::consts::LN_2;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use duplex::algorithms::{hd_baseline, hd_baseline_robust, solve_maxmin, solve_robust_sr, solve_sr, Solution};
use duplex::channel::{
    generate_topology, sample_channels, split_robust, ChannelSet, CsiErrors, RobustChannelSet, Topology,
};
use duplex::config::db_to_linear;
use duplex::SystemConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;
use thiserror::Error;

use crate::config::describe;
use crate::output::{fmt_float, summarize, write_csv, ResultRow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ExperimentKind {
    Single,
    Convergence,
    #[value(name = "sweep-rho2")]
    SweepRho2,
    #[value(name = "sweep-eta")]
    SweepEta,
    #[value(name = "sweep-delta")]
    SweepDelta,
    Cdf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum AlgoChoice {
    Sr,
    Maxmin,
    #[value(name = "robust-sr")]
    RobustSr,
    Hd,
    All,
}

impl AlgoChoice {
    fn expand(self) -> Vec<AlgoChoice> {
        match self {
            AlgoChoice::All => vec![AlgoChoice::Sr, AlgoChoice::Maxmin, AlgoChoice::RobustSr, AlgoChoice::Hd],
            a => vec![a],
        }
    }
}

/// Which scenario scalar a sweep moves.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Rho2Db,
    Eta,
    Delta,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub system: SystemConfig,
    pub kind: ExperimentKind,
    pub algo: AlgoChoice,
    /// Topologies for the CDF experiment, trials otherwise.
    pub trials: usize,
    pub seed: u64,
    pub sweep: Option<(SweepAxis, Vec<f64>)>,
    pub cdf_channels: usize,
    pub workers: usize,
    pub timing: bool,
    pub traces: bool,
}

pub const DEFAULT_RHO2_GRID_DB: [f64; 6] = [-110.0, -90.0, -70.0, -50.0, -30.0, -10.0];
pub const DEFAULT_ETA_GRID: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];
pub const DEFAULT_DELTA_GRID: [f64; 4] = [0.0, 2.0, 4.0, 6.0];
pub const DEFAULT_CDF_CHANNELS: usize = 10;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid experiment: {0}")]
    Spec(String),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), RunError> {
        if self.trials == 0 {
            return Err(RunError::Spec("trials must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(RunError::Spec("workers must be at least 1".into()));
        }
        if self.kind == ExperimentKind::Cdf && self.cdf_channels == 0 {
            return Err(RunError::Spec("cdf_channels must be at least 1".into()));
        }
        if let Some((axis, grid)) = &self.sweep {
            if grid.is_empty() {
                return Err(RunError::Spec("sweep grid is empty".into()));
            }
            for &v in grid {
                let mut s = self.system.clone();
                apply(&mut s, *axis, v);
                s.validate().map_err(|e| RunError::Spec(format!("sweep value {v}: {e}")))?;
            }
        }
        self.system.validate().map_err(|e| RunError::Spec(e.to_string()))
    }

    /// Sweep points, or a single unnamed point.
    fn points(&self) -> Vec<Option<f64>> {
        match &self.sweep {
            Some((_, grid)) => grid.iter().map(|&v| Some(v)).collect(),
            None => vec![None],
        }
    }

    fn algorithms(&self) -> Vec<AlgoChoice> {
        self.algo.expand()
    }
}

fn apply(s: &mut SystemConfig, axis: SweepAxis, v: f64) {
    match axis {
        SweepAxis::Rho2Db => s.rho2 = db_to_linear(v),
        SweepAxis::Eta => s.eta = v,
        SweepAxis::Delta => s.csi_delta = v,
    }
}

/// Trial `i` of a run seeded with `seed`: its own ChaCha stream.
pub fn trial_rng(seed: u64, i: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(i);
    r
}

/// Separate stream family for the CSI error draws, so that the channels do
/// not depend on the error settings.
fn error_rng(seed: u64, i: u64) -> ChaCha8Rng {
    trial_rng(seed ^ 0x9e37_79b9_7f4a_7c15, i)
}

/// Channels of trial `i` outside the CDF experiment: a fresh topology and
/// one draw, both from the trial's own stream.
pub fn trial_channels(system: &SystemConfig, seed: u64, i: usize) -> ChannelSet {
    let mut r = trial_rng(seed, i as u64);
    let topo = generate_topology(system, &mut r);
    sample_channels(&topo, system, &mut r)
}

/// Estimated channels of trial `i` with the error variances of `system`.
pub fn robust_channels(channels: &ChannelSet, system: &SystemConfig, seed: u64, i: usize) -> RobustChannelSet {
    let errors = CsiErrors::from_config(channels, system);
    split_robust(channels, &errors, &mut error_rng(seed, i as u64))
        .expect("relative error variances are clamped to the link variance")
}

/// One channel realization with its trial index.
struct Draw {
    trial: usize,
    channels: ChannelSet,
}

fn draws_for(spec: &ExperimentSpec, task: usize) -> Vec<Draw> {
    let mut r = trial_rng(spec.seed, task as u64);
    let topo: Topology = generate_topology(&spec.system, &mut r);
    let per = if spec.kind == ExperimentKind::Cdf { spec.cdf_channels } else { 1 };
    (0..per)
        .map(|c| Draw {
            trial: task * per + c,
            channels: sample_channels(&topo, &spec.system, &mut r),
        })
        .collect()
}

fn run_algorithm(algo: AlgoChoice, spec: &ExperimentSpec, system: &SystemConfig, draw: &Draw) -> Solution {
    let robust = |system: &SystemConfig| robust_channels(&draw.channels, system, spec.seed, draw.trial);
    match algo {
        AlgoChoice::Sr => solve_sr(&draw.channels, system),
        AlgoChoice::Maxmin => solve_maxmin(&draw.channels, system, system.eta),
        AlgoChoice::RobustSr => solve_robust_sr(&robust(system), system),
        // under a CSI-error sweep the baseline sees the same worst case
        AlgoChoice::Hd if matches!(spec.sweep, Some((SweepAxis::Delta, _))) => {
            hd_baseline_robust(&robust(system), system)
        }
        AlgoChoice::Hd => hd_baseline(&draw.channels, system),
        AlgoChoice::All => unreachable!("expanded before dispatch"),
    }
}

/// Per-iteration values of every mode loop of one solution.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub algorithm: String,
    pub sweep_value: Option<f64>,
    pub mode: (u8, u8),
    /// `bootstrap` for the QoS-margin phase, `sca` for the objective.
    pub stage: &'static str,
    pub iteration: usize,
    /// bps/Hz.
    pub value: f64,
}

fn trace_rows(sol: &Solution, sweep_value: Option<f64>) -> Vec<TraceRow> {
    let mut out = Vec::new();
    for rec in &sol.outcomes {
        let Some(trace) = &rec.trace else { continue };
        let stages = [("bootstrap", &trace.feasibility), ("sca", &trace.objectives)];
        for (stage, values) in stages {
            for (iteration, v) in values.iter().enumerate() {
                out.push(TraceRow {
                    algorithm: sol.kind.label().to_string(),
                    sweep_value,
                    mode: rec.mode.codes(),
                    stage,
                    iteration,
                    value: v / LN_2,
                });
            }
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    /// Per trial, present when traces were requested.
    pub traces: Vec<(usize, Vec<TraceRow>)>,
}

/// Runs every trial; rows come back in trial order whatever the worker count.
pub fn run(spec: &ExperimentSpec) -> Result<RunOutput, RunError> {
    spec.validate()?;
    let want_traces = spec.traces || spec.kind == ExperimentKind::Convergence;
    let task = |t: usize| {
        let mut rows = Vec::new();
        let mut traces = Vec::new();
        for draw in draws_for(spec, t) {
            let mut trace = Vec::new();
            for point in spec.points() {
                let mut system = spec.system.clone();
                if let (Some((axis, _)), Some(v)) = (&spec.sweep, point) {
                    apply(&mut system, *axis, v);
                }
                for algo in spec.algorithms() {
                    let sol = run_algorithm(algo, spec, &system, &draw);
                    if want_traces {
                        trace.extend(trace_rows(&sol, point));
                    }
                    rows.push(ResultRow::from_solution(draw.trial, &sol, point, spec.timing));
                }
            }
            if want_traces {
                traces.push((draw.trial, trace));
            }
        }
        (rows, traces)
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(spec.workers).build()?;
    let parts: Vec<_> = pool.install(|| (0..spec.trials).into_par_iter().map(task).collect());
    let mut out = RunOutput::default();
    for (rows, traces) in parts {
        out.rows.extend(rows);
        out.traces.extend(traces);
    }
    Ok(out)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> RunError + '_ {
    move |source| RunError::Csv {
        path: path.display().to_string(),
        source,
    }
}

fn kind_name(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Single => "single",
        ExperimentKind::Convergence => "convergence",
        ExperimentKind::SweepRho2 => "sweep-rho2",
        ExperimentKind::SweepEta => "sweep-eta",
        ExperimentKind::SweepDelta => "sweep-delta",
        ExperimentKind::Cdf => "cdf",
    }
}

/// Writes `results.csv`, `summary.json` and any `trace_<trial>.csv` into
/// `dir`, creating it if needed. Returns the paths written.
pub fn write_outputs(spec: &ExperimentSpec, out: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();

    let path = dir.join("results.csv");
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    write_csv(BufWriter::new(file), &out.rows).map_err(csv_err(&path))?;
    written.push(path);

    let config: serde_json::Map<String, serde_json::Value> =
        describe(&spec.system).into_iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
    let summary = json!({
        "experiment": kind_name(spec.kind),
        "seed": spec.seed,
        "trials": spec.trials,
        "cdf_channels": (spec.kind == ExperimentKind::Cdf).then_some(spec.cdf_channels),
        "sweep": spec.sweep.as_ref().map(|(axis, grid)| json!({
            "axis": match axis {
                SweepAxis::Rho2Db => "rho2_db",
                SweepAxis::Eta => "eta",
                SweepAxis::Delta => "csi_delta",
            },
            "grid": grid,
        })),
        "config": config,
        "groups": summarize(&out.rows),
    });
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary is plain data");
    fs::write(&path, text + "\n").map_err(io_err(&path))?;
    written.push(path);

    for (trial, rows) in &out.traces {
        let path = dir.join(format!("trace_{trial}.csv"));
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        let res = (|| {
            w.write_record(["algorithm", "sweep_value", "mode_hat1", "mode_hat2", "stage", "iteration", "value_bpshz"])?;
            for r in rows {
                w.write_record([
                    r.algorithm.clone(),
                    r.sweep_value.map(fmt_float).unwrap_or_default(),
                    r.mode.0.to_string(),
                    r.mode.1.to_string(),
                    r.stage.to_string(),
                    r.iteration.to_string(),
                    fmt_float(r.value),
                ])?;
            }
            w.flush()?;
            Ok(())
        })();
        res.map_err(csv_err(&path))?;
        written.push(path);
    }
    Ok(written)
}
