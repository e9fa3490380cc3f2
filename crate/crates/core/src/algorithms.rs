//! Mode sweeps on top of the SCA loop: sum rate, max-min, robust sum rate,
//! the half-duplex baseline and a brute-force oracle for tiny instances.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::channel::{ChannelSet, RobustChannelSet};
use crate::config::SystemConfig;
use crate::mode::{all_valid_modes, enumerate_modes, ModeMatrix};
use crate::rate::{block_rates, Assignment, DesignPoint, LinkModel, RateReport};
use crate::sca::{sca_loop, ObjectiveKind, Problem, ScaError, ScaTrace, StopReason};

/// Objectives closer than this are ties; the earlier mode wins.
pub const TIE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlgorithmKind {
    SumRate,
    MaxMin { eta: f64 },
    RobustSumRate,
    HalfDuplex,
    RobustHalfDuplex,
    BruteForce,
}

impl AlgorithmKind {
    /// Short label used in result files.
    pub fn label(&self) -> &'static str {
        match self {
            AlgorithmKind::SumRate => "sr",
            AlgorithmKind::MaxMin { .. } => "maxmin",
            AlgorithmKind::RobustSumRate => "robust-sr",
            AlgorithmKind::HalfDuplex => "hd",
            AlgorithmKind::RobustHalfDuplex => "robust-hd",
            AlgorithmKind::BruteForce => "bfs",
        }
    }
}

/// How one fixed-mode loop ended.
#[derive(Clone, Debug, PartialEq)]
pub enum ModeOutcome {
    /// A point was reached; `objective` is the lifted objective there.
    Solved { objective: f64, stop: StopReason },
    Infeasible,
    Failed { reason: String },
}

#[derive(Clone, Debug)]
pub struct ModeRecord {
    pub mode: ModeMatrix,
    /// Served pairs imposed on the loop (all pairs outside the oracle).
    pub active: Assignment,
    pub outcome: ModeOutcome,
    pub trace: Option<ScaTrace>,
    pub point: Option<DesignPoint>,
}

impl ModeRecord {
    pub fn objective(&self) -> Option<f64> {
        match self.outcome {
            ModeOutcome::Solved { objective, .. } => Some(objective),
            _ => None,
        }
    }

    pub fn iterations(&self) -> usize {
        self.trace.as_ref().map_or(0, |t| t.iterations())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolutionStatus {
    Optimal,
    /// The winning mode stopped at the iteration cap, or its solver broke down
    /// after the bootstrap, so the stopping test was never met.
    CapExit,
    Infeasible,
    /// No mode produced a point and at least one hit a solver failure.
    Failure,
}

impl SolutionStatus {
    pub fn label(&self) -> &'static str {
        match self {
            SolutionStatus::Optimal => "optimal",
            SolutionStatus::CapExit => "cap-exit",
            SolutionStatus::Infeasible => "infeasible",
            SolutionStatus::Failure => "failure",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub kind: AlgorithmKind,
    pub status: SolutionStatus,
    /// Index of the winning entry in `outcomes`.
    pub best: Option<usize>,
    pub point: Option<DesignPoint>,
    /// Rates at `point` with the assignment recomputed from its SINRs.
    pub rates: Option<RateReport>,
    /// Lifted objective of the winning mode (nats/s/Hz).
    pub objective: f64,
    pub outcomes: Vec<ModeRecord>,
    pub wall_time: Duration,
}

impl Solution {
    pub fn mode(&self) -> Option<ModeMatrix> {
        self.best.map(|i| self.outcomes[i].mode)
    }

    pub fn tau(&self) -> Option<f64> {
        self.point.as_ref().map(|p| p.tau())
    }

    /// SCA steps summed over every mode.
    pub fn total_iterations(&self) -> usize {
        self.outcomes.iter().map(|o| o.iterations()).sum()
    }

    /// SCA steps of the winning mode.
    pub fn iterations(&self) -> usize {
        self.best.map_or(0, |i| self.outcomes[i].iterations())
    }

    pub fn is_feasible(&self) -> bool {
        self.point.is_some()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgorithmError {
    #[error("brute force is limited to L, K, N ≤ 2 (got L={num_ul}, K={num_dl}, N={half})")]
    TooLarge { num_ul: usize, num_dl: usize, half: usize },
}

fn run_mode(problem: &Problem, kind: ObjectiveKind) -> ModeRecord {
    let base = ModeRecord {
        mode: problem.mode,
        active: problem.active.clone(),
        outcome: ModeOutcome::Infeasible,
        trace: None,
        point: None,
    };
    match sca_loop(problem, kind) {
        Ok(o) => ModeRecord {
            outcome: ModeOutcome::Solved {
                objective: o.objective,
                stop: o.trace.stop.unwrap_or(StopReason::Converged),
            },
            trace: Some(o.trace),
            point: Some(o.point),
            ..base
        },
        Err(ScaError::Infeasible { trace }) => ModeRecord {
            trace: Some(*trace),
            ..base
        },
        Err(e) => ModeRecord {
            outcome: ModeOutcome::Failed { reason: e.to_string() },
            trace: e.trace().cloned(),
            ..base
        },
    }
}

/// Picks the best record, earlier entries winning ties, and evaluates the
/// true rates there.
fn reduce(
    kind: AlgorithmKind,
    link: &LinkModel,
    config: &SystemConfig,
    eta: f64,
    outcomes: Vec<ModeRecord>,
    start: Instant,
) -> Solution {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in outcomes.iter().enumerate() {
        if let Some(v) = r.objective() {
            if best.is_none_or(|(_, b)| v > b + TIE_TOL) {
                best = Some((i, v));
            }
        }
    }
    let Some((i, objective)) = best else {
        let failed = outcomes.iter().any(|r| matches!(r.outcome, ModeOutcome::Failed { .. }));
        return Solution {
            kind,
            status: if failed { SolutionStatus::Failure } else { SolutionStatus::Infeasible },
            best: None,
            point: None,
            rates: None,
            objective: f64::NEG_INFINITY,
            outcomes,
            wall_time: start.elapsed(),
        };
    };
    let record = &outcomes[i];
    let point = record.point.clone().expect("solved records carry a point");
    let rates = block_rates(link, &record.mode, &point, None, config.assign_threshold, eta)
        .expect("design matches the link");
    let status = match record.outcome {
        ModeOutcome::Solved {
            stop: StopReason::IterationCap | StopReason::SolverFailure(_),
            ..
        } => SolutionStatus::CapExit,
        _ => SolutionStatus::Optimal,
    };
    Solution {
        kind,
        status,
        best: Some(i),
        point: Some(point),
        rates: Some(rates),
        objective,
        outcomes,
        wall_time: start.elapsed(),
    }
}

fn sweep(link: &LinkModel, config: &SystemConfig, kind: AlgorithmKind, objective: ObjectiveKind, eta: f64) -> Solution {
    let start = Instant::now();
    let outcomes = enumerate_modes()
        .into_iter()
        .map(|mode| run_mode(&Problem::new(link, mode, config), objective))
        .collect();
    reduce(kind, link, config, eta, outcomes, start)
}

/// Sum-rate maximization over the eight modes.
pub fn solve_sr(channels: &ChannelSet, config: &SystemConfig) -> Solution {
    let link = LinkModel::perfect(channels, config.rho2);
    sweep(&link, config, AlgorithmKind::SumRate, ObjectiveKind::SumRate, 1.0)
}

/// Max-min rate with every DL rate at least `eta` times the common level.
pub fn solve_maxmin(channels: &ChannelSet, config: &SystemConfig, eta: f64) -> Solution {
    assert!(eta >= 1.0, "eta must be at least 1, got {eta}");
    let link = LinkModel::perfect(channels, config.rho2);
    sweep(&link, config, AlgorithmKind::MaxMin { eta }, ObjectiveKind::MaxMin { eta }, eta)
}

/// Worst-case sum rate on the estimated channels; reported rates are the
/// worst-case ones.
pub fn solve_robust_sr(channels: &RobustChannelSet, config: &SystemConfig) -> Solution {
    let link = LinkModel::robust(channels, config.rho2);
    sweep(&link, config, AlgorithmKind::RobustSumRate, ObjectiveKind::RobustSumRate, 1.0)
}

/// Uplink-only then downlink-only, each over half the block with the whole
/// array. With `μ = (2, 2)` the result is the average of the two
/// single-direction optima, and the per-user QoS on the half block is half
/// the full-block threshold.
fn half_duplex(link: &LinkModel, config: &SystemConfig, kind: AlgorithmKind) -> Solution {
    let start = Instant::now();
    let mut problem = Problem::new(link, ModeMatrix::from_codes(0, 3), config);
    problem.fixed_mu = Some([2.0, 2.0]);
    problem.rate_threshold = config.rate_threshold_nats() / 2.0;
    let objective = match kind {
        AlgorithmKind::RobustHalfDuplex => ObjectiveKind::RobustSumRate,
        _ => ObjectiveKind::SumRate,
    };
    let outcomes = vec![run_mode(&problem, objective)];
    reduce(kind, link, config, 1.0, outcomes, start)
}

pub fn hd_baseline(channels: &ChannelSet, config: &SystemConfig) -> Solution {
    let link = LinkModel::perfect(channels, config.rho2);
    half_duplex(&link, config, AlgorithmKind::HalfDuplex)
}

/// The half-duplex baseline with worst-case SINRs on the estimated channels.
pub fn hd_baseline_robust(channels: &RobustChannelSet, config: &SystemConfig) -> Solution {
    let link = LinkModel::robust(channels, config.rho2);
    half_duplex(&link, config, AlgorithmKind::RobustHalfDuplex)
}

/// Upper limits on the oracle's instance size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BruteForceLimits {
    pub max_users: usize,
    pub max_half_array: usize,
}

impl Default for BruteForceLimits {
    fn default() -> Self {
        BruteForceLimits {
            max_users: 2,
            max_half_array: 2,
        }
    }
}

/// Number of (mode, assignment) combinations before any filtering:
/// `16 · 4^L · 4^K`.
pub fn brute_force_case_count(num_ul: usize, num_dl: usize) -> usize {
    16 * 4usize.pow(num_ul as u32) * 4usize.pow(num_dl as u32)
}

/// Every assignment of the served flags over the phases that `mode` enables
/// for each direction; flags of disabled phases stay false.
fn assignments(mode: &ModeMatrix, n: usize, num_ul: usize, num_dl: usize) -> Vec<Assignment> {
    let masks = mode.masks(n);
    let mut slots = Vec::new();
    for u in 0..num_ul {
        for j in 0..2 {
            if masks.ul_enabled(j) {
                slots.push((true, u, j));
            }
        }
    }
    for k in 0..num_dl {
        for j in 0..2 {
            if masks.dl_enabled(j) {
                slots.push((false, k, j));
            }
        }
    }
    (0..1u64 << slots.len())
        .map(|bits| {
            let mut a = Assignment::none(num_ul, num_dl);
            for (b, &(ul, user, j)) in slots.iter().enumerate() {
                let on = bits >> b & 1 == 1;
                if ul {
                    a.ul[user][j] = on;
                } else {
                    a.dl[user][j] = on;
                }
            }
            a
        })
        .collect()
}

/// Exhaustive search over all valid modes and served-pair patterns, each
/// with the sum-rate SCA. Patterns leaving a user unserved cannot meet a
/// positive QoS threshold and come out infeasible.
pub fn bfs_oracle(channels: &ChannelSet, config: &SystemConfig, limits: BruteForceLimits) -> Result<Solution, AlgorithmError> {
    let (num_ul, num_dl, half) = (channels.num_ul(), channels.num_dl(), channels.half_array_size);
    if num_ul > limits.max_users || num_dl > limits.max_users || half > limits.max_half_array {
        return Err(AlgorithmError::TooLarge { num_ul, num_dl, half });
    }
    let start = Instant::now();
    let link = LinkModel::perfect(channels, config.rho2);
    let mut outcomes = Vec::new();
    for mode in all_valid_modes() {
        for active in assignments(&mode, half, num_ul, num_dl) {
            let mut problem = Problem::new(&link, mode, config);
            problem.active = active;
            outcomes.push(run_mode(&problem, ObjectiveKind::SumRate));
        }
    }
    Ok(reduce(AlgorithmKind::BruteForce, &link, config, 1.0, outcomes, start))
}
