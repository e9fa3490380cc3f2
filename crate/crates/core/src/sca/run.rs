use std::time::Duration;

use conic::{solve, SolveStatus};

use crate::channel::{CVector, C64};
use crate::rate::{dl_effective, DesignPoint, dl_interference};

use super::build::{build_feasibility_subproblem, build_maxmin_subproblem, build_sr_subproblem};
use super::minorant::{build_minorants, dl_lifted_rate, ul_lifted_rate};
use super::{ObjectiveKind, Problem, ScaError, MU_MARGIN, P_FLOOR, THETA_MIN};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverStat {
    pub status: SolveStatus,
    pub iterations: u32,
    pub wall_time: Duration,
    pub objective: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// Successive objectives differ by less than the tolerance.
    Converged,
    /// The candidate step lowered the objective (solver round-off) and was
    /// discarded.
    NonImproving,
    IterationCap,
    Infeasible,
    SolverFailure(SolveStatus),
}

#[derive(Clone, Debug, Default)]
pub struct ScaTrace {
    /// Smallest QoS margin after each bootstrap step, starting at the
    /// initial point.
    pub feasibility: Vec<f64>,
    /// Objective at each accepted iterate, starting at the first feasible one.
    pub objectives: Vec<f64>,
    pub iterates: Vec<DesignPoint>,
    pub solver: Vec<SolverStat>,
    pub stop: Option<StopReason>,
    /// Objective of a discarded final candidate, if any.
    pub rejected: Option<f64>,
}

impl ScaTrace {
    /// SCA steps taken after the bootstrap.
    pub fn iterations(&self) -> usize {
        self.objectives.len().saturating_sub(1)
    }

    pub fn solve_time(&self) -> Duration {
        self.solver.iter().map(|s| s.wall_time).sum()
    }
}

#[derive(Clone, Debug)]
pub struct ScaOutcome {
    pub point: DesignPoint,
    pub objective: f64,
    pub trace: ScaTrace,
}

/// Starting design: `μ = (2, 2)`, equal amplitudes filling half of each
/// uplink budget, and matched filters filling half of the BS budget, each
/// aligned so its own signal term is real and positive.
pub fn initial_point(problem: &Problem) -> DesignPoint {
    let link = &problem.link;
    let n = link.num_antennas();
    let mut point = DesignPoint::zeros(problem.num_ul(), problem.num_dl(), n);
    if let Some(mu) = problem.fixed_mu {
        point.mu = mu;
    }
    let mu2 = point.mu[1];

    let ku = problem.ul_budget_weights(mu2);
    for u in 0..problem.num_ul() {
        let on = [0, 1].map(|j| problem.ul_active(u, j));
        let used: f64 = (0..2).filter(|&j| on[j]).map(|j| ku[j]).sum();
        if used == 0.0 {
            continue;
        }
        let p2 = 0.5 * (problem.ul_power / used).min(problem.ul_cap);
        for j in 0..2 {
            if on[j] {
                point.p[u][j] = p2.sqrt();
            }
        }
    }

    let kd = problem.dl_budget_weights(mu2);
    let served = [0, 1].map(|j| (0..problem.num_dl()).filter(|&k| problem.dl_active(k, j)).count());
    let used: f64 = (0..2).map(|j| kd[j] * served[j] as f64).sum();
    if used > 0.0 {
        let most = *served.iter().max().unwrap() as f64;
        let s = 0.5 * (problem.bs_power / used).min(problem.bs_cap / most);
        for j in 0..2 {
            let h = dl_effective(link, &problem.masks, j);
            for k in 0..problem.num_dl() {
                if problem.dl_active(k, j) && h[k].norm() > 0.0 {
                    point.w[k][j] = h[k].normalize() * C64::new(s.sqrt(), 0.0);
                }
            }
        }
    }
    prepare_expansion(problem, &mut point);
    point
}

/// Makes `point` a valid expansion point: unserved and masked entries are
/// zeroed, amplitudes of served pairs lifted to a small floor, the slacks
/// set to their tight values and `μ₁` to `μ₂/(μ₂ − 1)`.
pub fn prepare_expansion(problem: &Problem, point: &mut DesignPoint) {
    let masks = &problem.masks;
    if let Some(mu) = problem.fixed_mu {
        point.mu = mu;
    } else {
        let mu2 = point.mu[1].max(1.0 + MU_MARGIN);
        point.mu = [(mu2 / (mu2 - 1.0)).max(1.0 + MU_MARGIN), mu2];
    }
    for u in 0..problem.num_ul() {
        for j in 0..2 {
            point.p[u][j] = if problem.ul_active(u, j) { point.p[u][j].max(P_FLOOR) } else { 0.0 };
        }
    }
    for k in 0..problem.num_dl() {
        for j in 0..2 {
            if problem.dl_active(k, j) {
                let w = &mut point.w[k][j];
                for a in 0..w.len() {
                    if !masks.lambda[j][a] {
                        w[a] = C64::new(0.0, 0.0);
                    }
                }
            } else {
                point.w[k][j] = CVector::zeros(point.w[k][j].len());
            }
        }
    }
    for j in 0..2 {
        let h = dl_effective(&problem.link, masks, j);
        let psi = dl_interference(&problem.link, masks, j, point).expect("point matches the link");
        for k in 0..problem.num_dl() {
            point.theta[k][j] = if problem.dl_active(k, j) {
                let re = h[k].dotc(&point.w[k][j]).re;
                if re > 0.0 {
                    (psi[k] / (re * re)).max(THETA_MIN)
                } else {
                    f64::INFINITY
                }
            } else {
                1.0
            };
        }
    }
}

/// Per-user block rates `(UL, DL)` with each phase weighted by `1/μ_j` and
/// the downlink signal taken as `Re(h̃ᴴw)²`.
pub fn lifted_rates(problem: &Problem, point: &DesignPoint) -> (Vec<f64>, Vec<f64>) {
    let ul = (0..problem.num_ul())
        .map(|u| (0..2).filter(|&j| problem.ul_active(u, j)).map(|j| ul_lifted_rate(problem, point, u, j)).sum())
        .collect();
    let dl = (0..problem.num_dl())
        .map(|k| (0..2).filter(|&j| problem.dl_active(k, j)).map(|j| dl_lifted_rate(problem, point, k, j)).sum())
        .collect();
    (ul, dl)
}

/// The quantity each subproblem's optimum bounds from below, evaluated
/// exactly at `point`.
pub fn lifted_objective(problem: &Problem, kind: ObjectiveKind, point: &DesignPoint) -> f64 {
    let (ul, dl) = lifted_rates(problem, point);
    match kind {
        ObjectiveKind::SumRate | ObjectiveKind::RobustSumRate => ul.iter().sum::<f64>() + dl.iter().sum::<f64>(),
        ObjectiveKind::MaxMin { eta } => ul
            .iter()
            .copied()
            .chain(dl.iter().map(|r| r / eta))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Smallest phase share the exact split refresh will move to.
pub const REFRESH_T_MIN: f64 = 1e-3;
/// Largest change of the phase share in one refresh. The sum rate is affine
/// in the share, so an unbounded refresh always jumps to an end of the
/// interval and can strand the iterate in a nearly empty phase.
pub const REFRESH_STEP: f64 = 0.1;

/// Best phase split with the beamformers and amplitudes of `point` held
/// fixed, or `None` when it does not beat the current split.
///
/// With everything else fixed, each block rate, QoS row and budget is affine
/// in `t = 1/μ₂` (taking `1/μ₁ = 1 − t`), so the sum-rate split is an end of
/// the feasible interval and the max-min split is a breakpoint of a concave
/// piecewise-affine function. The interval is clipped to [`REFRESH_STEP`]
/// around the current split, which is always feasible, so the loop stays
/// monotone.
pub fn refresh_time_split(problem: &Problem, kind: ObjectiveKind, point: &DesignPoint) -> Option<DesignPoint> {
    if problem.fixed_mu.is_some() {
        return None;
    }
    // (c, d) pairs for c + d·t
    let line = |per_phase: [f64; 2]| (per_phase[0], per_phase[1] - per_phase[0]);
    let mut ul = Vec::new();
    for u in 0..problem.num_ul() {
        let logs = [0, 1].map(|j| {
            if problem.ul_active(u, j) {
                ul_lifted_rate(problem, point, u, j) * point.mu[j]
            } else {
                0.0
            }
        });
        ul.push(line(logs));
    }
    let mut dl = Vec::new();
    for k in 0..problem.num_dl() {
        let logs = [0, 1].map(|j| {
            if problem.dl_active(k, j) {
                dl_lifted_rate(problem, point, k, j) * point.mu[j]
            } else {
                0.0
            }
        });
        dl.push(line(logs));
    }

    let t_now = 1.0 / point.mu[1];
    // a phase squeezed to nothing leaves the next cone program badly scaled
    let mut lo = REFRESH_T_MIN.max(t_now - REFRESH_STEP);
    let mut hi = (1.0 - REFRESH_T_MIN).min(t_now + REFRESH_STEP);
    let mut keep = |c: f64, d: f64| {
        // c + d·t ≥ 0
        if d > 0.0 {
            lo = lo.max(-c / d);
        } else if d < 0.0 {
            hi = hi.min(-c / d);
        } else if c < 0.0 {
            lo = f64::INFINITY;
        }
    };
    if !matches!(kind, ObjectiveKind::MaxMin { .. }) {
        for &(c, d) in ul.iter().chain(&dl) {
            keep(c - problem.rate_threshold, d);
        }
    }
    // budgets: k(t) = [1 − (1 − o₂)t, o₁ + (1 − o₁)t]
    let budget = |off: [bool; 2], used: [f64; 2], cap: f64| {
        let (o1, o2) = (off[0] as u8 as f64, off[1] as u8 as f64);
        (cap - used[0] - o1 * used[1], (1.0 - o2) * used[0] - (1.0 - o1) * used[1])
    };
    let (c, d) = budget(problem.masks.chi, [point.dl_power(0), point.dl_power(1)], problem.bs_power);
    keep(c, d);
    for u in 0..problem.num_ul() {
        let used = [0, 1].map(|j| point.p[u][j] * point.p[u][j]);
        let (c, d) = budget(problem.masks.beta, used, problem.ul_power);
        keep(c, d);
    }
    if lo > hi {
        return None;
    }

    let pieces: Vec<(f64, f64)> = match kind {
        ObjectiveKind::MaxMin { eta } => ul.iter().copied().chain(dl.iter().map(|&(c, d)| (c / eta, d / eta))).collect(),
        _ => {
            let sum = ul.iter().chain(&dl).fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
            vec![sum]
        }
    };
    let value = |t: f64| pieces.iter().map(|&(c, d)| c + d * t).fold(f64::INFINITY, f64::min);
    let mut candidates = vec![lo, hi];
    for (i, a) in pieces.iter().enumerate() {
        for b in &pieces[i + 1..] {
            if a.1 != b.1 {
                let t = (b.0 - a.0) / (a.1 - b.1);
                if t > lo && t < hi {
                    candidates.push(t);
                }
            }
        }
    }
    let now = value(t_now.clamp(lo, hi));
    let (best_t, best) = candidates
        .into_iter()
        .map(|t| (t, value(t)))
        .fold((t_now, now), |acc, c| if c.1 > acc.1 { c } else { acc });
    if best <= now {
        return None;
    }
    let mut next = point.clone();
    next.mu = [1.0 / (1.0 - best_t), 1.0 / best_t];
    prepare_expansion(problem, &mut next);
    Some(next)
}

/// Smallest per-user slack over the QoS threshold.
pub fn qos_margin(problem: &Problem, point: &DesignPoint) -> f64 {
    let (ul, dl) = lifted_rates(problem, point);
    ul.iter().chain(&dl).map(|r| r - problem.rate_threshold).fold(f64::INFINITY, f64::min)
}

fn record(trace: &mut ScaTrace, r: &conic::SolveResult) {
    trace.solver.push(SolverStat {
        status: r.status,
        iterations: r.iterations,
        wall_time: r.wall_time,
        objective: r.objective,
    });
}

fn fail(mut trace: ScaTrace, status: SolveStatus) -> ScaError {
    if status == SolveStatus::Infeasible {
        trace.stop = Some(StopReason::Infeasible);
        ScaError::Infeasible { trace: Box::new(trace) }
    } else {
        trace.stop = Some(StopReason::SolverFailure(status));
        ScaError::Solver {
            status,
            trace: Box::new(trace),
        }
    }
}

/// Bootstraps a QoS-feasible point (skipped for max-min, which has no QoS
/// rows), then iterates build → solve → update until the objective gain
/// drops below the tolerance or the iteration cap is hit. A solver breakdown
/// after the bootstrap ends the loop at the last accepted iterate.
pub fn sca_loop(problem: &Problem, kind: ObjectiveKind) -> Result<ScaOutcome, ScaError> {
    let mut point = initial_point(problem);
    let mut trace = ScaTrace::default();

    if !matches!(kind, ObjectiveKind::MaxMin { .. }) {
        let mut margin = qos_margin(problem, &point);
        trace.feasibility.push(margin);
        let mut steps = 0;
        while margin <= 0.0 {
            if steps == problem.feasibility_iterations {
                trace.stop = Some(StopReason::Infeasible);
                return Err(ScaError::Infeasible { trace: Box::new(trace) });
            }
            steps += 1;
            let coeffs = build_minorants(problem, &point)?;
            let sub = build_feasibility_subproblem(problem, &coeffs);
            let r = solve(&sub.program, &problem.solver)?;
            record(&mut trace, &r);
            if !r.status.has_point() {
                return Err(fail(trace, r.status));
            }
            let mut next = sub.vars.extract(&r.x, &point);
            prepare_expansion(problem, &mut next);
            let m = qos_margin(problem, &next);
            trace.feasibility.push(m);
            if m <= 0.0 && m - margin < 1e-7 * margin.abs().max(1.0) {
                trace.stop = Some(StopReason::Infeasible);
                return Err(ScaError::Infeasible { trace: Box::new(trace) });
            }
            if m > margin {
                point = next;
                margin = m;
            }
        }
    }

    let mut current = lifted_objective(problem, kind, &point);
    trace.objectives.push(current);
    trace.iterates.push(point.clone());
    let mut stop = StopReason::IterationCap;
    for _ in 0..problem.max_iterations {
        let coeffs = build_minorants(problem, &point)?;
        let sub = match kind {
            ObjectiveKind::SumRate | ObjectiveKind::RobustSumRate => build_sr_subproblem(problem, &coeffs),
            ObjectiveKind::MaxMin { eta } => build_maxmin_subproblem(problem, &coeffs, eta),
        };
        let r = solve(&sub.program, &problem.solver)?;
        record(&mut trace, &r);
        if !r.status.has_point() {
            // the current iterate is feasible, so keep it
            stop = StopReason::SolverFailure(r.status);
            break;
        }
        let mut next = sub.vars.extract(&r.x, &point);
        prepare_expansion(problem, &mut next);
        let mut value = lifted_objective(problem, kind, &next);
        if problem.time_refresh && value >= current {
            if let Some(better) = refresh_time_split(problem, kind, &next) {
                let v = lifted_objective(problem, kind, &better);
                if v > value {
                    next = better;
                    value = v;
                }
            }
        }
        if value < current {
            trace.rejected = Some(value);
            stop = StopReason::NonImproving;
            break;
        }
        trace.objectives.push(value);
        trace.iterates.push(next.clone());
        point = next;
        let gain = value - current;
        current = value;
        if gain < problem.tol {
            stop = StopReason::Converged;
            break;
        }
    }
    trace.stop = Some(stop);
    Ok(ScaOutcome {
        point,
        objective: current,
        trace,
    })
}
