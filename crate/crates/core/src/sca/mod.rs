//! Successive convex approximation for one fixed mode.
//!
//! Each iteration expands the nonconvex rate terms around the current
//! design, assembles a second-order cone program whose objective never
//! exceeds the true one and matches it at the expansion point, and moves to
//! its optimum. The feasible sets are nested, so the objective sequence is
//! nondecreasing.

mod build;
mod minorant;
mod run;

pub use build::{
    build_feasibility_subproblem, build_maxmin_subproblem, build_sr_subproblem, Layout, Subproblem, VarMap,
};
pub use minorant::{
    build_minorants, dl_budget_linearization, dl_lifted_rate, dl_minorant_value, stack_dl, ul_budget_linearization,
    ul_lifted_rate, ul_minorant_value, BudgetLin, DlTerm, MinorantCoeffs, UlTerm,
};
pub use run::{
    initial_point, lifted_objective, lifted_rates, prepare_expansion, qos_margin, refresh_time_split, sca_loop, ScaOutcome, ScaTrace, SolverStat,
    StopReason,
};

use conic::{ConicError, SolveOptions, SolveStatus};
use thiserror::Error;

use crate::config::SystemConfig;
use crate::mode::{ModeMatrix, PhaseMasks};
use crate::rate::{Assignment, LinkModel};

/// Smallest admissible value of the DL slack, the trust-region product and
/// `μ_j − 1`.
pub const THETA_MIN: f64 = 1e-9;
pub const TRUST_MIN: f64 = 1e-9;
pub const MU_MARGIN: f64 = 1e-6;
/// Expansion-point amplitudes on served uplink pairs are lifted to this.
pub const P_FLOOR: f64 = 1e-8;

/// What the outer loop maximizes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ObjectiveKind {
    SumRate,
    /// Largest `φ` with every UL rate ≥ φ and every DL rate ≥ η·φ.
    MaxMin { eta: f64 },
    /// Sum of worst-case rates; the link must carry the error variances.
    RobustSumRate,
}

/// Form of the uplink rate minorant in `μ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum UlMinorantForm {
    /// `2√x̄·s/μ̄ − x̄μ/μ̄²` with `s² ≤` the concave log bound. A global
    /// minorant of `ln(1+γ)/μ`.
    #[default]
    Certified,
    /// The log bound divided by `μ̄` with the `μ` dependence linearized at
    /// its value `x̄`. Tight at the expansion point but can overshoot when
    /// the log bound grows while `μ` increases.
    Linearized,
}

/// One fixed-mode instance in noise-normalized units.
#[derive(Clone, Debug)]
pub struct Problem {
    pub link: LinkModel,
    pub mode: ModeMatrix,
    pub masks: PhaseMasks,
    /// Served `(user, phase)` pairs; pairs of disabled phases are ignored.
    pub active: Assignment,
    pub bs_power: f64,
    pub ul_power: f64,
    pub bs_cap: f64,
    pub ul_cap: f64,
    /// Per-user QoS threshold on the block rate, nats/s/Hz.
    pub rate_threshold: f64,
    pub fixed_mu: Option<[f64; 2]>,
    pub layout: Layout,
    pub ul_form: UlMinorantForm,
    /// Re-optimize the phase split exactly after each step.
    pub time_refresh: bool,
    pub tol: f64,
    pub max_iterations: usize,
    pub feasibility_iterations: usize,
    pub solver: SolveOptions,
}

impl Problem {
    /// Normalizes `link` and takes budgets, thresholds and tolerances from
    /// `config`. Every pair of an enabled phase is served.
    pub fn new(link: &LinkModel, mode: ModeMatrix, config: &SystemConfig) -> Self {
        let masks = mode.masks(link.half_array_size);
        Problem {
            link: link.normalized(),
            mode,
            masks,
            active: Assignment::all(link.num_ul(), link.num_dl()),
            bs_power: config.bs_power_w,
            ul_power: config.ul_power_w,
            bs_cap: config.bs_phase_cap_w,
            ul_cap: config.ul_phase_cap_w,
            rate_threshold: config.rate_threshold_nats(),
            fixed_mu: None,
            layout: Layout::Reduced,
            ul_form: UlMinorantForm::Certified,
            time_refresh: config.time_refresh,
            tol: config.sca_tol,
            max_iterations: config.max_iterations,
            feasibility_iterations: config.feasibility_iterations,
            solver: SolveOptions::default(),
        }
    }

    pub fn num_ul(&self) -> usize {
        self.link.num_ul()
    }

    pub fn num_dl(&self) -> usize {
        self.link.num_dl()
    }

    pub fn ul_active(&self, user: usize, j: usize) -> bool {
        self.masks.ul_enabled(j) && self.active.ul[user][j]
    }

    pub fn dl_active(&self, user: usize, j: usize) -> bool {
        self.masks.dl_enabled(j) && self.active.dl[user][j]
    }

    /// Multipliers `k_j(μ₂)` of the exact average-power use `Σ_j k_j ‖x_j‖²`
    /// for a direction whose phase-disabled flags are `off`.
    pub fn budget_weights(off: [bool; 2], mu2: f64) -> [f64; 2] {
        let (o1, o2) = (off[0] as u8 as f64, off[1] as u8 as f64);
        [1.0 + o2 / mu2 - 1.0 / mu2, 1.0 / mu2 + o1 - o1 / mu2]
    }

    pub fn dl_budget_weights(&self, mu2: f64) -> [f64; 2] {
        Self::budget_weights(self.masks.chi, mu2)
    }

    pub fn ul_budget_weights(&self, mu2: f64) -> [f64; 2] {
        Self::budget_weights(self.masks.beta, mu2)
    }
}

#[derive(Debug, Error)]
pub enum ScaError {
    #[error("no QoS-feasible point found for this mode")]
    Infeasible { trace: Box<ScaTrace> },
    #[error("solver stopped with status {status:?}")]
    Solver { status: SolveStatus, trace: Box<ScaTrace> },
    #[error("uplink user {user} has zero expansion power in phase {phase}")]
    ZeroExpansionPower { user: usize, phase: usize },
    #[error("downlink user {user} has a nonpositive signal term in phase {phase}")]
    OutsideTrustRegion { user: usize, phase: usize },
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error(transparent)]
    Rate(#[from] crate::error::RateError),
}

impl ScaError {
    pub fn trace(&self) -> Option<&ScaTrace> {
        match self {
            ScaError::Infeasible { trace } | ScaError::Solver { trace, .. } => Some(trace),
            _ => None,
        }
    }
}
