use std::time::{Duration, Instant};

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use crate::affine::Affine;
use crate::error::ConicError;
use crate::program::{ConicProgram, Constraint};

/// Absolute row violation allowed for a point reported as optimal.
pub const FEASIBILITY_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    /// Absolute and relative duality-gap tolerance.
    pub tol: f64,
    pub max_iter: u32,
    /// Print the solver's iteration log.
    pub verbose: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-8,
            max_iter: 200,
            verbose: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// Solved to reduced accuracy; `x` is usable but outside the strict contract.
    AlmostOptimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
    IterationLimit,
}

impl SolveStatus {
    pub fn has_point(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::AlmostOptimal)
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// `c·x + c0` at `x`, in the program's maximization sense.
    pub objective: f64,
    pub gap: f64,
    /// Largest absolute row violation of `x` against the original program.
    pub max_violation: f64,
    pub iterations: u32,
    pub wall_time: Duration,
}

struct Lowered {
    a: CscMatrix<f64>,
    b: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
}

fn lower(program: &ConicProgram) -> Lowered {
    let n = program.num_vars();
    let (mut ii, mut jj, mut vv) = (Vec::new(), Vec::new(), Vec::new());
    let mut b = Vec::new();
    let mut push = |e: &Affine, b: &mut Vec<f64>| {
        let row = b.len();
        for (j, c) in e.compacted() {
            ii.push(row);
            jj.push(j);
            vv.push(-c);
        }
        b.push(e.constant);
    };
    let mut cones = Vec::new();

    let eqs: Vec<&Affine> = program
        .rows()
        .iter()
        .filter_map(|r| match &r.constraint {
            Constraint::Eq(e) => Some(e),
            _ => None,
        })
        .collect();
    for e in &eqs {
        push(e, &mut b);
    }
    if !eqs.is_empty() {
        cones.push(SupportedConeT::ZeroConeT(eqs.len()));
    }

    let ges: Vec<&Affine> = program
        .rows()
        .iter()
        .filter_map(|r| match &r.constraint {
            Constraint::Ge(e) => Some(e),
            _ => None,
        })
        .collect();
    for e in &ges {
        push(e, &mut b);
    }
    if !ges.is_empty() {
        cones.push(SupportedConeT::NonnegativeConeT(ges.len()));
    }

    for r in program.rows() {
        if let Constraint::Soc { t, x } = &r.constraint {
            push(t, &mut b);
            for e in x {
                push(e, &mut b);
            }
            cones.push(SupportedConeT::SecondOrderConeT(1 + x.len()));
        }
    }

    let m = b.len();
    Lowered {
        a: CscMatrix::new_from_triplets(m, n, ii, jj, vv),
        b,
        cones,
    }
}

/// Solves `program` with Clarabel.
///
/// Never panics on numerical trouble; breakdowns are reported through
/// [`SolveStatus::NumericalFailure`]. A malformed program is an error.
pub fn solve(program: &ConicProgram, options: &SolveOptions) -> Result<SolveResult, ConicError> {
    program.validate()?;
    let start = Instant::now();
    let n = program.num_vars();
    let lowered = lower(program);

    let mut q = vec![0.0; n];
    for (j, c) in program.objective().compacted() {
        q[j] = -c;
    }
    let p = CscMatrix::zeros((n, n));
    let settings = DefaultSettingsBuilder::default()
        .verbose(options.verbose)
        .max_iter(options.max_iter)
        .tol_gap_abs(options.tol)
        .tol_gap_rel(options.tol)
        .tol_feas(options.tol.min(1e-8))
        .build()
        .map_err(|e| ConicError::Setup(e.to_string()))?;

    let mut solver = DefaultSolver::new(&p, &q, &lowered.a, &lowered.b, &lowered.cones, settings)
        .map_err(|e| ConicError::Setup(e.to_string()))?;
    solver.solve();
    let sol = &solver.solution;

    let x: Vec<f64> = sol.x.clone();
    let finite = x.iter().all(|v| v.is_finite());
    let max_violation = if finite {
        program.max_violation(&x)
    } else {
        f64::INFINITY
    };
    let primal = -sol.obj_val;
    let dual = -sol.obj_val_dual;
    let gap = (primal - dual).abs() / primal.abs().min(dual.abs()).max(1.0);

    let status = match sol.status {
        SolverStatus::Solved if finite && max_violation <= FEASIBILITY_TOL => SolveStatus::Optimal,
        SolverStatus::Solved | SolverStatus::AlmostSolved if finite => SolveStatus::AlmostOptimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            SolveStatus::Infeasible
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        SolverStatus::MaxIterations | SolverStatus::MaxTime => SolveStatus::IterationLimit,
        _ => SolveStatus::NumericalFailure,
    };

    let objective = if finite {
        program.objective_value(&x)
    } else {
        f64::NAN
    };
    Ok(SolveResult {
        status,
        x,
        objective,
        gap,
        max_violation,
        iterations: sol.iterations,
        wall_time: start.elapsed(),
    })
}
