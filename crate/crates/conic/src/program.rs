use nalgebra::{DMatrix, SymmetricEigen};

use crate::affine::Affine;
use crate::error::ConicError;

/// Role of a scalar variable, used only for bookkeeping and census.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    /// A real decision variable.
    Real,
    /// Real part of a complex decision variable.
    ComplexRe,
    /// Imaginary part of a complex decision variable.
    ComplexIm,
    /// Epigraph or lifting variable introduced by the modeling layer.
    Auxiliary,
}

#[derive(Clone, Debug)]
pub struct VarInfo {
    pub name: String,
    pub kind: VarKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupId(pub usize);

#[derive(Clone, Debug)]
pub enum Constraint {
    /// `expr == 0`
    Eq(Affine),
    /// `expr >= 0`
    Ge(Affine),
    /// `‖x‖₂ ≤ t`
    Soc { t: Affine, x: Vec<Affine> },
}

impl Constraint {
    /// Amount by which `x` violates the constraint; zero when satisfied.
    pub fn violation(&self, x: &[f64]) -> f64 {
        match self {
            Constraint::Eq(e) => e.eval(x).abs(),
            Constraint::Ge(e) => (-e.eval(x)).max(0.0),
            Constraint::Soc { t, x: xs } => {
                let norm = xs.iter().map(|a| a.eval(x).powi(2)).sum::<f64>().sqrt();
                (norm - t.eval(x)).max(0.0)
            }
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            Constraint::Eq(_) | Constraint::Ge(_) => 1,
            Constraint::Soc { x, .. } => 1 + x.len(),
        }
    }

    fn exprs(&self) -> Box<dyn Iterator<Item = &Affine> + '_> {
        match self {
            Constraint::Eq(e) | Constraint::Ge(e) => Box::new(std::iter::once(e)),
            Constraint::Soc { t, x } => Box::new(std::iter::once(t).chain(x.iter())),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Row {
    pub constraint: Constraint,
    pub group: Option<GroupId>,
}

/// Variable counts of a program, with a complex coefficient counted once.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Census {
    pub real: usize,
    pub complex: usize,
    pub auxiliary: usize,
    pub groups: usize,
}

impl Census {
    pub fn decision_variables(&self) -> usize {
        self.real + self.complex
    }
}

/// A second-order cone program `maximize c·x + c0` over linear and SOC rows.
#[derive(Clone, Debug, Default)]
pub struct ConicProgram {
    vars: Vec<VarInfo>,
    objective: Affine,
    rows: Vec<Row>,
    groups: Vec<String>,
}

/// A factor `M` with `Q = MᵀM`, stored row by row.
#[derive(Clone, Debug, PartialEq)]
pub struct PsdFactor {
    rows: Vec<Vec<f64>>,
    cols: usize,
}

impl PsdFactor {
    /// Wraps an explicit factor. Any real matrix is a valid factor.
    pub fn from_rows(rows: Vec<Vec<f64>>, cols: usize) -> Result<Self, ConicError> {
        for r in &rows {
            if r.len() != cols {
                return Err(ConicError::Shape(format!(
                    "factor row has {} entries, expected {cols}",
                    r.len()
                )));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(ConicError::NonFinite);
            }
        }
        Ok(PsdFactor { rows, cols })
    }

    /// Factors a symmetric matrix through its eigen-decomposition.
    ///
    /// Rejects asymmetric input and eigenvalues below `-1e-10·max(1, ‖Q‖)`.
    pub fn from_matrix(q: &DMatrix<f64>) -> Result<Self, ConicError> {
        let n = q.nrows();
        if q.ncols() != n {
            return Err(ConicError::Shape(format!("{}x{} is not square", n, q.ncols())));
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(ConicError::NonFinite);
        }
        let scale = q.amax().max(1.0);
        if (q - q.transpose()).amax() > 1e-12 * scale {
            return Err(ConicError::NotPsd { min_eigenvalue: f64::NAN });
        }
        let sym = (q + q.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let min = eig.eigenvalues.min();
        if min < -1e-10 * scale {
            return Err(ConicError::NotPsd { min_eigenvalue: min });
        }
        let mut rows = Vec::new();
        for (k, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam <= 0.0 {
                continue;
            }
            let s = lam.sqrt();
            rows.push((0..n).map(|i| s * eig.eigenvectors[(i, k)]).collect());
        }
        Ok(PsdFactor { rows, cols: n })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind) -> usize {
        self.vars.push(VarInfo {
            name: name.into(),
            kind,
        });
        self.vars.len() - 1
    }

    /// Adds the interleaved real and imaginary parts of one complex scalar.
    pub fn add_complex_var(&mut self, name: &str) -> (usize, usize) {
        let re = self.add_var(format!("{name}.re"), VarKind::ComplexRe);
        let im = self.add_var(format!("{name}.im"), VarKind::ComplexIm);
        (re, im)
    }

    pub fn add_group(&mut self, name: impl Into<String>) -> GroupId {
        self.groups.push(name.into());
        GroupId(self.groups.len() - 1)
    }

    pub fn set_objective(&mut self, objective: Affine) {
        self.objective = objective;
    }

    pub fn objective(&self) -> &Affine {
        &self.objective
    }

    pub fn vars(&self) -> &[VarInfo] {
        &self.vars
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn group_names(&self) -> &[String] {
        &self.groups
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn add_eq(&mut self, expr: Affine, group: Option<GroupId>) {
        self.push(Constraint::Eq(expr), group);
    }

    /// `expr >= 0`
    pub fn add_ge(&mut self, expr: Affine, group: Option<GroupId>) {
        self.push(Constraint::Ge(expr), group);
    }

    /// `lhs <= rhs`
    pub fn add_le(&mut self, lhs: Affine, rhs: Affine, group: Option<GroupId>) {
        self.push(Constraint::Ge(rhs - lhs), group);
    }

    /// `‖x‖₂ ≤ t`
    pub fn add_soc(&mut self, t: Affine, x: Vec<Affine>, group: Option<GroupId>) {
        self.push(Constraint::Soc { t, x }, group);
    }

    /// `‖x‖² ≤ a·b` with `a, b ≥ 0`, via `‖(2x, a − b)‖ ≤ a + b`.
    pub fn add_rotated_soc(&mut self, x: Vec<Affine>, a: Affine, b: Affine, group: Option<GroupId>) {
        let mut xs: Vec<Affine> = x.into_iter().map(|e| e * 2.0).collect();
        xs.push(a.clone() - b.clone());
        self.push(Constraint::Soc { t: a + b, x: xs }, group);
    }

    /// Encodes `argsᵀ Q args ≤ target` for `Q = MᵀM`.
    pub fn add_quadratic_epigraph(
        &mut self,
        factor: &PsdFactor,
        args: &[Affine],
        target: Affine,
        group: Option<GroupId>,
    ) -> Result<(), ConicError> {
        if args.len() != factor.cols {
            return Err(ConicError::Shape(format!(
                "factor has {} columns but {} arguments were given",
                factor.cols,
                args.len()
            )));
        }
        let lifted = factor
            .rows
            .iter()
            .map(|row| {
                let mut e = Affine::zero();
                for (coef, a) in row.iter().zip(args) {
                    e.add_scaled(a, *coef);
                }
                e
            })
            .collect();
        self.add_rotated_soc(lifted, target, Affine::constant(1.0), group);
        Ok(())
    }

    fn push(&mut self, constraint: Constraint, group: Option<GroupId>) {
        self.rows.push(Row { constraint, group });
    }

    pub fn census(&self) -> Census {
        let mut c = Census {
            groups: self.groups.len(),
            ..Census::default()
        };
        for v in &self.vars {
            match v.kind {
                VarKind::Real => c.real += 1,
                VarKind::ComplexRe => c.complex += 1,
                VarKind::ComplexIm => {}
                VarKind::Auxiliary => c.auxiliary += 1,
            }
        }
        c
    }

    /// Rows tagged with each group, in group order.
    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.groups.len()];
        for r in &self.rows {
            if let Some(g) = r.group {
                sizes[g.0] += 1;
            }
        }
        sizes
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        let n = self.vars.len();
        let check = |a: &Affine| -> Result<(), ConicError> {
            if !a.constant.is_finite() || a.terms.iter().any(|t| !t.1.is_finite()) {
                return Err(ConicError::NonFinite);
            }
            match a.max_index() {
                Some(i) if i >= n => Err(ConicError::UnknownVariable(i)),
                _ => Ok(()),
            }
        };
        check(&self.objective)?;
        for row in &self.rows {
            if let Constraint::Soc { x, .. } = &row.constraint {
                if x.is_empty() {
                    return Err(ConicError::Shape("second-order cone of dimension 1".into()));
                }
            }
            if let Some(g) = row.group {
                if g.0 >= self.groups.len() {
                    return Err(ConicError::Shape(format!("unknown group {}", g.0)));
                }
            }
            for e in row.constraint.exprs() {
                check(e)?;
            }
        }
        Ok(())
    }

    /// Largest absolute constraint violation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| r.constraint.violation(x))
            .fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        self.max_violation(x) <= tol
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }
}
