use conic::{Affine, ConicProgram, GroupId, VarKind};

use crate::channel::{CVector, C64};
use crate::rate::{dl_effective, DesignPoint};

use super::minorant::{BudgetLin, MinorantCoeffs};
use super::{Problem, UlMinorantForm, MU_MARGIN, THETA_MIN, TRUST_MIN};

/// How variables of unused antennas and unserved pairs are represented.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Layout {
    /// Every beamformer entry, amplitude and slack is a variable; unused
    /// ones are pinned to zero by their caps.
    Full,
    /// Unused variables are eliminated.
    #[default]
    Reduced,
}

/// Where each design quantity lives in the program's variable vector.
#[derive(Clone, Debug, PartialEq)]
pub struct VarMap {
    pub p: Vec<[Option<usize>; 2]>,
    /// `(antenna, re, im)` for each beamformer entry present.
    pub w: Vec<[Vec<(usize, usize, usize)>; 2]>,
    pub theta: Vec<[Option<usize>; 2]>,
    /// Each slack variable holds `ϑ / unit`, with the unit set to the
    /// expansion value so that every slack is of order one.
    pub theta_unit: Vec<[f64; 2]>,
    pub mu: [usize; 2],
    /// The max-min level or the feasibility margin.
    pub extra: Option<usize>,
}

impl VarMap {
    /// Reads a design back from a solution vector. Absent entries are zero
    /// and absent slacks keep their values from `fallback`.
    pub fn extract(&self, x: &[f64], fallback: &DesignPoint) -> DesignPoint {
        let mut point = fallback.clone();
        for (u, row) in self.p.iter().enumerate() {
            for j in 0..2 {
                point.p[u][j] = row[j].map_or(0.0, |i| x[i]);
            }
        }
        for (k, row) in self.w.iter().enumerate() {
            for j in 0..2 {
                let w = &mut point.w[k][j];
                w.fill(C64::new(0.0, 0.0));
                for &(a, re, im) in &row[j] {
                    w[a] = C64::new(x[re], x[im]);
                }
            }
        }
        for (k, row) in self.theta.iter().enumerate() {
            for j in 0..2 {
                if let Some(i) = row[j] {
                    point.theta[k][j] = x[i] * self.theta_unit[k][j];
                }
            }
        }
        point.mu = [x[self.mu[0]], x[self.mu[1]]];
        point
    }

    /// Writes a design into a vector; auxiliaries are left at zero.
    pub fn embed(&self, point: &DesignPoint, num_vars: usize) -> Vec<f64> {
        let mut x = vec![0.0; num_vars];
        for (u, row) in self.p.iter().enumerate() {
            for j in 0..2 {
                if let Some(i) = row[j] {
                    x[i] = point.p[u][j];
                }
            }
        }
        for (k, row) in self.w.iter().enumerate() {
            for j in 0..2 {
                for &(a, re, im) in &row[j] {
                    x[re] = point.w[k][j][a].re;
                    x[im] = point.w[k][j][a].im;
                }
            }
        }
        for (k, row) in self.theta.iter().enumerate() {
            for j in 0..2 {
                if let Some(i) = row[j] {
                    x[i] = point.theta[k][j] / self.theta_unit[k][j];
                }
            }
        }
        x[self.mu[0]] = point.mu[0];
        x[self.mu[1]] = point.mu[1];
        x
    }
}

/// An assembled subproblem with its variable map.
#[derive(Clone, Debug)]
pub struct Subproblem {
    pub program: ConicProgram,
    pub vars: VarMap,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Goal {
    SumRate,
    MaxMin { eta: f64 },
    Feasibility,
}

/// Maximizes the sum of rate minorants subject to the per-user QoS rows.
pub fn build_sr_subproblem(problem: &Problem, coeffs: &MinorantCoeffs) -> Subproblem {
    assemble(problem, coeffs, Goal::SumRate)
}

/// Maximizes `φ` with every UL minorant sum ≥ `φ` and every DL sum ≥ `η·φ`.
pub fn build_maxmin_subproblem(problem: &Problem, coeffs: &MinorantCoeffs, eta: f64) -> Subproblem {
    assemble(problem, coeffs, Goal::MaxMin { eta })
}

/// Maximizes the smallest QoS margin `ϱ`.
pub fn build_feasibility_subproblem(problem: &Problem, coeffs: &MinorantCoeffs) -> Subproblem {
    assemble(problem, coeffs, Goal::Feasibility)
}

/// `(Re, Im)` of `hᴴw` over the beamformer entries present.
fn inner(h: &CVector, entries: &[(usize, usize, usize)]) -> (Affine, Affine) {
    let mut re = Affine::zero();
    let mut im = Affine::zero();
    for &(a, wr, wi) in entries {
        let (hr, hi) = (h[a].re, h[a].im);
        if hr != 0.0 {
            re.add_term(wr, hr);
            im.add_term(wi, hr);
        }
        if hi != 0.0 {
            re.add_term(wi, hi);
            im.add_term(wr, -hi);
        }
    }
    (re, im)
}

fn push_inner(out: &mut Vec<Affine>, h: &CVector, entries: &[(usize, usize, usize)]) {
    let (re, im) = inner(h, entries);
    if !re.terms.is_empty() {
        out.push(re);
    }
    if !im.terms.is_empty() {
        out.push(im);
    }
}

fn allocate(problem: &Problem, prog: &mut ConicProgram) -> VarMap {
    let full = problem.layout == Layout::Full;
    let n = problem.link.num_antennas();
    let (l_count, k_count) = (problem.num_ul(), problem.num_dl());
    let mut p = vec![[None; 2]; l_count];
    for (u, row) in p.iter_mut().enumerate() {
        for j in 0..2 {
            if full || problem.ul_active(u, j) {
                row[j] = Some(prog.add_var(format!("p[{u},{j}]"), VarKind::Real));
            }
        }
    }
    let mut w: Vec<[Vec<(usize, usize, usize)>; 2]> = vec![[Vec::new(), Vec::new()]; k_count];
    for (k, row) in w.iter_mut().enumerate() {
        for j in 0..2 {
            if !(full || problem.dl_active(k, j)) {
                continue;
            }
            for a in 0..n {
                if full || problem.masks.lambda[j][a] {
                    let (re, im) = prog.add_complex_var(&format!("w[{k},{j},{a}]"));
                    row[j].push((a, re, im));
                }
            }
        }
    }
    let mut theta = vec![[None; 2]; k_count];
    for (k, row) in theta.iter_mut().enumerate() {
        for j in 0..2 {
            if full || problem.dl_active(k, j) {
                row[j] = Some(prog.add_var(format!("theta[{k},{j}]"), VarKind::Real));
            }
        }
    }
    let mu = [0, 1].map(|j| prog.add_var(format!("mu[{j}]"), VarKind::Real));
    VarMap {
        p,
        w,
        theta_unit: vec![[1.0; 2]; k_count],
        theta,
        mu,
        extra: None,
    }
}

/// Adds `‖√c_j·x_j‖² + Σ_j d_j‖x_j‖²/μ₂ ≤ budget + f̂` for one direction, where
/// `x_j` are the phase-`j` entries and `lin_index` maps an entry to its
/// position in the linearization's stacked blocks.
#[allow(clippy::too_many_arguments)]
fn add_budget(
    prog: &mut ConicProgram,
    group: GroupId,
    name: &str,
    blocks: [Vec<(usize, usize)>; 2],
    off: [bool; 2],
    budget: f64,
    lin: &BudgetLin,
    mu2: usize,
) {
    let c = [1.0, off[0] as u8 as f64];
    let d = [off[1] as u8 as f64, 1.0];
    let mut lhs = Affine::zero();
    let quad: Vec<Affine> = (0..2)
        .filter(|&j| c[j] > 0.0)
        .flat_map(|j| blocks[j].iter().map(move |&(v, _)| Affine::term(v, c[j].sqrt())))
        .collect();
    if !quad.is_empty() {
        let e = prog.add_var(format!("{name}.sq"), VarKind::Auxiliary);
        prog.add_rotated_soc(quad, Affine::var(e), Affine::constant(1.0), Some(group));
        lhs.add_term(e, 1.0);
    }
    for j in 0..2 {
        if d[j] > 0.0 && !blocks[j].is_empty() {
            let a = prog.add_var(format!("{name}.frac{j}"), VarKind::Auxiliary);
            let xs = blocks[j].iter().map(|&(v, _)| Affine::var(v)).collect();
            prog.add_rotated_soc(xs, Affine::var(a), Affine::var(mu2), Some(group));
            lhs.add_term(a, d[j]);
        }
    }
    let mut rhs = Affine::constant(budget).with_term(mu2, lin.mu2_coef());
    for (j, block) in blocks.iter().enumerate() {
        for &(v, idx) in block {
            let coef = lin.coef(j, idx);
            if coef != 0.0 {
                rhs.add_term(v, coef);
            }
        }
    }
    prog.add_le(lhs, rhs, Some(group));
}

fn assemble(problem: &Problem, coeffs: &MinorantCoeffs, goal: Goal) -> Subproblem {
    let full = problem.layout == Layout::Full;
    let link = &problem.link;
    let masks = &problem.masks;
    let n = link.num_antennas();
    let half = link.half_array_size;
    let (l_count, k_count) = (problem.num_ul(), problem.num_dl());
    let mut prog = ConicProgram::new();
    let mut vars = allocate(problem, &mut prog);
    let extra = match goal {
        Goal::SumRate => None,
        Goal::MaxMin { .. } => Some(prog.add_var("phi", VarKind::Real)),
        Goal::Feasibility => Some(prog.add_var("margin", VarKind::Auxiliary)),
    };
    vars.extra = extra;
    for term in &coeffs.dl {
        vars.theta_unit[term.user][term.phase] = term.theta_bar;
    }

    let mut ul_sum = vec![Affine::zero(); l_count];
    let mut dl_sum = vec![Affine::zero(); k_count];

    // uplink amplitudes, caps, minorants and budgets
    for u in 0..l_count {
        for j in 0..2 {
            let Some(pv) = vars.p[u][j] else { continue };
            let g = prog.add_group(format!("p_nonneg[{u},{j}]"));
            prog.add_ge(Affine::var(pv), Some(g));
            let g = prog.add_group(format!("ul_cap[{u},{j}]"));
            let cap = if masks.ul_enabled(j) { problem.ul_cap.sqrt() } else { 0.0 };
            prog.add_le(Affine::var(pv), Affine::constant(cap), Some(g));
            if masks.ul_enabled(j) && !problem.ul_active(u, j) {
                prog.add_eq(Affine::var(pv), None);
            }
        }
    }
    for u in 0..l_count {
        if vars.p[u].iter().all(Option::is_none) {
            continue;
        }
        let g = prog.add_group(format!("ul_budget[{u}]"));
        let blocks = [0, 1].map(|j| vars.p[u][j].map(|v| vec![(v, 0)]).unwrap_or_default());
        add_budget(
            &mut prog,
            g,
            &format!("ul_budget[{u}]"),
            blocks,
            masks.beta,
            problem.ul_power,
            &coeffs.ul_budget[u],
            vars.mu[1],
        );
    }
    let mut ul_qos_groups = Vec::with_capacity(l_count);
    for u in 0..l_count {
        let g = prog.add_group(format!("ul_qos[{u}]"));
        ul_qos_groups.push(g);
        for j in 0..2 {
            let Some(term) = coeffs.ul_term(u, j) else { continue };
            let pv = vars.p[u][j].expect("served pair has an amplitude");
            let mut rest = vec![Affine::term(pv, term.own_coef) - (1.0 + term.z).sqrt()];
            for (l, gain) in term.p_gain.iter().enumerate() {
                if let (Some(v), true) = (vars.p[l][j], *gain > 0.0) {
                    rest.push(Affine::term(v, gain.sqrt()));
                }
            }
            if term.si_dir.iter().any(|z| z.norm_sqr() > 0.0) {
                for k in 0..k_count {
                    push_inner(&mut rest, &term.si_dir, &vars.w[k][j]);
                }
            }
            // the log bound is x̄ + 1 − noise − ‖rest‖²
            let head = term.log_bar + 1.0 - term.noise;
            let mut minorant = Affine::term(vars.mu[j], term.mu_coef());
            match problem.ul_form {
                UlMinorantForm::Certified => {
                    let s = prog.add_var(format!("ul_root[{u},{j}]"), VarKind::Auxiliary);
                    let mut xs = vec![Affine::var(s)];
                    xs.extend(rest);
                    prog.add_soc(Affine::constant(head.max(0.0).sqrt()), xs, Some(g));
                    minorant.add_term(s, 2.0 * term.log_bar.sqrt() / term.mu_bar);
                }
                UlMinorantForm::Linearized => {
                    let q = prog.add_var(format!("ul_quad[{u},{j}]"), VarKind::Auxiliary);
                    prog.add_rotated_soc(rest, Affine::var(q), Affine::constant(1.0), Some(g));
                    let bound = Affine::constant(head + term.log_bar).with_term(q, -1.0);
                    minorant.add_scaled(&bound, 1.0 / term.mu_bar);
                }
            }
            ul_sum[u].add_scaled(&minorant, 1.0);
        }
    }

    // downlink slacks, trust region and epigraphs
    for k in 0..k_count {
        for j in 0..2 {
            let Some(tv) = vars.theta[k][j] else { continue };
            let g = prog.add_group(format!("theta_pos[{k},{j}]"));
            prog.add_ge(Affine::term(tv, vars.theta_unit[k][j]) - THETA_MIN, Some(g));
            if !problem.dl_active(k, j) {
                prog.add_eq(Affine::var(tv) - 1.0, None);
            }
        }
    }
    for k in 0..k_count {
        for j in 0..2 {
            if full && masks.dl_enabled(j) && !problem.dl_active(k, j) {
                for &(_, re, im) in &vars.w[k][j] {
                    prog.add_eq(Affine::var(re), None);
                    prog.add_eq(Affine::var(im), None);
                }
            }
        }
    }
    let h_dl: [Vec<CVector>; 2] = [dl_effective(link, masks, 0), dl_effective(link, masks, 1)];
    let mut epi = Vec::new();
    let mut trust = Vec::new();
    for k in 0..k_count {
        for j in 0..2 {
            if vars.theta[k][j].is_some() {
                epi.push(((k, j), prog.add_group(format!("dl_epigraph[{k},{j}]"))));
                trust.push(((k, j), prog.add_group(format!("trust[{k},{j}]"))));
            }
        }
    }
    for (&((k, j), ge), &(_, gt)) in epi.iter().zip(&trust) {
        let Some(term) = coeffs.dl_term(k, j) else { continue };
        let tv = vars.theta[k][j].expect("served pair has a slack");
        let h = &h_dl[j][k];
        let (re_own, _) = inner(h, &vars.w[k][j]);
        let mut gs = re_own.scaled(2.0 * term.re_bar);
        gs.constant -= term.re_bar * term.re_bar;
        prog.add_ge(gs.clone() - TRUST_MIN, Some(gt));
        let mut psi = Vec::new();
        for kk in 0..k_count {
            if kk != k {
                push_inner(&mut psi, h, &vars.w[kk][j]);
            }
        }
        for l in 0..l_count {
            let Some(v) = vars.p[l][j] else { continue };
            let gain = link.cci[(l, k)].norm_sqr() + link.errors.eps_cci[(l, k)];
            if gain > 0.0 && masks.ul_enabled(j) {
                psi.push(Affine::term(v, gain.sqrt()));
            }
        }
        let eps = link.errors.eps_dl[k];
        if eps > 0.0 {
            let s = eps.sqrt();
            for kk in 0..k_count {
                for &(a, re, im) in &vars.w[kk][j] {
                    if masks.lambda[j][a] {
                        psi.push(Affine::term(re, s));
                        psi.push(Affine::term(im, s));
                    }
                }
            }
        }
        psi.push(Affine::constant(link.sigma2_dl.sqrt()));
        // ‖ψ‖² ≤ ϑ·γ_s, rebalanced so both factors are about √ψ̄ at the
        // expansion point
        let scale = term.re_bar / term.theta_bar.sqrt();
        prog.add_rotated_soc(psi, Affine::term(tv, scale * term.theta_bar), gs.scaled(1.0 / scale), Some(ge));
        let m = Affine::constant(term.nu)
            .with_term(tv, term.xi * term.theta_bar)
            .with_term(vars.mu[j], term.lambda);
        dl_sum[k].add_scaled(&m, 1.0);
    }
    let dl_qos_groups: Vec<GroupId> = (0..k_count).map(|k| prog.add_group(format!("dl_qos[{k}]"))).collect();

    // per half-array caps and the BS budget
    for i in 0..2 {
        for j in 0..2 {
            let on = masks.transmits(i, j);
            let entries: Vec<Affine> = (0..k_count)
                .flat_map(|k| vars.w[k][j].iter())
                .filter(|&&(a, _, _)| a / half == i)
                .flat_map(|&(_, re, im)| [Affine::var(re), Affine::var(im)])
                .collect();
            if entries.is_empty() && !full {
                continue;
            }
            let g = prog.add_group(format!("bs_cap[{i},{j}]"));
            let cap = if on { problem.bs_cap.sqrt() } else { 0.0 };
            prog.add_soc(Affine::constant(cap), entries, Some(g));
        }
    }
    let g = prog.add_group("bs_budget");
    let blocks = [0, 1].map(|j| {
        (0..k_count)
            .flat_map(|k| vars.w[k][j].iter().map(move |&(a, re, im)| (k, a, re, im)))
            .flat_map(|(k, a, re, im)| [(re, (k * n + a) * 2), (im, (k * n + a) * 2 + 1)])
            .collect::<Vec<_>>()
    });
    add_budget(&mut prog, g, "bs_budget", blocks, masks.chi, problem.bs_power, &coeffs.dl_budget, vars.mu[1]);

    // phase split
    for j in 0..2 {
        let g = prog.add_group(format!("mu_min[{j}]"));
        prog.add_ge(Affine::var(vars.mu[j]) - (1.0 + MU_MARGIN), Some(g));
        if let Some(fixed) = problem.fixed_mu {
            prog.add_eq(Affine::var(vars.mu[j]) - fixed[j], Some(g));
        }
    }
    let g = prog.add_group("time_split");
    let t = [0, 1].map(|j| prog.add_var(format!("inv_mu[{j}]"), VarKind::Auxiliary));
    for j in 0..2 {
        prog.add_rotated_soc(vec![Affine::constant(1.0)], Affine::var(t[j]), Affine::var(vars.mu[j]), Some(g));
    }
    prog.add_le(Affine::var(t[0]) + Affine::var(t[1]), Affine::constant(1.0), Some(g));

    // goal rows
    let threshold = problem.rate_threshold;
    match goal {
        Goal::SumRate => {
            let mut obj = Affine::zero();
            for (u, s) in ul_sum.iter().enumerate() {
                prog.add_ge(s.clone() - threshold, Some(ul_qos_groups[u]));
                obj.add_scaled(s, 1.0);
            }
            for (k, s) in dl_sum.iter().enumerate() {
                prog.add_ge(s.clone() - threshold, Some(dl_qos_groups[k]));
                obj.add_scaled(s, 1.0);
            }
            prog.set_objective(obj);
        }
        Goal::Feasibility => {
            let m = extra.expect("margin variable");
            for (u, s) in ul_sum.iter().enumerate() {
                prog.add_ge(s.clone() - threshold - Affine::var(m), Some(ul_qos_groups[u]));
            }
            for (k, s) in dl_sum.iter().enumerate() {
                prog.add_ge(s.clone() - threshold - Affine::var(m), Some(dl_qos_groups[k]));
            }
            prog.set_objective(Affine::var(m));
        }
        Goal::MaxMin { eta } => {
            let phi = extra.expect("level variable");
            for (u, s) in ul_sum.iter().enumerate() {
                prog.add_ge(s.clone() - Affine::var(phi), Some(ul_qos_groups[u]));
            }
            for (k, s) in dl_sum.iter().enumerate() {
                prog.add_ge(s.clone() - Affine::term(phi, eta), Some(dl_qos_groups[k]));
            }
            prog.set_objective(Affine::var(phi));
        }
    }
    Subproblem { program: prog, vars }
}
