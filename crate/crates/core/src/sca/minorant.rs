use crate::channel::{CVector, C64};
use crate::rate::{dl_effective, dl_interference, masked, ul_covariance_chain, ul_effective, ul_sinr, DesignPoint};

use super::{Problem, ScaError, UlMinorantForm, THETA_MIN};

/// Uplink terms of one served `(user, phase)` pair.
///
/// With `a` the rank-one factor of `Ψ_ex⁻¹ − Ψ_in⁻¹` at the expansion point,
/// the concave bound on `ln(1 + γ)` is `x̄ − z + 2z·p/p̄ − φ(w, p)` where
/// `φ = |aᴴh̃|²p² + Σ_ℓ p_gain[ℓ]·p_ℓ² + Σ_k |si_dirᴴ w_k|² + noise`.
/// Completing the square in the user's own amplitude gives the equivalent
/// `x̄ + 1 − (c·p − √(1+z))² − (φ − |aᴴh̃|²p²)`, whose constant stays of the
/// order of `x̄` even at high SNR.
#[derive(Clone, Debug, PartialEq)]
pub struct UlTerm {
    pub user: usize,
    pub phase: usize,
    /// `x̄ = ln(1 + z)`.
    pub log_bar: f64,
    /// SINR at the expansion point.
    pub z: f64,
    pub p_bar: f64,
    pub mu_bar: f64,
    pub noise: f64,
    /// `c = |aᴴh̃| = z/(p̄√(1+z))`.
    pub own_coef: f64,
    /// Gains of every amplitude other than the user's own signal term.
    pub p_gain: Vec<f64>,
    /// Already scaled by `ρ` and masked to the transmitting antennas.
    pub si_dir: CVector,
}

impl UlTerm {
    /// Coefficient of `μ` in either minorant form.
    pub fn mu_coef(&self) -> f64 {
        -self.log_bar / (self.mu_bar * self.mu_bar)
    }

    /// Paper-form constants `ϖ` and `ζ` of the linearized form
    /// `−ϖμ + ζ − φ/μ̄ + 2z·p/(μ̄p̄)`.
    pub fn linearized_constants(&self) -> (f64, f64) {
        let varpi = self.log_bar / (self.mu_bar * self.mu_bar);
        let zeta = (2.0 * self.log_bar - self.z) / self.mu_bar;
        (varpi, zeta)
    }

    /// `c·p − √(1+z)`.
    pub fn own_residual(&self, p: f64) -> f64 {
        self.own_coef * p - (1.0 + self.z).sqrt()
    }

    /// `φ` without the user's own signal term.
    pub fn rest(&self, point: &DesignPoint) -> f64 {
        let j = self.phase;
        let mut v = self.noise;
        for (l, g) in self.p_gain.iter().enumerate() {
            v += g * point.p[l][j] * point.p[l][j];
        }
        for w in &point.w {
            v += self.si_dir.dotc(&w[j]).norm_sqr();
        }
        v
    }

    /// `φ(w, p)` of the paper form.
    pub fn phi(&self, point: &DesignPoint) -> f64 {
        let p = point.p[self.user][self.phase];
        self.own_coef * self.own_coef * p * p + self.rest(point)
    }

    /// The concave log bound `G(w, p)`.
    pub fn log_bound(&self, point: &DesignPoint) -> f64 {
        let r = self.own_residual(point.p[self.user][self.phase]);
        self.log_bar + 1.0 - r * r - self.rest(point)
    }
}

/// Downlink terms of one served pair: the rate `ln(1 + 1/ϑ)/μ` is bounded
/// below by its tangent plane `ν + ξϑ + λμ`.
#[derive(Clone, Debug, PartialEq)]
pub struct DlTerm {
    pub user: usize,
    pub phase: usize,
    /// `Re(h̃ᴴw̄)` at the expansion point.
    pub re_bar: f64,
    pub theta_bar: f64,
    pub mu_bar: f64,
    pub nu: f64,
    pub xi: f64,
    pub lambda: f64,
}

impl DlTerm {
    pub fn tangent(&self, theta: f64, mu: f64) -> f64 {
        self.nu + self.xi * theta + self.lambda * mu
    }

    /// `γ_s = 2·Re(h̃ᴴw̄)·Re(h̃ᴴw) − Re(h̃ᴴw̄)²`, a lower bound on `|h̃ᴴw|²`.
    pub fn trust(&self, re: f64) -> f64 {
        2.0 * self.re_bar * re - self.re_bar * self.re_bar
    }
}

/// Linearization `f̂ = Σ_j e_j·2x̄_j·x_j/μ̄₂ − f̄·μ₂/μ̄₂` of the convex
/// `f = Σ_j e_j‖x_j‖²/μ₂`, where `x_j` stacks one direction's phase-`j`
/// variables as reals.
#[derive(Clone, Debug, PartialEq)]
pub struct BudgetLin {
    pub e: [f64; 2],
    pub x_bar: [Vec<f64>; 2],
    pub mu2_bar: f64,
    pub f_bar: f64,
}

impl BudgetLin {
    fn new(e: [f64; 2], x_bar: [Vec<f64>; 2], mu2_bar: f64) -> Self {
        let f_bar = (0..2).map(|j| e[j] * norm2(&x_bar[j])).sum::<f64>() / mu2_bar;
        BudgetLin { e, x_bar, mu2_bar, f_bar }
    }

    pub fn exact(&self, x: &[Vec<f64>; 2], mu2: f64) -> f64 {
        (0..2).map(|j| self.e[j] * norm2(&x[j])).sum::<f64>() / mu2
    }

    pub fn linear(&self, x: &[Vec<f64>; 2], mu2: f64) -> f64 {
        let mut v = -self.f_bar * mu2 / self.mu2_bar;
        for j in 0..2 {
            let dot: f64 = self.x_bar[j].iter().zip(&x[j]).map(|(a, b)| a * b).sum();
            v += 2.0 * self.e[j] * dot / self.mu2_bar;
        }
        v
    }

    /// Coefficient of entry `i` of block `j` in [`BudgetLin::linear`].
    pub fn coef(&self, j: usize, i: usize) -> f64 {
        2.0 * self.e[j] * self.x_bar[j][i] / self.mu2_bar
    }

    pub fn mu2_coef(&self) -> f64 {
        -self.f_bar / self.mu2_bar
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Stacks every beamformer of phase `j` as `(re, im)` pairs, user-major.
pub fn stack_dl(point: &DesignPoint, j: usize) -> Vec<f64> {
    point.w.iter().flat_map(|w| w[j].iter().flat_map(|z| [z.re, z.im])).collect()
}

pub fn dl_budget_linearization(problem: &Problem, expansion: &DesignPoint) -> BudgetLin {
    let o = problem.masks.chi;
    BudgetLin::new(
        [1.0, o[0] as u8 as f64],
        [stack_dl(expansion, 0), stack_dl(expansion, 1)],
        expansion.mu[1],
    )
}

pub fn ul_budget_linearization(problem: &Problem, expansion: &DesignPoint, user: usize) -> BudgetLin {
    let o = problem.masks.beta;
    let p = expansion.p[user];
    BudgetLin::new([1.0, o[0] as u8 as f64], [vec![p[0]], vec![p[1]]], expansion.mu[1])
}

/// Everything the subproblem needs from one expansion point.
#[derive(Clone, Debug, PartialEq)]
pub struct MinorantCoeffs {
    pub expansion: DesignPoint,
    pub ul: Vec<UlTerm>,
    pub dl: Vec<DlTerm>,
    pub dl_budget: BudgetLin,
    pub ul_budget: Vec<BudgetLin>,
}

impl MinorantCoeffs {
    pub fn ul_term(&self, user: usize, phase: usize) -> Option<&UlTerm> {
        self.ul.iter().find(|t| t.user == user && t.phase == phase)
    }

    pub fn dl_term(&self, user: usize, phase: usize) -> Option<&DlTerm> {
        self.dl.iter().find(|t| t.user == user && t.phase == phase)
    }
}

/// Expands every served rate term around `point`, which must already be
/// prepared (slacks tight, amplitudes lifted, see
/// [`super::prepare_expansion`]).
pub fn build_minorants(problem: &Problem, point: &DesignPoint) -> Result<MinorantCoeffs, ScaError> {
    let link = &problem.link;
    let masks = &problem.masks;
    let n = link.num_antennas();
    let mut ul = Vec::new();
    let mut dl = Vec::new();
    for j in 0..2 {
        if (0..problem.num_ul()).any(|u| problem.ul_active(u, j)) {
            let h = ul_effective(link, masks, j);
            let chain = ul_covariance_chain(link, masks, j, point);
            for u in 0..problem.num_ul() {
                if !problem.ul_active(u, j) {
                    continue;
                }
                let p_bar = point.p[u][j];
                if !(p_bar > 0.0) {
                    return Err(ScaError::ZeroExpansionPower { user: u, phase: j });
                }
                let (x, q) = chain[u + 1].solve(&h[u]);
                let z = p_bar * p_bar * q;
                let a = x * C64::new(p_bar / (1.0 + z).sqrt(), 0.0);
                let a_rx = masked(&a, &masks.lambda_bar[j]);
                let a_rx2 = a_rx.norm_squared();
                let p_gain = (0..problem.num_ul())
                    .map(|l| {
                        let own = if l > u { a.dotc(&h[l]).norm_sqr() } else { 0.0 };
                        own + link.errors.eps_ul[l] * a_rx2
                    })
                    .collect();
                let si = link.g_bar.adjoint() * &a;
                let si_dir = masked(&si, &masks.lambda[j]) * C64::new(link.rho2.sqrt(), 0.0);
                ul.push(UlTerm {
                    user: u,
                    phase: j,
                    log_bar: z.ln_1p(),
                    z,
                    p_bar,
                    mu_bar: point.mu[j],
                    noise: link.sigma2_bs * a.norm_squared(),
                    own_coef: z / (p_bar * (1.0 + z).sqrt()),
                    p_gain,
                    si_dir,
                });
            }
        }
        if (0..problem.num_dl()).any(|k| problem.dl_active(k, j)) {
            let h = dl_effective(link, masks, j);
            let psi = dl_interference(link, masks, j, point)?;
            for k in 0..problem.num_dl() {
                if !problem.dl_active(k, j) {
                    continue;
                }
                let re_bar = h[k].dotc(&point.w[k][j]).re;
                if !(re_bar > 0.0) {
                    return Err(ScaError::OutsideTrustRegion { user: k, phase: j });
                }
                let theta_bar = (psi[k] / (re_bar * re_bar)).max(THETA_MIN);
                let mu_bar = point.mu[j];
                let lg = (1.0 / theta_bar).ln_1p();
                dl.push(DlTerm {
                    user: k,
                    phase: j,
                    re_bar,
                    theta_bar,
                    mu_bar,
                    nu: 2.0 * lg / mu_bar + 1.0 / ((theta_bar + 1.0) * mu_bar),
                    xi: -1.0 / (theta_bar * (theta_bar + 1.0) * mu_bar),
                    lambda: -lg / (mu_bar * mu_bar),
                });
            }
        }
    }
    debug_assert!(point.w.iter().flatten().all(|w| w.len() == n));
    Ok(MinorantCoeffs {
        expansion: point.clone(),
        ul,
        dl,
        dl_budget: dl_budget_linearization(problem, point),
        ul_budget: (0..problem.num_ul()).map(|u| ul_budget_linearization(problem, point, u)).collect(),
    })
}

/// `ln(1 + γ)/μ_j` for an uplink pair.
pub fn ul_lifted_rate(problem: &Problem, point: &DesignPoint, user: usize, j: usize) -> f64 {
    let g = ul_sinr(&problem.link, &problem.masks, j, point).expect("shapes checked by caller")[user];
    g.ln_1p() / point.mu[j]
}

/// `ln(1 + Re(h̃ᴴw)²/ψ)/μ_j`, the downlink rate with the signal replaced
/// by its real part.
pub fn dl_lifted_rate(problem: &Problem, point: &DesignPoint, user: usize, j: usize) -> f64 {
    let h = &dl_effective(&problem.link, &problem.masks, j)[user];
    let psi = dl_interference(&problem.link, &problem.masks, j, point).expect("shapes checked by caller")[user];
    let re = h.dotc(&point.w[user][j]).re.max(0.0);
    (re * re / psi).ln_1p() / point.mu[j]
}

/// The uplink minorant at `point`, with its auxiliary chosen optimally.
/// `−∞` when the point lies outside the minorant's domain.
pub fn ul_minorant_value(term: &UlTerm, point: &DesignPoint, form: UlMinorantForm) -> f64 {
    let g = term.log_bound(point);
    let mu = point.mu[term.phase];
    match form {
        UlMinorantForm::Certified => {
            if g < 0.0 {
                return f64::NEG_INFINITY;
            }
            2.0 * (term.log_bar * g).sqrt() / term.mu_bar + term.mu_coef() * mu
        }
        UlMinorantForm::Linearized => (g + term.log_bar) / term.mu_bar + term.mu_coef() * mu,
    }
}

/// The downlink minorant at `point` with the smallest admissible slack.
pub fn dl_minorant_value(problem: &Problem, term: &DlTerm, point: &DesignPoint) -> f64 {
    let j = term.phase;
    let h = &dl_effective(&problem.link, &problem.masks, j)[term.user];
    let psi = dl_interference(&problem.link, &problem.masks, j, point).expect("shapes checked by caller")[term.user];
    let gs = term.trust(h.dotc(&point.w[term.user][j]).re);
    if gs <= 0.0 {
        return f64::NEG_INFINITY;
    }
    term.tangent((psi / gs).max(THETA_MIN), point.mu[j])
}
