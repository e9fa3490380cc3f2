//! Exact SINRs and achievable rates for a fixed design.

use std::f64::consts::LN_2;

use crate::channel::{CMatrix, CVector, ChannelSet, CsiErrors, RobustChannelSet, C64};
use crate::error::RateError;
use crate::mode::{ModeMatrix, PhaseMasks};

/// The channel data a rate evaluation needs, with the CSI error variances
/// that enter the worst-case SINRs (all zero for perfect CSI).
#[derive(Clone, Debug, PartialEq)]
pub struct LinkModel {
    pub half_array_size: usize,
    pub h_ul: Vec<CVector>,
    pub h_dl: Vec<CVector>,
    pub g_bar: CMatrix,
    pub cci: CMatrix,
    pub sigma2_bs: f64,
    pub sigma2_dl: f64,
    pub rho2: f64,
    pub errors: CsiErrors,
}

impl LinkModel {
    pub fn perfect(ch: &ChannelSet, rho2: f64) -> Self {
        LinkModel {
            half_array_size: ch.half_array_size,
            h_ul: ch.h_ul.clone(),
            h_dl: ch.h_dl.clone(),
            g_bar: ch.g_bar.clone(),
            cci: ch.cci.clone(),
            sigma2_bs: ch.sigma2_bs,
            sigma2_dl: ch.sigma2_dl,
            rho2,
            errors: CsiErrors::zero(ch.num_ul(), ch.num_dl()),
        }
    }

    /// Estimated channels plus their error variances.
    pub fn robust(rc: &RobustChannelSet, rho2: f64) -> Self {
        LinkModel {
            errors: rc.errors.clone(),
            ..Self::perfect(&rc.estimate, rho2)
        }
    }

    pub fn num_ul(&self) -> usize {
        self.h_ul.len()
    }

    pub fn num_dl(&self) -> usize {
        self.h_dl.len()
    }

    pub fn num_antennas(&self) -> usize {
        2 * self.half_array_size
    }

    /// Rescales so both noise powers are 1. SINRs are unchanged.
    pub fn normalized(&self) -> Self {
        let sb = self.sigma2_bs.sqrt();
        let sd = self.sigma2_dl.sqrt();
        LinkModel {
            half_array_size: self.half_array_size,
            h_ul: self.h_ul.iter().map(|h| h.unscale(sb)).collect(),
            h_dl: self.h_dl.iter().map(|h| h.unscale(sd)).collect(),
            g_bar: self.g_bar.unscale(sb),
            cci: self.cci.unscale(sd),
            sigma2_bs: 1.0,
            sigma2_dl: 1.0,
            rho2: self.rho2,
            errors: CsiErrors {
                eps_ul: self.errors.eps_ul.iter().map(|e| e / self.sigma2_bs).collect(),
                eps_dl: self.errors.eps_dl.iter().map(|e| e / self.sigma2_dl).collect(),
                eps_cci: self.errors.eps_cci.map(|e| e / self.sigma2_dl),
            },
        }
    }
}

/// Beamformers, uplink amplitudes, time variables and DL slacks.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignPoint {
    /// `w[k][j]`, length 2N.
    pub w: Vec<[CVector; 2]>,
    /// `p[l][j]`, amplitude; the transmit power is its square.
    pub p: Vec<[f64; 2]>,
    pub mu: [f64; 2],
    pub theta: Vec<[f64; 2]>,
}

impl DesignPoint {
    pub fn zeros(num_ul: usize, num_dl: usize, num_antennas: usize) -> Self {
        let z = CVector::zeros(num_antennas);
        DesignPoint {
            w: vec![[z.clone(), z]; num_dl],
            p: vec![[0.0; 2]; num_ul],
            mu: [2.0, 2.0],
            theta: vec![[1e6; 2]; num_dl],
        }
    }

    /// Phase durations `(1 − 1/μ₂, 1/μ₂)`.
    pub fn phase_fractions(&self) -> [f64; 2] {
        let t2 = 1.0 / self.mu[1];
        [1.0 - t2, t2]
    }

    /// Duration of the first phase.
    pub fn tau(&self) -> f64 {
        self.phase_fractions()[0]
    }

    pub fn dl_power(&self, j: usize) -> f64 {
        self.w.iter().map(|w| w[j].norm_squared()).sum()
    }

    fn check(&self, link: &LinkModel) -> Result<(), RateError> {
        let n = link.num_antennas();
        if self.p.len() != link.num_ul() || self.w.len() != link.num_dl() || self.theta.len() != link.num_dl() {
            return Err(RateError::Shape(format!(
                "design has {} UL / {} DL users, channels have {} / {}",
                self.p.len(),
                self.w.len(),
                link.num_ul(),
                link.num_dl()
            )));
        }
        if self.w.iter().flatten().any(|w| w.len() != n) {
            return Err(RateError::Shape(format!("beamformers must have length {n}")));
        }
        Ok(())
    }
}

pub(crate) fn masked(v: &CVector, mask: &[bool]) -> CVector {
    CVector::from_fn(v.len(), |i, _| if mask[i] { v[i] } else { C64::new(0.0, 0.0) })
}

/// A Hermitian positive definite `D + Σᵢ cᵢcᵢᴴ` with `D` diagonal, kept in
/// factored form.
///
/// The interference terms can sit ten orders of magnitude above the noise
/// floor, which costs a dense Cholesky solve most of its digits. Solves and
/// determinants here go through a Householder QR of the stacked matrix
/// `[D^{-1/2}C; I]`, whose condition number is only the square root of the
/// covariance's.
#[derive(Clone, Debug, PartialEq)]
pub struct FactoredCovariance {
    pub diag: Vec<f64>,
    pub cols: Vec<CVector>,
}

impl FactoredCovariance {
    pub fn scaled_identity(n: usize, value: f64) -> Self {
        FactoredCovariance {
            diag: vec![value; n],
            cols: Vec::new(),
        }
    }

    /// Adds `v vᴴ · scale`; zero terms are dropped.
    pub fn add_outer(&mut self, v: &CVector, scale: f64) {
        if scale > 0.0 && v.iter().any(|z| z.norm_sqr() > 0.0) {
            self.cols.push(v * C64::new(scale.sqrt(), 0.0));
        }
    }

    pub fn dense(&self) -> CMatrix {
        let n = self.diag.len();
        let mut m = CMatrix::from_diagonal(&CVector::from_iterator(n, self.diag.iter().map(|&d| C64::new(d, 0.0))));
        for c in &self.cols {
            m += c * c.adjoint();
        }
        m
    }

    /// `xᴴ Ψ x`.
    pub fn quad(&self, x: &CVector) -> f64 {
        let d: f64 = self.diag.iter().zip(x.iter()).map(|(d, z)| d * z.norm_sqr()).sum();
        d + self.cols.iter().map(|c| c.dotc(x).norm_sqr()).sum::<f64>()
    }

    /// `(Ψ⁻¹h, hᴴΨ⁻¹h)`.
    pub fn solve(&self, h: &CVector) -> (CVector, f64) {
        let w: Vec<f64> = self.diag.iter().map(|d| 1.0 / d.sqrt()).collect();
        let whiten = |v: &CVector| CVector::from_fn(v.len(), |i, _| v[i] * w[i]);
        let cols: Vec<CVector> = self.cols.iter().map(whiten).collect();
        let qr = StackedQr::new(h.len(), &cols);
        let (top, quad) = qr.residual(&whiten(h));
        (CVector::from_fn(top.len(), |i, _| top[i] * w[i]), quad)
    }

    /// `ln det Ψ`.
    pub fn ln_det(&self) -> f64 {
        let w: Vec<f64> = self.diag.iter().map(|d| 1.0 / d.sqrt()).collect();
        let cols: Vec<CVector> = self
            .cols
            .iter()
            .map(|c| CVector::from_fn(c.len(), |i, _| c[i] * w[i]))
            .collect();
        self.diag.iter().map(|d| d.ln()).sum::<f64>() + StackedQr::new(self.diag.len(), &cols).ln_det_gram()
    }
}

/// Householder QR of `A = [U; I]` (`n + m` rows, `m` columns).
struct StackedQr {
    n: usize,
    a: CMatrix,
    /// Unit reflector vectors, the k-th acting on rows `k..`.
    reflectors: Vec<CVector>,
}

impl StackedQr {
    fn new(n: usize, cols: &[CVector]) -> Self {
        let m = cols.len();
        let mut a = CMatrix::zeros(n + m, m);
        for (k, c) in cols.iter().enumerate() {
            a.view_mut((0, k), (n, 1)).copy_from(c);
            a[(n + k, k)] = C64::new(1.0, 0.0);
        }
        let mut reflectors = Vec::with_capacity(m);
        for k in 0..m {
            let x = a.view((k, k), (n + m - k, 1)).column(0).into_owned();
            let norm = x.norm();
            let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { C64::new(1.0, 0.0) };
            let mut v = x;
            v[0] += phase * norm;
            let vn = v.norm();
            v /= C64::new(vn, 0.0);
            let mut block = a.view_mut((k, k), (n + m - k, m - k));
            let proj = v.adjoint() * &block;
            block -= &v * proj * C64::new(2.0, 0.0);
            reflectors.push(v);
        }
        StackedQr { n, a, reflectors }
    }

    fn apply(&self, k: usize, y: &mut CVector) {
        let v = &self.reflectors[k];
        let mut tail = y.rows_mut(k, v.len());
        let d = v.dotc(&tail);
        tail -= v * (d * 2.0);
    }

    /// Top `n` entries of the least-squares residual of `[h; 0]` and its
    /// squared norm.
    fn residual(&self, h: &CVector) -> (CVector, f64) {
        let m = self.reflectors.len();
        let mut y = CVector::zeros(self.n + m);
        y.rows_mut(0, self.n).copy_from(h);
        for k in 0..m {
            self.apply(k, &mut y);
        }
        let quad = y.rows(m, self.n).norm_squared();
        y.rows_mut(0, m).fill(C64::new(0.0, 0.0));
        for k in (0..m).rev() {
            self.apply(k, &mut y);
        }
        (y.rows(0, self.n).into_owned(), quad)
    }

    /// `ln det(AᴴA) = ln det(I + UᴴU)`.
    fn ln_det_gram(&self) -> f64 {
        (0..self.reflectors.len()).map(|k| 2.0 * self.a[(k, k)].norm().ln()).sum()
    }
}

/// Interference-plus-noise covariance at the BS in phase `j` with no uplink
/// user present: noise, residual SI and the CSI error floor of all users.
pub fn ul_base_covariance(link: &LinkModel, masks: &PhaseMasks, j: usize, point: &DesignPoint) -> FactoredCovariance {
    let n = link.num_antennas();
    let floor: f64 = point
        .p
        .iter()
        .zip(&link.errors.eps_ul)
        .map(|(p, e)| p[j] * p[j] * e)
        .sum();
    let mut c = FactoredCovariance {
        diag: (0..n)
            .map(|a| link.sigma2_bs + if masks.lambda_bar[j][a] { floor } else { 0.0 })
            .collect(),
        cols: Vec::new(),
    };
    if link.rho2 > 0.0 {
        for w in &point.w {
            let si = &link.g_bar * masked(&w[j], &masks.lambda[j]);
            c.add_outer(&si, link.rho2);
        }
    }
    c
}

/// Effective uplink channels `Λ̄_j h` for phase `j`.
pub fn ul_effective(link: &LinkModel, masks: &PhaseMasks, j: usize) -> Vec<CVector> {
    link.h_ul.iter().map(|h| masked(h, &masks.lambda_bar[j])).collect()
}

pub fn dl_effective(link: &LinkModel, masks: &PhaseMasks, j: usize) -> Vec<CVector> {
    link.h_dl.iter().map(|h| masked(h, &masks.lambda[j])).collect()
}

/// Covariances `Ψ_ℓ` for ℓ = 0..L, where `Ψ_ℓ` holds uplink users ℓ..L−1
/// (zero-based) on top of the base covariance. `Ψ_0` is the full
/// interference covariance and `Ψ_L` the base.
pub fn ul_covariance_chain(
    link: &LinkModel,
    masks: &PhaseMasks,
    j: usize,
    point: &DesignPoint,
) -> Vec<FactoredCovariance> {
    let l = link.num_ul();
    let h = ul_effective(link, masks, j);
    let mut chain = vec![ul_base_covariance(link, masks, j, point)];
    for u in (0..l).rev() {
        let mut next = chain.last().unwrap().clone();
        next.add_outer(&h[u], point.p[u][j] * point.p[u][j]);
        chain.push(next);
    }
    chain.reverse();
    chain
}

/// Uplink SINRs under MMSE-SIC decoding in ascending user order.
///
/// With nonzero error variances in `link` these are the worst-case SINRs.
pub fn ul_sinr(link: &LinkModel, masks: &PhaseMasks, j: usize, point: &DesignPoint) -> Result<Vec<f64>, RateError> {
    point.check(link)?;
    let l = link.num_ul();
    if masks.beta[j] {
        return Ok(vec![0.0; l]);
    }
    let h = ul_effective(link, masks, j);
    let chain = ul_covariance_chain(link, masks, j, point);
    Ok((0..l)
        .map(|u| {
            let p2 = point.p[u][j] * point.p[u][j];
            if p2 == 0.0 {
                return 0.0;
            }
            // Ψ for user u excludes users 0..=u
            p2 * chain[u + 1].solve(&h[u]).1
        })
        .collect())
}

/// Interference plus noise `ψ` seen by each downlink user in phase `j`,
/// including the CSI error terms carried by `link`.
pub fn dl_interference(link: &LinkModel, masks: &PhaseMasks, j: usize, point: &DesignPoint) -> Result<Vec<f64>, RateError> {
    point.check(link)?;
    let h = dl_effective(link, masks, j);
    let w: Vec<CVector> = point.w.iter().map(|w| masked(&w[j], &masks.lambda[j])).collect();
    let tx_power: f64 = w.iter().map(|w| w.norm_squared()).sum();
    Ok((0..link.num_dl())
        .map(|k| {
            let mut den = link.sigma2_dl + link.errors.eps_dl[k] * tx_power;
            for (kk, wk) in w.iter().enumerate() {
                if kk != k {
                    den += h[k].dotc(wk).norm_sqr();
                }
            }
            for (u, p) in point.p.iter().enumerate() {
                let p2 = p[j] * p[j];
                den += p2 * (link.cci[(u, k)].norm_sqr() + link.errors.eps_cci[(u, k)]);
            }
            den
        })
        .collect())
}

/// Downlink SINRs; worst-case when `link` carries error variances.
pub fn dl_sinr(link: &LinkModel, masks: &PhaseMasks, j: usize, point: &DesignPoint) -> Result<Vec<f64>, RateError> {
    let psi = dl_interference(link, masks, j, point)?;
    if masks.chi[j] {
        return Ok(vec![0.0; link.num_dl()]);
    }
    let h = dl_effective(link, masks, j);
    Ok((0..link.num_dl())
        .map(|k| h[k].dotc(&masked(&point.w[k][j], &masks.lambda[j])).norm_sqr() / psi[k])
        .collect())
}

pub fn robust_ul_sinr(
    rc: &RobustChannelSet,
    rho2: f64,
    masks: &PhaseMasks,
    j: usize,
    point: &DesignPoint,
) -> Result<Vec<f64>, RateError> {
    ul_sinr(&LinkModel::robust(rc, rho2), masks, j, point)
}

pub fn robust_dl_sinr(
    rc: &RobustChannelSet,
    rho2: f64,
    masks: &PhaseMasks,
    j: usize,
    point: &DesignPoint,
) -> Result<Vec<f64>, RateError> {
    dl_sinr(&LinkModel::robust(rc, rho2), masks, j, point)
}

/// `ln det(I + Σ p² h̃h̃ᴴ C⁻¹)` with `C` the base covariance, computed as a
/// ratio of determinants rather than through the SIC chain.
pub fn ul_sum_rate_logdet(link: &LinkModel, masks: &PhaseMasks, j: usize, point: &DesignPoint) -> f64 {
    if masks.beta[j] {
        return 0.0;
    }
    let base = ul_base_covariance(link, masks, j, point);
    let mut full = base.clone();
    for (u, h) in ul_effective(link, masks, j).iter().enumerate() {
        full.add_outer(h, point.p[u][j] * point.p[u][j]);
    }
    full.ln_det() - base.ln_det()
}

/// Linear MMSE receive weights `u = p (p² h̄h̄ᴴ + Ψ̂)⁻¹ h̄` for each uplink user.
pub fn mmse_weights(link: &LinkModel, masks: &PhaseMasks, j: usize, point: &DesignPoint) -> Vec<CVector> {
    let h = ul_effective(link, masks, j);
    let chain = ul_covariance_chain(link, masks, j, point);
    (0..link.num_ul())
        .map(|u| chain[u].solve(&h[u]).0 * C64::new(point.p[u][j], 0.0))
        .collect()
}

/// Mean squared error of receive weights `u` for user `user` in phase `j`.
pub fn mmse_mse(link: &LinkModel, masks: &PhaseMasks, j: usize, point: &DesignPoint, user: usize, u: &CVector) -> f64 {
    let h = &ul_effective(link, masks, j)[user];
    let chain = ul_covariance_chain(link, masks, j, point);
    let p = point.p[user][j];
    1.0 - 2.0 * p * u.dotc(h).re + chain[user].quad(u)
}

/// Recovers the SINR from MMSE weights via `s / (1 − s)` with `s = p·Re(uᴴh)`.
pub fn sinr_from_mmse(link: &LinkModel, masks: &PhaseMasks, j: usize, point: &DesignPoint, user: usize, u: &CVector) -> f64 {
    let h = &ul_effective(link, masks, j)[user];
    let s = point.p[user][j] * u.dotc(h).re;
    s / (1.0 - s)
}

/// Which (user, phase) pairs are served.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub ul: Vec<[bool; 2]>,
    pub dl: Vec<[bool; 2]>,
}

impl Assignment {
    pub fn all(num_ul: usize, num_dl: usize) -> Self {
        Assignment {
            ul: vec![[true; 2]; num_ul],
            dl: vec![[true; 2]; num_dl],
        }
    }

    pub fn none(num_ul: usize, num_dl: usize) -> Self {
        Assignment {
            ul: vec![[false; 2]; num_ul],
            dl: vec![[false; 2]; num_dl],
        }
    }
}

/// Thresholds per-phase SINRs: served iff `γ ≥ γ_ε`.
pub fn assign_users(ul_sinr: &[[f64; 2]], dl_sinr: &[[f64; 2]], gamma_eps: f64) -> Assignment {
    let t = |row: &[f64; 2]| [row[0] >= gamma_eps, row[1] >= gamma_eps];
    Assignment {
        ul: ul_sinr.iter().map(t).collect(),
        dl: dl_sinr.iter().map(t).collect(),
    }
}

/// Per-user block rates in nats/s/Hz.
#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub ul_rates: Vec<f64>,
    pub dl_rates: Vec<f64>,
    pub sum_rate: f64,
    pub min_scaled_rate: f64,
    pub ul_sinr: Vec<[f64; 2]>,
    pub dl_sinr: Vec<[f64; 2]>,
    pub alpha: Assignment,
}

impl RateReport {
    pub fn ul_rates_bps(&self) -> Vec<f64> {
        self.ul_rates.iter().map(|r| r / LN_2).collect()
    }

    pub fn dl_rates_bps(&self) -> Vec<f64> {
        self.dl_rates.iter().map(|r| r / LN_2).collect()
    }

    pub fn sum_rate_bps(&self) -> f64 {
        self.sum_rate / LN_2
    }

    pub fn min_scaled_rate_bps(&self) -> f64 {
        self.min_scaled_rate / LN_2
    }
}

/// Per-phase SINR tables for a design.
pub fn sinr_tables(
    link: &LinkModel,
    mode: &ModeMatrix,
    point: &DesignPoint,
) -> Result<(Vec<[f64; 2]>, Vec<[f64; 2]>), RateError> {
    let masks = mode.masks(link.half_array_size);
    let mut ul = vec![[0.0; 2]; link.num_ul()];
    let mut dl = vec![[0.0; 2]; link.num_dl()];
    for j in 0..2 {
        for (u, g) in ul_sinr(link, &masks, j, point)?.into_iter().enumerate() {
            ul[u][j] = g;
        }
        for (k, g) in dl_sinr(link, &masks, j, point)?.into_iter().enumerate() {
            dl[k][j] = g;
        }
    }
    Ok((ul, dl))
}

/// Rates `Σ_j α_j τ̄_j ln(1 + γ_j)` per user. When `alpha` is `None` the
/// assignment is taken from the SINRs with threshold `gamma_eps`.
pub fn block_rates(
    link: &LinkModel,
    mode: &ModeMatrix,
    point: &DesignPoint,
    alpha: Option<&Assignment>,
    gamma_eps: f64,
    eta: f64,
) -> Result<RateReport, RateError> {
    let (ul, dl) = sinr_tables(link, mode, point)?;
    let alpha = match alpha {
        Some(a) => a.clone(),
        None => assign_users(&ul, &dl, gamma_eps),
    };
    let tau = point.phase_fractions();
    let rate = |g: &[f64; 2], a: &[bool; 2]| -> f64 {
        (0..2).filter(|&j| a[j]).map(|j| tau[j] * g[j].ln_1p()).sum()
    };
    let ul_rates: Vec<f64> = ul.iter().zip(&alpha.ul).map(|(g, a)| rate(g, a)).collect();
    let dl_rates: Vec<f64> = dl.iter().zip(&alpha.dl).map(|(g, a)| rate(g, a)).collect();
    let sum_rate = ul_rates.iter().sum::<f64>() + dl_rates.iter().sum::<f64>();
    let min_scaled_rate = ul_rates
        .iter()
        .copied()
        .chain(dl_rates.iter().map(|r| r / eta))
        .fold(f64::INFINITY, f64::min);
    Ok(RateReport {
        ul_rates,
        dl_rates,
        sum_rate,
        min_scaled_rate,
        ul_sinr: ul,
        dl_sinr: dl,
        alpha,
    })
}
