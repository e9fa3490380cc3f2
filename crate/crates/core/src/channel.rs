//! Topologies, path loss, and random channel realizations.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{db_to_linear, SystemConfig};
use crate::error::ChannelError;

pub type C64 = Complex<f64>;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

/// Users never sit closer than this to the BS or to each other (meters).
pub const EXCLUSION_RADIUS_M: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinkKind {
    BsUser,
    UserUser,
}

/// Path loss in dB for distance `d`, in the unit the formula is written for.
pub fn path_loss_db(kind: LinkKind, d: f64) -> Result<f64, ChannelError> {
    if !(d > 0.0) {
        return Err(ChannelError::NonPositiveDistance(d));
    }
    Ok(match kind {
        LinkKind::BsUser => 103.8 + 20.9 * d.log10(),
        LinkKind::UserUser => 145.4 + 37.5 * d.log10(),
    })
}

/// Draws one sample of CN(0, variance).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(s * re, s * im)
}

fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, len: usize, variance: f64) -> CVector {
    CVector::from_fn(len, |_, _| complex_gaussian(rng, variance))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    pub ul_positions: Vec<[f64; 2]>,
    pub dl_positions: Vec<[f64; 2]>,
    pub d_bs_ul: Vec<f64>,
    pub d_bs_dl: Vec<f64>,
    /// Uplink user ℓ to downlink user k, L×K.
    pub d_ul_dl: DMatrix<f64>,
}

fn place<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> [f64; 2] {
    let r0 = EXCLUSION_RADIUS_M;
    let u: f64 = rng.random();
    let r = (r0 * r0 + u * (radius * radius - r0 * r0)).sqrt();
    let theta = rng.random::<f64>() * std::f64::consts::TAU;
    [r * theta.cos(), r * theta.sin()]
}

/// Places users uniformly in the annulus between the exclusion radius and
/// the cell edge.
pub fn generate_topology<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Topology {
    let ul: Vec<[f64; 2]> = (0..config.num_ul).map(|_| place(rng, config.cell_radius_m)).collect();
    let dl: Vec<[f64; 2]> = (0..config.num_dl).map(|_| place(rng, config.cell_radius_m)).collect();
    let norm = |p: &[f64; 2]| p[0].hypot(p[1]);
    let d_ul_dl = DMatrix::from_fn(ul.len(), dl.len(), |l, k| {
        ((ul[l][0] - dl[k][0]).hypot(ul[l][1] - dl[k][1])).max(EXCLUSION_RADIUS_M)
    });
    Topology {
        d_bs_ul: ul.iter().map(norm).collect(),
        d_bs_dl: dl.iter().map(norm).collect(),
        ul_positions: ul,
        dl_positions: dl,
        d_ul_dl,
    }
}

/// Builds the 2N×2N block anti-diagonal `[[0, G], [Gᴴ, 0]]`.
pub fn si_block_matrix(g_si: &CMatrix) -> CMatrix {
    let n = g_si.nrows();
    let mut out = CMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, n), (n, n)).copy_from(g_si);
    out.view_mut((n, 0), (n, n)).copy_from(&g_si.adjoint());
    out
}

/// One channel realization. Powers and noise are in Watts.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    pub half_array_size: usize,
    /// Per uplink user, length 2N, stacked over the two half-arrays.
    pub h_ul: Vec<CVector>,
    pub h_dl: Vec<CVector>,
    pub g_si: CMatrix,
    pub g_bar: CMatrix,
    /// Uplink-to-downlink user gains, L×K.
    pub cci: CMatrix,
    pub sigma2_bs: f64,
    pub sigma2_dl: f64,
    /// Large-scale variance of each link (10^(−PL/10)).
    pub ul_variance: Vec<f64>,
    pub dl_variance: Vec<f64>,
    pub cci_variance: DMatrix<f64>,
}

impl ChannelSet {
    pub fn num_ul(&self) -> usize {
        self.h_ul.len()
    }

    pub fn num_dl(&self) -> usize {
        self.h_dl.len()
    }

    pub fn num_antennas(&self) -> usize {
        2 * self.half_array_size
    }
}

fn rician_entry<R: Rng + ?Sized>(rng: &mut R, k_factor: f64) -> C64 {
    let los = (k_factor / (k_factor + 1.0)).sqrt();
    los + complex_gaussian(rng, 1.0 / (k_factor + 1.0))
}

pub fn sample_channels<R: Rng + ?Sized>(
    topology: &Topology,
    config: &SystemConfig,
    rng: &mut R,
) -> ChannelSet {
    let n = config.half_array_size;
    let unit = config.path_loss_unit;
    let variance = |kind, d_m: f64| {
        let pl = path_loss_db(kind, unit.from_meters(d_m)).expect("topology distances are positive");
        10f64.powf(-pl / 10.0)
    };
    let ul_variance: Vec<f64> = topology.d_bs_ul.iter().map(|&d| variance(LinkKind::BsUser, d)).collect();
    let dl_variance: Vec<f64> = topology.d_bs_dl.iter().map(|&d| variance(LinkKind::BsUser, d)).collect();
    let cci_variance = topology.d_ul_dl.map(|d| variance(LinkKind::UserUser, d));

    let h_ul = ul_variance.iter().map(|&v| gaussian_vector(rng, 2 * n, v)).collect();
    let h_dl = dl_variance.iter().map(|&v| gaussian_vector(rng, 2 * n, v)).collect();
    let k = db_to_linear(config.rician_k_db);
    let g_si = CMatrix::from_fn(n, n, |_, _| rician_entry(rng, k));
    let cci = CMatrix::from_fn(cci_variance.nrows(), cci_variance.ncols(), |l, kk| {
        complex_gaussian(rng, cci_variance[(l, kk)])
    });
    let noise = config.noise_power_w();
    ChannelSet {
        half_array_size: n,
        h_ul,
        h_dl,
        g_bar: si_block_matrix(&g_si),
        g_si,
        cci,
        sigma2_bs: noise,
        sigma2_dl: noise,
        ul_variance,
        dl_variance,
        cci_variance,
    }
}

/// CSI error variance law `δ·r^(−υ)`, relative to the link variance.
pub fn csi_error_variance(delta: f64, upsilon: f64, snr_linear: f64) -> f64 {
    delta * snr_linear.powf(-upsilon)
}

/// Absolute CSI error variances per link.
#[derive(Clone, Debug, PartialEq)]
pub struct CsiErrors {
    pub eps_ul: Vec<f64>,
    pub eps_dl: Vec<f64>,
    pub eps_cci: DMatrix<f64>,
}

impl CsiErrors {
    pub fn zero(num_ul: usize, num_dl: usize) -> Self {
        CsiErrors {
            eps_ul: vec![0.0; num_ul],
            eps_dl: vec![0.0; num_dl],
            eps_cci: DMatrix::zeros(num_ul, num_dl),
        }
    }

    /// Scales a relative variance by each link's large-scale variance.
    ///
    /// The relative variance is clamped to 1, where the estimate carries no
    /// information and the whole channel is treated as error.
    pub fn relative(channels: &ChannelSet, rel: f64) -> Self {
        let r = rel.clamp(0.0, 1.0);
        CsiErrors {
            eps_ul: channels.ul_variance.iter().map(|v| r * v).collect(),
            eps_dl: channels.dl_variance.iter().map(|v| r * v).collect(),
            eps_cci: channels.cci_variance.map(|v| r * v),
        }
    }

    /// Relative variance from the configured δ, υ and reference SNR.
    pub fn from_config(channels: &ChannelSet, config: &SystemConfig) -> Self {
        let rel = csi_error_variance(
            config.csi_delta,
            config.csi_upsilon,
            db_to_linear(config.csi_ref_snr_db),
        );
        Self::relative(channels, rel)
    }

    pub fn is_zero(&self) -> bool {
        self.eps_ul.iter().chain(&self.eps_dl).chain(self.eps_cci.iter()).all(|&e| e == 0.0)
    }
}

/// Channel estimates with their error variances.
#[derive(Clone, Debug, PartialEq)]
pub struct RobustChannelSet {
    /// Estimated channels; the SI channel and noise powers are copied as is.
    pub estimate: ChannelSet,
    pub errors: CsiErrors,
    pub truth: Option<ChannelSet>,
}

/// Splits `h` into an estimate and an independent error of variance `eps`.
///
/// Draws the estimate from its conditional law given `h`, so that
/// `h = ĥ + Δ` with `ĥ ~ CN(0, v − ε)` and `Δ ~ CN(0, ε)` independent.
fn split_entry<R: Rng + ?Sized>(rng: &mut R, h: C64, v: f64, eps: f64) -> C64 {
    if eps == 0.0 {
        return h;
    }
    let keep = 1.0 - eps / v;
    h * keep + complex_gaussian(rng, eps * keep)
}

pub fn split_robust<R: Rng + ?Sized>(
    channels: &ChannelSet,
    errors: &CsiErrors,
    rng: &mut R,
) -> Result<RobustChannelSet, ChannelError> {
    let check = |eps: f64, v: f64| {
        if !(eps >= 0.0 && eps.is_finite()) || eps > v * (1.0 + 1e-12) {
            Err(ChannelError::BadVariance(eps))
        } else {
            Ok(eps.min(v))
        }
    };
    let mut est = channels.clone();
    for (l, h) in est.h_ul.iter_mut().enumerate() {
        let v = channels.ul_variance[l];
        let e = check(errors.eps_ul[l], v)?;
        h.apply(|x| *x = split_entry(rng, *x, v, e));
    }
    for (k, h) in est.h_dl.iter_mut().enumerate() {
        let v = channels.dl_variance[k];
        let e = check(errors.eps_dl[k], v)?;
        h.apply(|x| *x = split_entry(rng, *x, v, e));
    }
    for l in 0..channels.num_ul() {
        for k in 0..channels.num_dl() {
            let v = channels.cci_variance[(l, k)];
            let e = check(errors.eps_cci[(l, k)], v)?;
            est.cci[(l, k)] = split_entry(rng, channels.cci[(l, k)], v, e);
        }
    }
    Ok(RobustChannelSet {
        estimate: est,
        errors: errors.clone(),
        truth: Some(channels.clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn path_loss_table_values() {
        assert!((path_loss_db(LinkKind::BsUser, 100.0).unwrap() - 145.6).abs() < 1e-9);
        assert!((path_loss_db(LinkKind::UserUser, 10.0).unwrap() - 182.9).abs() < 1e-9);
        assert_eq!(path_loss_db(LinkKind::BsUser, 1.0).unwrap(), 103.8);
        assert!(path_loss_db(LinkKind::BsUser, 0.0).is_err());
        assert!(path_loss_db(LinkKind::UserUser, -3.0).is_err());
    }

    #[test]
    fn topology_respects_radius_and_seed() {
        let cfg = SystemConfig::default();
        let a = generate_topology(&cfg, &mut ChaCha8Rng::seed_from_u64(3));
        let b = generate_topology(&cfg, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
        for d in a.d_bs_ul.iter().chain(&a.d_bs_dl) {
            assert!(*d <= 100.0 && *d >= EXCLUSION_RADIUS_M);
        }
        assert!(a.d_ul_dl.iter().all(|&d| d > 0.0));
    }

    #[test]
    fn si_block_is_hermitian_anti_diagonal() {
        let cfg = SystemConfig::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let topo = generate_topology(&cfg, &mut rng);
        let ch = sample_channels(&topo, &cfg, &mut rng);
        let n = cfg.half_array_size;
        assert!(ch.g_bar.view((0, 0), (n, n)).iter().all(|z| *z == C64::new(0.0, 0.0)));
        assert!(ch.g_bar.view((n, n), (n, n)).iter().all(|z| *z == C64::new(0.0, 0.0)));
        assert_eq!(ch.g_bar, ch.g_bar.adjoint());
    }

    #[test]
    fn error_variance_law() {
        assert_eq!(csi_error_variance(0.0, 0.7, 10.0), 0.0);
        assert_eq!(csi_error_variance(4.0, 0.0, 10.0), 4.0);
        assert!((csi_error_variance(2.0, 0.7, 10.0) - 2.0 * 10f64.powf(-0.7)).abs() < 1e-15);
    }

    #[test]
    fn zero_errors_leave_estimates_exact() {
        let cfg = SystemConfig::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let topo = generate_topology(&cfg, &mut rng);
        let ch = sample_channels(&topo, &cfg, &mut rng);
        let r = split_robust(&ch, &CsiErrors::zero(3, 3), &mut rng).unwrap();
        assert_eq!(r.estimate, ch);
    }

    #[test]
    fn oversized_error_rejected() {
        let cfg = SystemConfig::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let topo = generate_topology(&cfg, &mut rng);
        let ch = sample_channels(&topo, &cfg, &mut rng);
        let mut e = CsiErrors::relative(&ch, 0.5);
        e.eps_ul[0] = ch.ul_variance[0] * 2.0;
        assert!(split_robust(&ch, &e, &mut rng).is_err());
    }
}
