//! Scenario parameters.

use crate::error::ConfigError;

/// Converts dBm to Watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Unit in which distances enter the path-loss formulas.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistanceUnit {
    Kilometers,
    Meters,
}

impl DistanceUnit {
    pub fn from_meters(self, d_m: f64) -> f64 {
        match self {
            DistanceUnit::Kilometers => d_m / 1000.0,
            DistanceUnit::Meters => d_m,
        }
    }
}

/// All scenario scalars. Powers are stored in Watts; the noise PSD stays in
/// dBm/Hz because it is only ever combined with the bandwidth.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemConfig {
    /// Antennas per half-array; the BS has `2 * half_array_size`.
    pub half_array_size: usize,
    pub num_ul: usize,
    pub num_dl: usize,
    pub cell_radius_m: f64,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    /// Unit of `d` in the path-loss formulas (the pico-cell model is in km).
    pub path_loss_unit: DistanceUnit,
    pub bs_power_w: f64,
    /// Per uplink user.
    pub ul_power_w: f64,
    /// Per half-array, per phase cap on the BS transmit power.
    pub bs_phase_cap_w: f64,
    /// Per phase cap on each uplink user's power.
    pub ul_phase_cap_w: f64,
    /// Residual self-interference power ratio.
    pub rho2: f64,
    pub rician_k_db: f64,
    /// Minimum per-user rate in bps/Hz, both directions.
    pub rate_threshold_bps: f64,
    /// Required downlink-to-uplink rate ratio for max-min fairness.
    pub eta: f64,
    pub sca_tol: f64,
    pub assign_threshold: f64,
    pub csi_delta: f64,
    pub csi_upsilon: f64,
    /// Reference SNR plugged into the CSI error-variance law.
    pub csi_ref_snr_db: f64,
    pub max_iterations: usize,
    pub feasibility_iterations: usize,
    /// Re-optimize the phase split in closed form after each SCA step.
    pub time_refresh: bool,
    pub rng_seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let bs = dbm_to_watts(26.0);
        let ul = dbm_to_watts(23.0);
        SystemConfig {
            half_array_size: 8,
            num_ul: 8,
            num_dl: 8,
            cell_radius_m: 100.0,
            bandwidth_hz: 10e6,
            noise_psd_dbm_hz: -174.0,
            path_loss_unit: DistanceUnit::Kilometers,
            bs_power_w: bs,
            ul_power_w: ul,
            bs_phase_cap_w: bs,
            ul_phase_cap_w: ul,
            rho2: db_to_linear(-30.0),
            rician_k_db: 5.0,
            rate_threshold_bps: 1.0,
            eta: 1.0,
            sca_tol: 1e-3,
            assign_threshold: 1e-3,
            csi_delta: 0.0,
            csi_upsilon: 0.7,
            csi_ref_snr_db: 20.0,
            max_iterations: 200,
            feasibility_iterations: 50,
            time_refresh: true,
            rng_seed: 0,
        }
    }
}

impl SystemConfig {
    /// The reduced scenario used for quick experiments: 2N = 8, L = K = 3.
    pub fn desk() -> Self {
        SystemConfig {
            half_array_size: 4,
            num_ul: 3,
            num_dl: 3,
            ..Self::default()
        }
    }

    pub fn num_antennas(&self) -> usize {
        2 * self.half_array_size
    }

    /// Receiver noise power in Watts (same at the BS and at every user).
    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.noise_psd_dbm_hz + 10.0 * self.bandwidth_hz.log10())
    }

    /// Rate threshold in nats/s/Hz.
    pub fn rate_threshold_nats(&self) -> f64 {
        self.rate_threshold_bps * std::f64::consts::LN_2
    }

    pub fn with_rho2_db(mut self, db: f64) -> Self {
        self.rho2 = db_to_linear(db);
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |field: &'static str, why: &str| {
            Err(ConfigError::Invalid {
                field,
                reason: why.to_string(),
            })
        };
        if self.half_array_size == 0 {
            return bad("half_array_size", "must be at least 1");
        }
        if self.num_ul == 0 {
            return bad("num_ul", "must be at least 1");
        }
        if self.num_dl == 0 {
            return bad("num_dl", "must be at least 1");
        }
        if !(self.cell_radius_m > 1.0) {
            return bad("cell_radius_m", "must exceed the 1 m exclusion radius");
        }
        if !(self.bandwidth_hz > 0.0) {
            return bad("bandwidth_hz", "must be positive");
        }
        if !self.noise_psd_dbm_hz.is_finite() {
            return bad("noise_psd_dbm_hz", "must be finite");
        }
        for (field, v) in [
            ("bs_power", self.bs_power_w),
            ("ul_power", self.ul_power_w),
            ("bs_phase_cap", self.bs_phase_cap_w),
            ("ul_phase_cap", self.ul_phase_cap_w),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(field, "must be a positive finite power");
            }
        }
        if !(0.0..=1.0).contains(&self.rho2) {
            return bad("rho2", "must lie in [0, 1]");
        }
        if !self.rician_k_db.is_finite() {
            return bad("rician_k_db", "must be finite");
        }
        if !(self.rate_threshold_bps >= 0.0 && self.rate_threshold_bps.is_finite()) {
            return bad("rate_threshold_bps", "must be nonnegative");
        }
        if !(self.eta >= 1.0 && self.eta.is_finite()) {
            return bad("eta", "must be at least 1");
        }
        if !(self.sca_tol > 0.0) {
            return bad("sca_tol", "must be positive");
        }
        if !(self.assign_threshold > 0.0) {
            return bad("assign_threshold", "must be positive");
        }
        if !(self.csi_delta >= 0.0 && self.csi_delta.is_finite()) {
            return bad("csi_delta", "must be nonnegative");
        }
        if !(self.csi_upsilon >= 0.0 && self.csi_upsilon.is_finite()) {
            return bad("csi_upsilon", "must be nonnegative");
        }
        if !self.csi_ref_snr_db.is_finite() {
            return bad("csi_ref_snr_db", "must be finite");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations", "must be at least 1");
        }
        if self.feasibility_iterations == 0 {
            return bad("feasibility_iterations", "must be at least 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_power_is_minus_104_dbm() {
        let c = SystemConfig::default();
        assert!((watts_to_dbm(c.noise_power_w()) + 104.0).abs() < 1e-9);
    }

    #[test]
    fn defaults_validate() {
        SystemConfig::default().validate().unwrap();
        SystemConfig::desk().validate().unwrap();
        assert_eq!(SystemConfig::default().num_antennas(), 16);
    }

    #[test]
    fn rejects_degenerate_values() {
        let mut c = SystemConfig::default();
        c.num_dl = 0;
        assert!(c.validate().is_err());
        let mut c = SystemConfig::default();
        c.cell_radius_m = 0.0;
        assert!(c.validate().is_err());
        let mut c = SystemConfig::default();
        c.eta = 0.5;
        assert!(c.validate().is_err());
        let mut c = SystemConfig::default();
        c.rho2 = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn dbm_round_trip() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((watts_to_dbm(dbm_to_watts(23.0)) - 23.0).abs() < 1e-12);
    }
}
