//! Flat `key = value` run files.
//!
//! Blank lines and `#` comments are ignored. Every key is optional; anything
//! not set keeps the full-scale defaults. Lists are comma-separated.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use duplex::config::{db_to_linear, dbm_to_watts, linear_to_db, watts_to_dbm, DistanceUnit};
use duplex::SystemConfig;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigFileError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("`{key}`: cannot parse `{value}` as {expected}")]
    Type { key: String, value: String, expected: &'static str },
    #[error(transparent)]
    Invalid(#[from] duplex::error::ConfigError),
    #[error("{0}")]
    Other(String),
}

/// Scenario plus the experiment settings a run file may carry.
#[derive(Clone, Debug, PartialEq)]
pub struct RunFile {
    pub system: SystemConfig,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub rho2_grid_db: Option<Vec<f64>>,
    pub eta_grid: Option<Vec<f64>>,
    pub delta_grid: Option<Vec<f64>>,
    /// Channel draws per topology in the CDF experiment.
    pub cdf_channels: Option<usize>,
}

impl Default for RunFile {
    fn default() -> Self {
        RunFile {
            system: SystemConfig::default(),
            trials: None,
            seed: None,
            rho2_grid_db: None,
            eta_grid: None,
            delta_grid: None,
            cdf_channels: None,
        }
    }
}

pub const KEYS: &[&str] = &[
    "half_array_size",
    "num_ul",
    "num_dl",
    "cell_radius_m",
    "bandwidth_hz",
    "noise_psd_dbm_hz",
    "path_loss_unit",
    "bs_power_dbm",
    "ul_power_dbm",
    "bs_phase_cap_dbm",
    "ul_phase_cap_dbm",
    "rho2_db",
    "rician_k_db",
    "rate_threshold_bps",
    "eta",
    "sca_tol",
    "assign_threshold",
    "csi_delta",
    "csi_upsilon",
    "csi_ref_snr_db",
    "max_iterations",
    "feasibility_iterations",
    "time_refresh",
    "seed",
    "trials",
    "rho2_grid_db",
    "eta_grid",
    "delta_grid",
    "cdf_channels",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str, expected: &'static str) -> Result<T, ConfigFileError> {
    value.parse().map_err(|_| ConfigFileError::Type {
        key: key.to_string(),
        value: value.to_string(),
        expected,
    })
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, ConfigFileError> {
    let items: Result<Vec<f64>, _> = value.split(',').map(|s| parse(key, s.trim(), "a list of numbers")).collect();
    let items = items?;
    if items.is_empty() {
        return Err(ConfigFileError::Other(format!("`{key}` must not be empty")));
    }
    Ok(items)
}

/// Splits the text into `(line, key, value)` entries.
pub fn parse_entries(text: &str) -> Result<Vec<(usize, String, String)>, ConfigFileError> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            return Err(ConfigFileError::Syntax { line });
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(ConfigFileError::Syntax { line });
        }
        if !KEYS.contains(&k) {
            return Err(ConfigFileError::UnknownKey {
                line,
                key: k.to_string(),
            });
        }
        if seen.insert(k.to_string(), line).is_some() {
            return Err(ConfigFileError::Duplicate {
                line,
                key: k.to_string(),
            });
        }
        out.push((line, k.to_string(), v.to_string()));
    }
    Ok(out)
}

impl RunFile {
    pub fn from_text(text: &str) -> Result<Self, ConfigFileError> {
        let mut rf = RunFile::default();
        let mut caps = (false, false);
        for (_, key, value) in parse_entries(text)? {
            rf.set(&key, &value, &mut caps)?;
        }
        rf.system.validate()?;
        Ok(rf)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigFileError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigFileError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_text(&text)
    }

    /// `caps` records whether the per-phase caps were set explicitly; until
    /// then they follow their budgets.
    fn set(&mut self, key: &str, v: &str, caps: &mut (bool, bool)) -> Result<(), ConfigFileError> {
        let s = &mut self.system;
        let num = |what| parse::<f64>(key, v, what);
        match key {
            "half_array_size" => s.half_array_size = parse(key, v, "a count")?,
            "num_ul" => s.num_ul = parse(key, v, "a count")?,
            "num_dl" => s.num_dl = parse(key, v, "a count")?,
            "cell_radius_m" => s.cell_radius_m = num("a number")?,
            "bandwidth_hz" => s.bandwidth_hz = num("a number")?,
            "noise_psd_dbm_hz" => s.noise_psd_dbm_hz = num("a number")?,
            "path_loss_unit" => {
                s.path_loss_unit = match v {
                    "km" => DistanceUnit::Kilometers,
                    "m" => DistanceUnit::Meters,
                    _ => {
                        return Err(ConfigFileError::Type {
                            key: key.into(),
                            value: v.into(),
                            expected: "`km` or `m`",
                        })
                    }
                }
            }
            "bs_power_dbm" => {
                s.bs_power_w = dbm_to_watts(num("a number")?);
                if !caps.0 {
                    s.bs_phase_cap_w = s.bs_power_w;
                }
            }
            "ul_power_dbm" => {
                s.ul_power_w = dbm_to_watts(num("a number")?);
                if !caps.1 {
                    s.ul_phase_cap_w = s.ul_power_w;
                }
            }
            "bs_phase_cap_dbm" => {
                s.bs_phase_cap_w = dbm_to_watts(num("a number")?);
                caps.0 = true;
            }
            "ul_phase_cap_dbm" => {
                s.ul_phase_cap_w = dbm_to_watts(num("a number")?);
                caps.1 = true;
            }
            "rho2_db" => s.rho2 = db_to_linear(num("a number")?),
            "rician_k_db" => s.rician_k_db = num("a number")?,
            "rate_threshold_bps" => s.rate_threshold_bps = num("a number")?,
            "eta" => s.eta = num("a number")?,
            "sca_tol" => s.sca_tol = num("a number")?,
            "assign_threshold" => s.assign_threshold = num("a number")?,
            "csi_delta" => s.csi_delta = num("a number")?,
            "csi_upsilon" => s.csi_upsilon = num("a number")?,
            "csi_ref_snr_db" => s.csi_ref_snr_db = num("a number")?,
            "max_iterations" => s.max_iterations = parse(key, v, "a count")?,
            "feasibility_iterations" => s.feasibility_iterations = parse(key, v, "a count")?,
            "time_refresh" => s.time_refresh = parse(key, v, "`true` or `false`")?,
            "seed" => self.seed = Some(parse(key, v, "an unsigned integer")?),
            "trials" => self.trials = Some(parse(key, v, "a count")?),
            "rho2_grid_db" => self.rho2_grid_db = Some(parse_list(key, v)?),
            "eta_grid" => self.eta_grid = Some(parse_list(key, v)?),
            "delta_grid" => self.delta_grid = Some(parse_list(key, v)?),
            "cdf_channels" => self.cdf_channels = Some(parse(key, v, "a count")?),
            _ => unreachable!("key list and setter disagree on `{key}`"),
        }
        Ok(())
    }
}

/// The scenario as `(key, value)` pairs in run-file units.
pub fn describe(s: &SystemConfig) -> Vec<(&'static str, String)> {
    vec![
        ("half_array_size", s.half_array_size.to_string()),
        ("num_ul", s.num_ul.to_string()),
        ("num_dl", s.num_dl.to_string()),
        ("cell_radius_m", s.cell_radius_m.to_string()),
        ("bandwidth_hz", s.bandwidth_hz.to_string()),
        ("noise_psd_dbm_hz", s.noise_psd_dbm_hz.to_string()),
        (
            "path_loss_unit",
            match s.path_loss_unit {
                DistanceUnit::Kilometers => "km",
                DistanceUnit::Meters => "m",
            }
            .to_string(),
        ),
        ("bs_power_dbm", watts_to_dbm(s.bs_power_w).to_string()),
        ("ul_power_dbm", watts_to_dbm(s.ul_power_w).to_string()),
        ("bs_phase_cap_dbm", watts_to_dbm(s.bs_phase_cap_w).to_string()),
        ("ul_phase_cap_dbm", watts_to_dbm(s.ul_phase_cap_w).to_string()),
        ("rho2_db", linear_to_db(s.rho2).to_string()),
        ("rician_k_db", s.rician_k_db.to_string()),
        ("rate_threshold_bps", s.rate_threshold_bps.to_string()),
        ("eta", s.eta.to_string()),
        ("sca_tol", s.sca_tol.to_string()),
        ("assign_threshold", s.assign_threshold.to_string()),
        ("csi_delta", s.csi_delta.to_string()),
        ("csi_upsilon", s.csi_upsilon.to_string()),
        ("csi_ref_snr_db", s.csi_ref_snr_db.to_string()),
        ("max_iterations", s.max_iterations.to_string()),
        ("feasibility_iterations", s.feasibility_iterations.to_string()),
        ("time_refresh", s.time_refresh.to_string()),
    ]
}
