//! Result rows, the CSV layout and the JSON summary.

use std::collections::BTreeMap;
use std::io::Write;

use duplex::algorithms::{Solution, SolutionStatus};
use duplex::mode::ModeClass;
use serde_json::{json, Value};

/// Column order of `results.csv`.
pub const COLUMNS: [&str; 13] = [
    "trial",
    "algorithm",
    "mode_hat1",
    "mode_hat2",
    "tau",
    "sum_rate_bpshz",
    "min_rate_bpshz",
    "ul_rates",
    "dl_rates",
    "iterations",
    "status",
    "solve_ms",
    "sweep_value",
];

/// Nine significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.8e}")
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_float(x)).collect::<Vec<_>>().join(";")
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub trial: usize,
    pub algorithm: String,
    pub mode: Option<(u8, u8)>,
    pub two_phase_fd: bool,
    pub tau: Option<f64>,
    /// bps/Hz; zero when no design was found.
    pub sum_rate: f64,
    pub min_rate: f64,
    pub ul_rates: Vec<f64>,
    pub dl_rates: Vec<f64>,
    pub iterations: usize,
    pub status: SolutionStatus,
    pub solve_ms: Option<f64>,
    pub sweep_value: Option<f64>,
}

impl ResultRow {
    pub fn from_solution(trial: usize, sol: &Solution, sweep_value: Option<f64>, timing: bool) -> Self {
        let rates = sol.rates.as_ref();
        let mode = sol.mode();
        ResultRow {
            trial,
            algorithm: sol.kind.label().to_string(),
            mode: mode.map(|m| m.codes()),
            two_phase_fd: mode.is_some_and(|m| m.class() == ModeClass::TwoPhaseFd),
            tau: sol.tau(),
            sum_rate: rates.map_or(0.0, |r| r.sum_rate_bps()),
            min_rate: rates.map_or(0.0, |r| r.min_scaled_rate_bps()),
            ul_rates: rates.map_or_else(Vec::new, |r| r.ul_rates_bps()),
            dl_rates: rates.map_or_else(Vec::new, |r| r.dl_rates_bps()),
            iterations: sol.iterations(),
            status: sol.status,
            solve_ms: timing.then(|| sol.wall_time.as_secs_f64() * 1e3),
            sweep_value,
        }
    }

    pub fn record(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map(fmt_float).unwrap_or_default();
        vec![
            self.trial.to_string(),
            self.algorithm.clone(),
            self.mode.map(|m| m.0.to_string()).unwrap_or_default(),
            self.mode.map(|m| m.1.to_string()).unwrap_or_default(),
            opt(self.tau),
            fmt_float(self.sum_rate),
            fmt_float(self.min_rate),
            fmt_list(&self.ul_rates),
            fmt_list(&self.dl_rates),
            self.iterations.to_string(),
            self.status.label().to_string(),
            opt(self.solve_ms),
            opt(self.sweep_value),
        ]
    }
}

pub fn write_csv<W: Write>(out: W, rows: &[ResultRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Means per `(algorithm, sweep value)` group, in first-seen order.
/// Trials without a design count as zero rate.
pub fn summarize(rows: &[ResultRow]) -> Vec<Value> {
    let mut order: Vec<(String, Option<u64>)> = Vec::new();
    let mut groups: BTreeMap<(String, Option<u64>), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        let key = (r.algorithm.clone(), r.sweep_value.map(f64::to_bits));
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let mut status = BTreeMap::new();
            let mut modes = BTreeMap::new();
            for r in g {
                *status.entry(r.status.label()).or_insert(0usize) += 1;
                if let Some((a, b)) = r.mode {
                    *modes.entry(format!("({a},{b})")).or_insert(0usize) += 1;
                }
            }
            let feasible = g.iter().filter(|r| r.mode.is_some()).count();
            json!({
                "algorithm": key.0,
                "sweep_value": key.1.map(f64::from_bits),
                "trials": g.len(),
                "feasible": feasible,
                "mean_sum_rate_bpshz": mean(g.iter().map(|r| r.sum_rate)),
                "mean_min_rate_bpshz": mean(g.iter().map(|r| r.min_rate)),
                "mean_iterations": mean(g.iter().map(|r| r.iterations as f64)),
                "two_phase_fd_fraction": mean(g.iter().map(|r| r.two_phase_fd as u8 as f64)),
                "status": status,
                "modes": modes,
            })
        })
        .collect()
}
