//! Experiment runner for the `duplex` crate: run files, seeded trials and
//! the `results.csv` / `summary.json` outputs.

pub mod args;
pub mod config;
pub mod experiment;
pub mod output;
