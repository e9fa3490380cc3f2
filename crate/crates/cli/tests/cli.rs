//! End-to-end runs of the `duplex-exp` binary on a one-pair cell.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const TINY: &str = "\
# one antenna per half, one user each way
half_array_size = 1
num_ul = 1
num_dl = 1
rho2_db = -50
trials = 2
seed = 3
";

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.conf");
    fs::write(&p, text).unwrap();
    p
}

fn exp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_duplex-exp"))
        .arg("run")
        .args(args)
        .output()
        .expect("binary runs")
}

fn rows(dir: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(dir.join("results.csv")).unwrap();
    r.records().map(Result::unwrap).collect()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn single_run_writes_a_row_per_trial() {
    let tmp = TempDir::new().unwrap();
    let conf = write_config(tmp.path(), TINY);
    let out = tmp.path().join("out");
    let o = exp(&["--config", conf.to_str().unwrap(), "--experiment", "single", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let header = csv::Reader::from_path(out.join("results.csv")).unwrap().headers().unwrap().clone();
    assert_eq!(header.iter().collect::<Vec<_>>(), duplex_cli::output::COLUMNS);
    let rows = rows(&out);
    assert_eq!(rows.len(), 2);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[0], i.to_string());
        assert_eq!(&r[1], "sr");
        // timing is off by default
        assert_eq!(&r[11], "");
    }
    let s = summary(&out);
    assert_eq!(s["trials"], 2);
    assert_eq!(s["seed"], 3);
    assert_eq!(s["groups"][0]["trials"], 2);
}

#[test]
fn sweep_rows_cover_every_algorithm_point_and_trial() {
    let tmp = TempDir::new().unwrap();
    let conf = write_config(tmp.path(), TINY);
    let out = tmp.path().join("out");
    let o = exp(&[
        "--config",
        conf.to_str().unwrap(),
        "--experiment",
        "sweep-rho2",
        "--algo",
        "all",
        "--rho2-db",
        "-70,-10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = rows(&out);
    assert_eq!(rows.len(), 2 * 2 * 4);
    for alg in ["sr", "maxmin", "robust-sr", "hd"] {
        for sweep in ["-7.00000000e1", "-1.00000000e1"] {
            let n = rows.iter().filter(|r| &r[1] == alg && &r[12] == sweep).count();
            assert_eq!(n, 2, "{alg} at {sweep}");
        }
    }
    assert_eq!(summary(&out)["groups"].as_array().unwrap().len(), 8);
}

#[test]
fn convergence_runs_leave_traces() {
    let tmp = TempDir::new().unwrap();
    let conf = write_config(tmp.path(), TINY);
    let out = tmp.path().join("out");
    let o = exp(&[
        "--config",
        conf.to_str().unwrap(),
        "--experiment",
        "convergence",
        "--trials",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(out.join("trace_0.csv")).unwrap();
    let trace: Vec<_> = r.records().map(Result::unwrap).collect();
    assert!(!trace.is_empty());
    let winner = &rows(&out)[0];
    let iters: usize = winner[9].parse().unwrap();
    let in_winner = trace
        .iter()
        .filter(|t| t[2] == winner[2] && t[3] == winner[3] && &t[4] == "sca")
        .count();
    assert!(in_winner >= iters, "{in_winner} traced steps, {iters} iterations");
}

#[test]
fn flags_override_the_run_file() {
    let tmp = TempDir::new().unwrap();
    let conf = write_config(tmp.path(), TINY);
    let out = tmp.path().join("out");
    let o = exp(&[
        "--config",
        conf.to_str().unwrap(),
        "--experiment",
        "single",
        "--trials",
        "1",
        "--seed",
        "11",
        "--rho2-db",
        "-20",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(rows(&out).len(), 1);
    let s = summary(&out);
    assert_eq!(s["seed"], 11);
    let config = s["config"].as_object().unwrap();
    let rho2: f64 = config["rho2_db"].as_str().unwrap().parse().unwrap();
    assert!((rho2 + 20.0).abs() < 1e-9, "{rho2}");
}

#[test]
fn unknown_keys_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let conf = write_config(tmp.path(), &format!("{TINY}antenna_count = 4\n"));
    let out = tmp.path().join("out");
    let o = exp(&["--config", conf.to_str().unwrap(), "--experiment", "single", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("antenna_count"));
    assert!(!out.join("results.csv").exists());
}

#[test]
fn worker_count_does_not_change_the_results() {
    let tmp = TempDir::new().unwrap();
    let conf = write_config(tmp.path(), TINY);
    let run = |workers: &str| {
        let out = tmp.path().join(format!("w{workers}"));
        let o = exp(&[
            "--config",
            conf.to_str().unwrap(),
            "--experiment",
            "single",
            "--algo",
            "all",
            "--trials",
            "3",
            "--workers",
            workers,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        fs::read(out.join("results.csv")).unwrap()
    };
    assert_eq!(run("1"), run("3"));
}
