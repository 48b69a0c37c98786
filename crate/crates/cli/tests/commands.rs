//! End-to-end runs of the `telegraph` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use telegraph::ensemble::{evolve_average, Backend};
use telegraph::noise::{rtn_model, RtnSpec};
use telegraph::operators::{c, matrix_trace_distance, ComplexMatrix, DensityOperator};
use telegraph::pulse::pi_pulse;
use telegraph_cli::output::read_csv;

fn telegraph(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_telegraph")).args(args).current_dir(dir).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("cfg.json");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn final_state(path: &Path) -> ComplexMatrix {
    let (cols, rows) = read_csv(path).unwrap();
    assert_eq!(cols[0], "t");
    let last = rows.last().unwrap();
    let v: Vec<f64> = last[1..9].iter().map(|s| s.parse().unwrap()).collect();
    ComplexMatrix::from_row_slice(2, 2, &[c(v[0], v[1]), c(v[2], v[3]), c(v[4], v[5]), c(v[6], v[7])])
}

#[test]
fn evolve_final_row_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let out = telegraph(&["evolve", "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let got = final_state(&dir.path().join("o/evolve.csv"));

    let spec = RtnSpec::new(0.125, 5.0).unwrap();
    let p = pi_pulse(1.0).unwrap();
    let want =
        evolve_average(&DensityOperator::basis(2, 0), &rtn_model(&spec, &p), p.duration(), Backend::Exact).unwrap();
    assert!((got - want.matrix()).norm() < 1e-14);
}

#[test]
fn solvers_agree_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"noise": {"delta": 0.25, "tau_c": 2.0}, "pulse": "corpse", "initial_state": [0.6, 0.0, 0.8]}"#,
    );
    let mut finals = Vec::new();
    for s in ["ensemble", "born", "defect"] {
        let out = telegraph(&["evolve", "--config", &cfg, "--solver", s, "--out", s], dir.path());
        assert!(out.status.success(), "{s}: {}", String::from_utf8_lossy(&out.stderr));
        finals.push(final_state(&dir.path().join(s).join("evolve.csv")));
    }
    for f in &finals[1..] {
        assert!(matrix_trace_distance(&finals[0], f).unwrap() < 1e-7);
    }
}

#[test]
fn mc_evolve_lies_near_the_average() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"mc": {"n_traj": 20000}, "evolve": {"samples": 4}}"#);
    let out = telegraph(&["evolve", "--config", &cfg, "--solver", "mc", "--seed", "11", "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (cols, rows) = read_csv(&dir.path().join("o/evolve.csv")).unwrap();
    assert_eq!(cols.last().unwrap(), "std_error");
    assert_eq!(rows.len(), 5);
    let err: f64 = rows.last().unwrap()[9].parse().unwrap();
    let got = final_state(&dir.path().join("o/evolve.csv"));
    let spec = RtnSpec::new(0.125, 5.0).unwrap();
    let p = pi_pulse(1.0).unwrap();
    let want =
        evolve_average(&DensityOperator::basis(2, 0), &rtn_model(&spec, &p), p.duration(), Backend::Exact).unwrap();
    let dev = (got - want.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(err > 0.0 && dev < 5.0 * err, "dev {dev:e} err {err:e}");
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"noise": {"delta": 0.1, "tua_c": 3}}"#);
    let out = telegraph(&["evolve", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("tua_c"), "{err}");

    let cfg = write_config(dir.path(), r#"{"check": {"threshold": "small"}}"#);
    let out = telegraph(&["check", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("check.threshold"));

    let cfg = write_config(dir.path(), r#"{"noise": {"delta": 0.1, "tau_c": -1}}"#);
    assert_eq!(telegraph(&["evolve", "--config", &cfg], dir.path()).status.code(), Some(2));
}

#[test]
fn stochastic_commands_need_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["evolve", "--solver", "mc"][..], &["mc-validate"][..]] {
        let out = telegraph(args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    }
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"solver": "born", "seed": 1, "evolve": {"samples": 2}}"#);
    let out = telegraph(&["evolve", "--config", &cfg, "--solver", "defect", "--seed", "9", "--out", "o"], dir.path());
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("o/evolve.csv")).unwrap();
    let header = text.lines().nth(1).unwrap();
    assert!(header.starts_with("# config: {"));
    assert!(header.contains(r#""solver":"defect""#) && header.contains(r#""seed":9"#), "{header}");
    assert!(text.lines().next().unwrap().starts_with("# telegraph "));
}

#[test]
fn check_passes_and_fails_on_mismatched_rates() {
    let dir = tempfile::tempdir().unwrap();
    let out = telegraph(&["check", "--out", "ok"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("ok/check_report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    let pairs = report["pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 3);
    for p in pairs {
        assert!(p["max_distance"].as_f64().unwrap() <= 1e-7);
        for key in ["worst_delta", "worst_tau_c", "worst_pulse"] {
            assert!(p.get(key).is_some(), "{key}");
        }
    }

    let cfg = write_config(dir.path(), r#"{"check": {"defect_rates": [0.6, 0.2]}}"#);
    let out = telegraph(&["check", "--config", &cfg, "--out", "bad"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("defect") && err.contains("tau_c="), "{err}");
}

#[test]
fn reruns_are_byte_identical_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"mc": {"n_traj": 3000}, "evolve": {"samples": 6}, "fig1": {"n_tau": 3, "tau_max": 10}, "mc_validate": {"deltas": [0.125], "taus": [5.0], "pulses": ["pi"], "n_traj": 2000, "max_std_error": 0.1}}"#,
    );
    for cmd in ["evolve", "fig1", "fig2", "mc-validate"] {
        let mut outputs = Vec::new();
        for (k, jobs) in ["1", "3", "3"].iter().enumerate() {
            let o = format!("{cmd}_{k}");
            let out = telegraph(
                &[cmd, "--config", &cfg, "--solver", "mc", "--seed", "5", "--jobs", jobs, "--out", &o],
                dir.path(),
            );
            assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
            let mut files: Vec<_> = fs::read_dir(dir.path().join(&o)).unwrap().map(|e| e.unwrap().path()).collect();
            files.sort();
            outputs.push(files.iter().map(|f| fs::read(f).unwrap()).collect::<Vec<_>>());
        }
        assert!(!outputs[0].is_empty());
        assert_eq!(outputs[0], outputs[1], "{cmd}");
        assert_eq!(outputs[1], outputs[2], "{cmd}");
    }
}

#[test]
fn fig2_pulses_respect_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = telegraph(&["fig2", "--out", "o"], dir.path());
    assert!(out.status.success());
    for tau in ["5", "20", "50"] {
        let (cols, rows) = read_csv(&dir.path().join(format!("o/fig2_tau_{tau}.csv"))).unwrap();
        assert_eq!(cols, ["t_start", "duration", "amplitude"]);
        assert!(rows.len() >= 60);
        for r in rows {
            assert!(r[2].parse::<f64>().unwrap().abs() <= 1.0 + 1e-12);
        }
    }
}

#[test]
fn optimize_writes_pulse_and_history() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"optimize": {"tau_c": 2.0, "n_segments": 32, "multistart": false}}"#);
    let out = telegraph(&["optimize", "--config", &cfg, "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/optimize.json")).unwrap()).unwrap();
    assert_eq!(v["pulse"]["amplitudes"].as_array().unwrap().len(), 32);
    let hist: Vec<f64> = v["history"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(hist.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(*hist.last().unwrap(), v["fidelity"].as_f64().unwrap());
    assert_eq!(v["config"]["optimize"]["tau_c"], 2.0);
    assert!(dir.path().join("o/optimize_pulse.csv").exists());
}

#[test]
fn mc_validate_reports_failures_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let small = r#"{"mc_validate": {"deltas": [0.25], "taus": [2.0], "pulses": ["corpse"], "n_traj": 4000, "max_std_error": 0.05}}"#;
    let cfg = write_config(dir.path(), small);
    let out = telegraph(&["mc-validate", "--config", &cfg, "--seed", "2", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (cols, rows) = read_csv(&dir.path().join("o/mc_validate.csv")).unwrap();
    assert_eq!(&cols[..4], ["tau_c", "pulse_name", "delta", "fidelity"]);
    assert_eq!(rows.len(), 1);

    // a standard-error cap the sample size cannot meet
    let cfg = write_config(dir.path(), &small.replace("0.05", "1e-6"));
    let out = telegraph(&["mc-validate", "--config", &cfg, "--seed", "2", "--out", "o2"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}
