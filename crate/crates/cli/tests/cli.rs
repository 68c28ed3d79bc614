use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dilab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dilab")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p
}

fn sample(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn identical_pair_reports_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "same.json",
        r#"{"scenario": {"type": "pair", "grid": {"lo": 0, "hi": 1, "n": 5},
             "phi": {"type": "linear", "slope": 1}, "z": [1, 2, 3, 4, 5], "z_tilde": [1, 2, 3, 4, 5]},
            "ell": 0.5, "holder": {"p": 2, "K": 10}}"#,
    );
    let out = dir.path().join("out");
    let o = dilab(&["bounds", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("bounds.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        rows += 1;
        if &rec[2] == "true" {
            assert_eq!(rec[1].parse::<f64>().unwrap(), 0.0, "{}", &rec[0]);
        }
        assert_eq!(rec[5].parse::<f64>().unwrap(), 0.0);
        assert_eq!(rec[6].parse::<f64>().unwrap(), 0.0);
    }
    assert_eq!(rows, 12);
    assert!(csv.contains("\r\n"));
}

#[test]
fn worked_example_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = dilab(&["bounds", &sample("two_node.json"), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
    let value = |name: &str| -> f64 {
        let line = csv.lines().find(|l| l.starts_with(&format!("{name},"))).unwrap();
        line.split(',').nth(1).unwrap().parse().unwrap()
    };
    assert!((value("tv_basic") - 0.5).abs() < 1e-12);
    assert!((value("w1_two_term") - 1.0 / 3.0).abs() < 1e-12);
    assert!((value("tv_rescaled_l2") - 0.632_455_532_033_675_9).abs() < 1e-12);
}

#[test]
fn invalid_holder_constant_is_not_a_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "badk.json",
        r#"{"scenario": {"type": "pair", "grid": {"nodes": [0, 1]}, "z": [1, 1], "z_tilde": [1, 2]},
            "bounds": ["tv_holder", "w1_holder"], "holder": {"p": "inf", "K": 0.01}}"#,
    );
    let o = dilab(&["bounds", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
    let holder = csv.lines().find(|l| l.starts_with("tv_holder,")).unwrap();
    assert!(holder.starts_with("tv_holder,,false,\"K = 0.01 below"), "{holder}");
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(code(&dilab(&["bounds", missing.to_str().unwrap()])), 2);
    let bad = write_config(dir.path(), "bad.json", "{ not json");
    assert_eq!(code(&dilab(&["converge", bad.to_str().unwrap()])), 2);
    // a pair scenario cannot drive a convergence study
    assert_eq!(code(&dilab(&["converge", &sample("two_node.json"), "--out", dir.path().to_str().unwrap()])), 2);
    let unsorted = write_config(
        dir.path(),
        "unsorted.json",
        r#"{"scenario": {"type": "simple-mc", "family": {"kind": "uniform-tilt"},
             "grid": {"lo": 0.5, "hi": 3, "n": 5}}, "n_list": [8, 4], "seed": 1}"#,
    );
    let o = dilab(&["converge", unsorted.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("strictly increasing"));
    assert_eq!(code(&dilab(&["oracle", "--jobs", "0"])), 2);
}

#[test]
fn budget_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "big.json",
        r#"{"scenario": {"type": "gibbs-mis", "model": {"kind": "ising", "rows": 5, "cols": 5},
             "grid": {"lo": 0.1, "hi": 1, "n": 5}, "observed": 0, "anchors": [0.5], "weights": [1]},
            "n_list": [1], "seed": 1}"#,
    );
    let o = dilab(&["converge", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.json",
        r#"{"scenario": {"type": "simple-mc", "family": {"kind": "uniform-tilt"},
             "grid": {"lo": 0.5, "hi": 3, "n": 5}}, "n_list": [2, 4], "replicates": 20, "seed": 1}"#,
    );
    let run = |extra: &[&str], sub: &str| {
        let out = dir.path().join(sub);
        let mut args = vec!["converge", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        assert_eq!(code(&dilab(&args)), 0);
        std::fs::read(out.join("convergence.csv")).unwrap()
    };
    let base = run(&[], "a");
    assert_eq!(base, run(&["--seed", "1"], "b"));
    assert_ne!(base, run(&["--seed", "2"], "c"));
    assert_eq!(base, run(&["--jobs", "3"], "d"));
}

#[test]
fn oracle_subcommand_passes() {
    let o = dilab(&["oracle"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.lines().count() >= 8);
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
}
