use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bnlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bnlab")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap()
}

fn json(dir: &Path, name: &str) -> Value {
    serde_json::from_slice(&read(dir, name)).unwrap()
}

const SMALL_RUN: &str = r#"{
  "instance": {"spectrum": {"kind": "logspace", "lambda_min": 1.0, "lambda_max": 100.0, "d": 20}},
  "run": {"eps": 0.3, "k": 1500}
}"#;

#[test]
fn run_is_byte_identical_across_reruns_and_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.json", SMALL_RUN);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let o1 = bnlab(&["run", "--config", &cfg, "--seed", "7", "--out", a.to_str().unwrap()]);
    let o2 = bnlab(&["run", "--config", &cfg, "--seed", "7", "--out", b.to_str().unwrap(), "--workers", "8"]);
    assert_eq!(o1.status.code(), o2.status.code());
    // the echoed config differs in out_dir and workers only
    for f in ["trajectory.csv", "summary.json"] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
    // thinning: dense to 1000, then every 10th, final row always kept
    let csv = String::from_utf8(read(&a, "trajectory.csv")).unwrap();
    let ks: Vec<usize> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    let iters = json(&a, "summary.json")["trajectory"]["iterations"].as_u64().unwrap() as usize;
    assert_eq!(*ks.last().unwrap(), iters);
    assert!(ks.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn manifest_lists_checksums_of_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.json", SMALL_RUN);
    let out = tmp.path().join("o");
    bnlab(&["run", "--config", &cfg, "--seed", "3", "--out", out.to_str().unwrap()]);
    let m = json(&out, "manifest.json");
    assert_eq!(m["schema_version"], 1);
    assert_eq!(m["command"], "run");
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
    let arts = m["artifacts"].as_array().unwrap();
    let names: Vec<&str> = arts.iter().map(|a| a["path"].as_str().unwrap()).collect();
    assert_eq!(names, ["trajectory.csv", "summary.json", "config.resolved.json"]);
    for a in arts {
        let bytes = read(&out, a["path"].as_str().unwrap());
        assert_eq!(a["bytes"].as_u64().unwrap() as usize, bytes.len());
        assert_eq!(a["sha256"].as_str().unwrap(), bnlab::io::sha256_hex(&bytes));
    }
}

#[test]
fn echoed_config_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.json", SMALL_RUN);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    bnlab(&["run", "--config", &cfg, "--seed", "11", "--thin", "3", "--out", a.to_str().unwrap()]);
    let echo = a.join("config.resolved.json");
    let o = bnlab(&["run", "--config", echo.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(o.status.code().is_some());
    assert_eq!(read(&a, "trajectory.csv"), read(&b, "trajectory.csv"));
    assert_eq!(read(&a, "summary.json"), read(&b, "summary.json"));
    let ra = json(&a, "config.resolved.json");
    let rb = json(&b, "config.resolved.json");
    assert_eq!(ra["thin"], 3);
    assert_eq!(ra["seed"], rb["seed"]);
    assert_eq!(ra["run"], rb["run"]);
}

#[test]
fn gd_in_one_dimension_converges_in_one_step() {
    let tmp = tempfile::tempdir().unwrap();
    // ε_opt = 2/(λ_min + λ_max) = 1/4
    let cfg = write_config(
        tmp.path(),
        "d1.json",
        r#"{
          "kind": "single_run",
          "seed": 1,
          "instance": {"spectrum": {"kind": "explicit", "eigenvalues": [4.0]}, "u_mode": {"kind": "given", "u": [1.5]}},
          "run": {"mode": "gd", "eps": 0.25, "w0": {"kind": "given", "w0": [0.0]}, "k": 10}
        }"#,
    );
    let out = tmp.path().join("o");
    let o = bnlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&out, "summary.json");
    assert_eq!(s["trajectory"]["outcome"], "converged_minimizer");
    assert_eq!(s["trajectory"]["iterations"], 1);
    assert_eq!(s["trajectory"]["final_w"][0], 1.5);
}

#[test]
fn exit_codes_follow_the_outcome() {
    let tmp = tempfile::tempdir().unwrap();
    // GD above ε_max diverges
    let cfg = write_config(
        tmp.path(),
        "div.json",
        r#"{
          "instance": {"spectrum": {"kind": "linspace", "lambda_min": 1.0, "lambda_max": 10.0, "d": 5}},
          "run": {"mode": "gd", "eps": 0.5, "k": 5000}
        }"#,
    );
    let o = bnlab(&["run", "--config", &cfg, "--seed", "1", "--out", tmp.path().join("d").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    // too few steps
    let o = bnlab(&[
        "run",
        "--config",
        &write_config(
            tmp.path(),
            "short.json",
            r#"{"instance": {"spectrum": {"kind": "linspace", "lambda_min": 1.0, "lambda_max": 10.0, "d": 5}}, "run": {"k": 3}}"#,
        ),
        "--seed",
        "1",
        "--out",
        tmp.path().join("s").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn config_errors_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bnlab(&["run", "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--seed"));
    let bad = write_config(tmp.path(), "bad.json", r#"{"run": {"epsilon": 1.0}}"#);
    let o = bnlab(&["run", "--config", &bad, "--seed", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("epsilon"));
    let o = bnlab(&["run", "--config", tmp.path().join("missing.json").to_str().unwrap(), "--seed", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_is_independent_of_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sweep.json",
        r#"{
          "instance": {"spectrum": {"kind": "logspace", "lambda_min": 1.0, "lambda_max": 100.0, "d": 30}},
          "run": {"k": 300, "w0": {"kind": "hu_normalized"}},
          "sweep": {
            "eps_a": {"kind": "logspace", "lo": -4.0, "hi": 0.0, "n": 5, "scale": 1.99},
            "eps": {"kind": "logspace", "lo": -3.0, "hi": 6.0, "n": 7}
          }
        }"#,
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    bnlab(&["sweep", "--config", &cfg, "--seed", "5", "--workers", "1", "--out", a.to_str().unwrap()]);
    let o = bnlab(&["sweep", "--config", &cfg, "--seed", "5", "--workers", "8", "--out", b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read(&a, "sweep.csv"), read(&b, "sweep.csv"));
    assert_eq!(read(&a, "sweep.json"), read(&b, "sweep.json"));
    let csv = String::from_utf8(read(&a, "sweep.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "eps_a,eps,final_loss,eps_hat,color,status");
    assert_eq!(csv.lines().count(), 1 + 35);
}

#[test]
fn single_cell_sweep_matches_a_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "one.json",
        r#"{
          "instance": {"spectrum": {"kind": "logspace", "lambda_min": 1.0, "lambda_max": 100.0, "d": 10}},
          "run": {"k": 400, "eps": 0.02, "eps_a": 0.7, "grad_tol": 1e-300},
          "sweep": {"eps_a": {"kind": "values", "values": [0.7]}, "eps": {"kind": "values", "values": [0.02]}}
        }"#,
    );
    let s = tmp.path().join("s");
    let r = tmp.path().join("r");
    bnlab(&["sweep", "--config", &cfg, "--seed", "2", "--out", s.to_str().unwrap()]);
    bnlab(&["run", "--config", &cfg, "--seed", "2", "--out", r.to_str().unwrap()]);
    let csv = String::from_utf8(read(&s, "sweep.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let traj = String::from_utf8(read(&r, "trajectory.csv")).unwrap();
    let last: Vec<&str> = traj.lines().last().unwrap().split(',').collect();
    assert_eq!(row[2], last[10]);
    assert_eq!(row[3], last[5]);
}

#[test]
fn verify_filters_and_faults() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bnlab(&["verify", "--checks", "", "--out", tmp.path().join("e").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&tmp.path().join("e"), "verify.json");
    assert_eq!(r["passed"], true);
    assert!(r["suites"].as_object().unwrap().is_empty());

    let cfg = write_config(
        tmp.path(),
        "v.json",
        r#"{"verify": {"trajectories": 5, "steps": 100, "max_dim": 10}}"#,
    );
    let checks = "residual_identity,residual_contraction,norm_growth";
    let ok = bnlab(&["verify", "--config", &cfg, "--checks", checks, "--out", tmp.path().join("ok").to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0));
    let bad = bnlab(&[
        "verify",
        "--config",
        &cfg,
        "--checks",
        checks,
        "--inject-fault",
        "--out",
        tmp.path().join("bad").to_str().unwrap(),
    ]);
    assert_eq!(bad.status.code(), Some(1));
    let r = json(&tmp.path().join("bad"), "verify.json");
    assert_eq!(r["fault"], "flip-w-step");
    assert!(r["suites"]["residual_contraction"]["violations"].as_u64().unwrap() > 0);

    let unknown = bnlab(&["verify", "--checks", "bogus", "--out", tmp.path().join("u").to_str().unwrap()]);
    assert_eq!(unknown.status.code(), Some(1));
}

#[test]
fn omega_scaling_and_dim_scan_smoke() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "omega.json",
        r#"{
          "instance": {"spectrum": {"kind": "linspace", "lambda_min": 1.0, "lambda_max": 100.0, "d": 10}},
          "run": {"a0": 0.0, "k": 500},
          "omega": {"n_samples": 50, "curve_eps": {"kind": "logspace", "lo": -5.0, "hi": 5.0, "n": 21}}
        }"#,
    );
    let o = bnlab(&["omega", "--config", &cfg, "--seed", "4", "--out", tmp.path().join("om").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&tmp.path().join("om"), "omega.json");
    assert!(r["estimate"]["omega"].as_f64().unwrap() >= r["estimate"]["lower_bound_generic"].as_f64().unwrap());
    assert!(r["estimate"]["omega_measured"].as_f64().unwrap() > 1.0);

    let cfg = write_config(
        tmp.path(),
        "scaling.json",
        r#"{
          "instance": {"spectrum": {"kind": "logspace", "lambda_min": 1.0, "lambda_max": 1000.0, "d": 8}, "rotate": true},
          "run": {"eps": 0.01, "eps_a": 0.6},
          "scaling": {"cases": 10, "steps": 30}
        }"#,
    );
    let sc = tmp.path().join("sc");
    let o = bnlab(&["scaling-check", "--config", &cfg, "--seed", "4", "--out", sc.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(String::from_utf8(read(&sc, "scaling.csv")).unwrap().lines().count(), 11);

    let cfg = write_config(
        tmp.path(),
        "dim.json",
        r#"{"dim_scan": {"dims": [6, 12], "n_runs": 2, "k": 300, "beta_samples": 40,
            "eps_grid": [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1e3, 1e4, 1e5]}}"#,
    );
    let ds = tmp.path().join("ds");
    let o = bnlab(&["dim-scan", "--config", &cfg, "--seed", "4", "--out", ds.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8(read(&ds, "dim_scan.csv")).unwrap().lines().count(), 3);
    assert_eq!(String::from_utf8(read(&ds, "dim_scan_curves.csv")).unwrap().lines().count(), 21);
}

#[test]
fn kind_in_file_must_match_command() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "k.json", r#"{"kind": "sweep", "seed": 1}"#);
    let o = bnlab(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn shipped_configs_resolve() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = bnlab::harness::ExperimentConfig::load(&path).unwrap();
        let kind = cfg.kind.expect("shipped configs name their kind");
        cfg.resolve(kind, &Default::default()).unwrap();
        n += 1;
    }
    assert!(n >= 6);
}
