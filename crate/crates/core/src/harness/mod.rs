//! Experiment commands. Each one resolves its config, computes, and writes
//! its artifacts plus `config.resolved.json` and `manifest.json` into the
//! output directory.

pub mod config;
pub mod verify;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::RngCore;
use serde::Serialize;
use serde_json::json;

pub use config::{
    ExperimentConfig, ExperimentKind, GridSpec, OmegaSpec, Overrides, ResolvedConfig, RunTemplate, ScalingSpec,
    SweepSpec, VerifySpec, W0Mode, DEFAULT_VERIFY_SEED,
};
pub use verify::{verify, VerifyReport};

use crate::analysis::{
    band_width, beta_bar_mc, dim_scan, eps_hat_curve, loglog_regression, omega_measured, sweep, verify_scaling,
    CellColor, ScalingVariant,
};
use crate::dynamics::{run, Outcome, RunConfig};
use crate::error::{Error, Result};
use crate::io::{
    curve_csv, dim_scan_csv, dim_scan_curves_csv, fmt_f64, json_bytes, sha256_hex, sweep_csv, trajectory_csv,
    write_bytes,
};
use crate::model::{make_instance, ProblemInstance};
use crate::par::Executor;
use crate::rng::{stream_id, stream_rng, unit_sphere};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_SADDLE: i32 = 2;
pub const EXIT_MAX_ITERS: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

/// Stream purpose for the random-sphere `w₀`.
const W0_STREAM: u32 = 1;
/// Stream purpose for scaling-check transforms.
const SCALING_STREAM: u32 = 5;

pub fn exit_code(outcome: Outcome) -> i32 {
    match outcome {
        Outcome::ConvergedMinimizer => EXIT_OK,
        Outcome::ConvergedSaddle => EXIT_SADDLE,
        Outcome::MaxItersReached => EXIT_MAX_ITERS,
        Outcome::Diverged => EXIT_DIVERGED,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: String,
    pub config: ResolvedConfig,
    pub wall_time_s: f64,
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone)]
pub struct CommandOutcome {
    pub exit_code: i32,
    pub out_dir: PathBuf,
    /// One line for the terminal.
    pub summary: String,
    pub artifacts: Vec<Artifact>,
}

struct Output {
    files: Vec<(String, Vec<u8>)>,
    exit_code: i32,
    summary: String,
}

pub fn executor(cfg: &ResolvedConfig) -> Executor {
    Executor::with_workers(cfg.workers)
}

/// Resolves `w₀` from the template; the random sphere draws from its own stream.
pub fn initial_w(p: &ProblemInstance, mode: &W0Mode, seed: u64) -> Result<Vec<f64>> {
    match mode {
        W0Mode::RandomSphere => Ok(unit_sphere(&mut stream_rng(seed, stream_id(W0_STREAM, 0)), p.dim())),
        W0Mode::HuNormalized => {
            let n = crate::spectral::norm(&p.g);
            if !(n > 0.0) {
                return Err(Error::Config("w0 = Hu/‖Hu‖ needs u ≠ 0".into()));
            }
            Ok(p.g.iter().map(|x| x / n).collect())
        }
        W0Mode::Given { w0 } => {
            if w0.len() != p.dim() {
                return Err(Error::Dimension {
                    expected: p.dim(),
                    got: w0.len(),
                });
            }
            Ok(w0.clone())
        }
    }
}

/// The template as a `RunConfig` for instance `p`.
pub fn run_config(cfg: &ResolvedConfig, p: &ProblemInstance) -> Result<RunConfig> {
    let t = &cfg.run;
    let w0 = initial_w(p, &t.w0, cfg.seed)?;
    let mut rc = RunConfig::new(p, t.eps, t.eps_a, t.a0, w0)
        .max_iters(t.k)
        .thinning(cfg.thinning());
    if let Some(g) = t.grad_tol {
        rc.grad_tol = g;
    }
    rc.q_tol = t.q_tol;
    rc.div_tol = t.div_tol;
    rc.verify = t.verify;
    rc.fault = t.fault;
    Ok(rc)
}

/// Runs the command for `cfg.kind` and writes everything under `cfg.out_dir`.
pub fn execute(cfg: &ResolvedConfig) -> Result<CommandOutcome> {
    let start = Instant::now();
    let out = match cfg.kind {
        ExperimentKind::SingleRun => cmd_run(cfg)?,
        ExperimentKind::Sweep => cmd_sweep(cfg)?,
        ExperimentKind::DimScan => cmd_dim_scan(cfg)?,
        ExperimentKind::Omega => cmd_omega(cfg)?,
        ExperimentKind::ScalingCheck => cmd_scaling(cfg)?,
        ExperimentKind::Verify => cmd_verify(cfg)?,
    };
    let mut files = out.files;
    files.push(("config.resolved.json".into(), json_bytes(cfg)?));
    let artifacts = write_all(&cfg.out_dir, &files)?;
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        command: cfg.kind.name().into(),
        config: cfg.clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
        artifacts: artifacts.clone(),
    };
    write_bytes(&cfg.out_dir.join("manifest.json"), &json_bytes(&manifest)?)?;
    Ok(CommandOutcome {
        exit_code: out.exit_code,
        out_dir: cfg.out_dir.clone(),
        summary: out.summary,
        artifacts,
    })
}

fn write_all(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<Vec<Artifact>> {
    files
        .iter()
        .map(|(name, bytes)| {
            write_bytes(&dir.join(name), bytes)?;
            Ok(Artifact {
                path: name.clone(),
                sha256: sha256_hex(bytes),
                bytes: bytes.len(),
            })
        })
        .collect()
}

fn instance(cfg: &ResolvedConfig) -> Result<ProblemInstance> {
    make_instance(&cfg.instance, cfg.seed)
}

fn spectrum_json(p: &ProblemInstance) -> serde_json::Value {
    let s = &p.spectrum;
    json!({
        "d": s.dim(),
        "lambda_min": s.lambda_min,
        "lambda_max": s.lambda_max,
        "kappa": s.kappa,
        "eps_max": s.eps_max,
        "eps_opt": s.eps_opt,
        "u_h_norm": p.u_h_norm(),
    })
}

fn cmd_run(cfg: &ResolvedConfig) -> Result<Output> {
    let p = instance(cfg)?;
    let rc = run_config(cfg, &p)?;
    let t = run(&p, &rc, cfg.run.mode)?;
    let mut code = exit_code(t.outcome);
    let checks_ok = t.checks.as_ref().is_none_or(|c| c.passed());
    if !checks_ok {
        code = EXIT_FAILURE;
    }
    let summary = json!({
        "seed": cfg.seed,
        "instance": cfg.instance,
        "spectrum": spectrum_json(&p),
        "recorded_rows": t.steps.len(),
        "checks_passed": checks_ok,
        "trajectory": t,
    });
    Ok(Output {
        files: vec![
            ("trajectory.csv".into(), trajectory_csv(&t.steps)?),
            ("summary.json".into(), json_bytes(&summary)?),
        ],
        exit_code: code,
        summary: format!(
            "{:?} after {} iterations, final loss {}",
            t.outcome,
            t.iterations,
            fmt_f64(t.final_step.loss)
        ),
    })
}

fn cmd_sweep(cfg: &ResolvedConfig) -> Result<Output> {
    let spec = cfg.sweep.clone().unwrap_or_default();
    let p = instance(cfg)?;
    let w0 = initial_w(&p, &cfg.run.w0, cfg.seed)?;
    let g = sweep(
        &p,
        &spec.eps_a.values(),
        &spec.eps.values(),
        &w0,
        cfg.run.a0,
        cfg.run.k,
        &executor(cfg),
    )?;
    let band = g.band_extent();
    let counts: serde_json::Map<String, serde_json::Value> = [
        CellColor::NearOptAndBetter,
        CellColor::NearOptOnly,
        CellColor::BetterOnly,
        CellColor::Neither,
    ]
    .iter()
    .map(|c| (c.name().to_string(), json!(g.count(*c))))
    .collect();
    let report = json!({
        "seed": cfg.seed,
        "spectrum": spectrum_json(&p),
        "k": g.k,
        "a0": cfg.run.a0,
        "eps_opt": g.eps_opt,
        "baseline_loss": g.baseline_loss,
        "rows": g.eps_values.len(),
        "cols": g.eps_a_values.len(),
        "counts": counts,
        "band": band,
    });
    Ok(Output {
        files: vec![
            ("sweep.csv".into(), sweep_csv(&g)?),
            ("sweep.json".into(), json_bytes(&report)?),
        ],
        exit_code: EXIT_OK,
        summary: format!(
            "{} cells, band {}",
            g.cells.len(),
            band.map_or("empty".to_string(), |b| format!("{} cells over {:.2} decades", b.cells, b.decades))
        ),
    })
}

fn cmd_dim_scan(cfg: &ResolvedConfig) -> Result<Output> {
    let spec = cfg.dim_scan.clone().unwrap_or_default();
    let rows = dim_scan(&spec, cfg.seed, &executor(cfg))?;
    let d: Vec<f64> = rows.iter().map(|r| r.d as f64).collect();
    let pred: Vec<f64> = rows.iter().map(|r| r.omega_pred).collect();
    let meas: Vec<f64> = rows.iter().map(|r| r.omega_measured).collect();
    let monotone = meas.windows(2).all(|w| w[1] > w[0]);
    let report = json!({
        "seed": cfg.seed,
        "rows": rows,
        "slope_pred": loglog_regression(&d, &pred),
        "slope_measured": loglog_regression(&d, &meas),
        "measured_increasing": monotone,
    });
    Ok(Output {
        files: vec![
            ("dim_scan.csv".into(), dim_scan_csv(&rows)?),
            ("dim_scan_curves.csv".into(), dim_scan_curves_csv(&rows)?),
            ("dim_scan.json".into(), json_bytes(&report)?),
        ],
        exit_code: EXIT_OK,
        summary: format!("{} dimensions, measured Ω increasing: {monotone}", rows.len()),
    })
}

fn cmd_omega(cfg: &ResolvedConfig) -> Result<Output> {
    let spec = cfg.omega.clone().unwrap_or_default();
    let p = instance(cfg)?;
    let exec = executor(cfg);
    let mut est = beta_bar_mc(&p.spectrum, spec.n_samples, cfg.seed, &exec)?;
    if !spec.include_samples {
        est = est.without_samples();
    }
    let mut files = Vec::new();
    let mut band = None;
    if let Some(grid) = &spec.curve_eps {
        let rc = run_config(cfg, &p)?;
        let curve = eps_hat_curve(&p, &grid.values(), &rc, cfg.run.k, &exec)?;
        est.omega_measured = Some(omega_measured(&curve, &p.spectrum)?);
        band = Some(band_width(&curve, &p.spectrum)?);
        files.push(("omega_curve.csv".into(), curve_csv(&curve)?));
    }
    let summary = format!("Ω = {} (lower bound {})", fmt_f64(est.omega), fmt_f64(est.lower_bound_generic));
    let report = json!({
        "seed": cfg.seed,
        "spectrum": spectrum_json(&p),
        "estimate": est,
        "band": band,
    });
    files.push(("omega.json".into(), json_bytes(&report)?));
    Ok(Output {
        files,
        exit_code: EXIT_OK,
        summary,
    })
}

/// Case `i` uses the configured instance with seed `(seed, i)` mixed in, the
/// run template, and a random transform.
fn cmd_scaling(cfg: &ResolvedConfig) -> Result<Output> {
    let spec = cfg.scaling.clone().unwrap_or_default();
    let exec = executor(cfg);
    let results = exec.map(spec.cases, |i| -> Result<(f64, f64)> {
        let case_seed = stream_rng(cfg.seed, stream_id(SCALING_STREAM, i as u64)).next_u64();
        let p = make_instance(&cfg.instance, case_seed)?;
        let mut rc = run_config(cfg, &p)?;
        if cfg.run.w0 == W0Mode::RandomSphere {
            rc.w0 = unit_sphere(&mut stream_rng(case_seed, stream_id(W0_STREAM, 0)), p.dim());
        }
        let t = verify::random_transform(&mut stream_rng(case_seed, stream_id(SCALING_STREAM, 0)), p.dim());
        Ok((
            verify_scaling(&p, &rc, &t, ScalingVariant::Conjugate, spec.steps)?,
            verify_scaling(&p, &rc, &t, ScalingVariant::RescaleW, spec.steps)?,
        ))
    });
    let mut rows = Vec::with_capacity(spec.cases);
    for r in results {
        rows.push(r?);
    }
    let worst = |f: fn(&(f64, f64)) -> f64| rows.iter().map(f).fold(0.0f64, |m, v| if v > m || v.is_nan() { v } else { m });
    let (wc, wr) = (worst(|r| r.0), worst(|r| r.1));
    let passed = wc <= spec.tolerance && wr <= spec.tolerance;
    let mut csv = String::from("case,conjugate,rescale_w\n");
    for (i, (c, r)) in rows.iter().enumerate() {
        csv.push_str(&format!("{i},{},{}\n", fmt_f64(*c), fmt_f64(*r)));
    }
    let report = json!({
        "seed": cfg.seed,
        "cases": spec.cases,
        "steps": spec.steps,
        "tolerance": spec.tolerance,
        "max_deviation_conjugate": wc,
        "max_deviation_rescale_w": wr,
        "passed": passed,
    });
    Ok(Output {
        files: vec![
            ("scaling.csv".into(), csv.into_bytes()),
            ("scaling.json".into(), json_bytes(&report)?),
        ],
        exit_code: if passed { EXIT_OK } else { EXIT_FAILURE },
        summary: format!("max deviation conjugate {wc:e}, rescale {wr:e}"),
    })
}

fn cmd_verify(cfg: &ResolvedConfig) -> Result<Output> {
    let spec = cfg.verify.clone().unwrap_or_default();
    let report = verify(&spec, cfg.seed, &executor(cfg))?;
    let failed: Vec<&str> = report
        .suites
        .iter()
        .filter(|(_, t)| !t.passed())
        .map(|(n, _)| n.as_str())
        .collect();
    let summary = if failed.is_empty() {
        format!("{} suites passed", report.suites.len())
    } else {
        format!("failed: {}", failed.join(", "))
    };
    Ok(Output {
        files: vec![("verify.json".into(), json_bytes(&report)?)],
        exit_code: if report.passed { EXIT_OK } else { EXIT_FAILURE },
        summary,
    })
}
