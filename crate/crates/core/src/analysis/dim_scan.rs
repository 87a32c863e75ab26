//! Ω against dimension for `H = diag(linspace(λ_min, λ_max, d))`.

use serde::{Deserialize, Serialize};

use super::curve::CurvePoint;
use super::omega::{band_width, beta_bar_mc, omega_measured, OmegaEstimate};
use crate::dynamics::Stepper;
use crate::error::{domain, Result};
use crate::model::ProblemInstance;
use crate::par::Executor;
use crate::rng::{stream_id, stream_rng, unit_sphere};
use crate::spectral::{SpectralSummary, SymMatrix};

/// Stream purpose for the per-run `(u, w₀)` draws.
const RUN_STREAM: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimScanConfig {
    pub dims: Vec<usize>,
    pub n_runs: usize,
    pub eps_grid: Vec<f64>,
    pub k: usize,
    pub eps_a: f64,
    pub a0: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub beta_samples: usize,
}

impl Default for DimScanConfig {
    fn default() -> Self {
        Self {
            dims: vec![25, 50, 100, 200, 400],
            n_runs: 50,
            eps_grid: crate::logspace(-6.0, 6.0, 25),
            k: 5000,
            eps_a: 1.0,
            a0: 0.0,
            lambda_min: 1.0,
            lambda_max: 10000.0,
            beta_samples: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimScanRow {
    pub d: usize,
    pub n_runs: usize,
    /// Geometric mean over runs of the final ε̂.
    pub curve: Vec<CurvePoint>,
    /// Width of the near-optimal band on the curve.
    pub omega_band: f64,
    pub band_empty: bool,
    /// Asymptote-based magnitude of the insensitivity interval.
    pub omega_measured: f64,
    pub omega_pred: f64,
    pub estimate: OmegaEstimate,
}

/// Final ε̂ after `k` BNGD steps; NaN if the state stops being finite.
pub fn final_eps_hat(p: &ProblemInstance, eps: f64, eps_a: f64, a0: f64, w0: Vec<f64>, k: usize) -> f64 {
    let mut last = None;
    let mut n = 0;
    for st in Stepper::new(p, eps, eps_a, a0, w0).take(k + 1) {
        last = Some(st.eps_hat);
        n += 1;
    }
    match last {
        Some(v) if n == k + 1 => v,
        _ => f64::NAN,
    }
}

fn geo_mean_or_single(x: &[f64]) -> f64 {
    if x.len() == 1 {
        return x[0];
    }
    (x.iter().map(|v| v.ln()).sum::<f64>() / x.len() as f64).exp()
}

/// Run `r` at dimension `d` draws `(u, w₀)` from stream `(3, d·2²⁴ + r)`;
/// the same draws are reused for every ε.
pub fn dim_scan(cfg: &DimScanConfig, seed: u64, exec: &Executor) -> Result<Vec<DimScanRow>> {
    if cfg.dims.is_empty() || cfg.n_runs < 1 || cfg.k < 1 {
        return domain("dim scan needs dims, n_runs ≥ 1 and k ≥ 1");
    }
    super::curve::check_grid(&cfg.eps_grid)?;
    if cfg.dims.iter().any(|&d| d < 2) {
        return domain("dimensions must be at least 2");
    }
    let ne = cfg.eps_grid.len();
    let mut rows = Vec::with_capacity(cfg.dims.len());
    for &d in &cfg.dims {
        let eigs = crate::linspace(cfg.lambda_min, cfg.lambda_max, d);
        let spectrum = SpectralSummary::from_eigenvalues(eigs.clone())?;
        let h = SymMatrix::from_diagonal(&eigs)?.into_spd()?;
        let draws: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.n_runs)
            .map(|r| {
                let mut rng = stream_rng(seed, stream_id(RUN_STREAM, ((d as u64) << 24) | r as u64));
                let u = unit_sphere(&mut rng, d);
                let w0 = unit_sphere(&mut rng, d);
                (u, w0)
            })
            .collect();
        let instances = draws
            .iter()
            .map(|(u, _)| ProblemInstance::with_spectrum(h.clone(), u.clone(), None, spectrum.clone()))
            .collect::<Result<Vec<_>>>()?;
        let vals = exec.map(cfg.n_runs * ne, |idx| {
            let (r, i) = (idx / ne, idx % ne);
            final_eps_hat(&instances[r], cfg.eps_grid[i], cfg.eps_a, cfg.a0, draws[r].1.clone(), cfg.k)
        });
        let curve: Vec<CurvePoint> = (0..ne)
            .map(|i| {
                let col: Vec<f64> = (0..cfg.n_runs).map(|r| vals[r * ne + i]).collect();
                CurvePoint {
                    eps: cfg.eps_grid[i],
                    eps_hat: geo_mean_or_single(&col),
                }
            })
            .collect();
        let band = band_width(&curve, &spectrum)?;
        let measured = omega_measured(&curve, &spectrum)?;
        let estimate = beta_bar_mc(&spectrum, cfg.beta_samples, seed, exec)?.without_samples();
        rows.push(DimScanRow {
            d,
            n_runs: cfg.n_runs,
            curve,
            omega_band: band.width,
            band_empty: band.empty,
            omega_measured: measured,
            omega_pred: estimate.omega,
            estimate: OmegaEstimate {
                omega_measured: Some(measured),
                ..estimate
            },
        });
    }
    Ok(rows)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_regression(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<CurvePoint> = x.iter().zip(y).map(|(&eps, &eps_hat)| CurvePoint { eps, eps_hat }).collect();
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    super::curve::loglog_slope(&pts, lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DimScanConfig {
        DimScanConfig {
            dims: vec![10],
            n_runs: 1,
            eps_grid: crate::logspace(-3.0, 3.0, 7),
            k: 200,
            beta_samples: 50,
            lambda_max: 100.0,
            ..DimScanConfig::default()
        }
    }

    #[test]
    fn single_run_curve_is_that_run() {
        let cfg = small();
        let rows = dim_scan(&cfg, 3, &Executor::Sequential).unwrap();
        let row = &rows[0];
        let mut rng = stream_rng(3, stream_id(RUN_STREAM, 10 << 24));
        let u = unit_sphere(&mut rng, 10);
        let w0 = unit_sphere(&mut rng, 10);
        let eigs = crate::linspace(1.0, 100.0, 10);
        let p = ProblemInstance::with_spectrum(
            SymMatrix::from_diagonal(&eigs).unwrap().into_spd().unwrap(),
            u,
            None,
            SpectralSummary::from_eigenvalues(eigs).unwrap(),
        )
        .unwrap();
        for pt in &row.curve {
            let direct = final_eps_hat(&p, pt.eps, 1.0, 0.0, w0.clone(), cfg.k);
            assert_eq!(pt.eps_hat.to_bits(), direct.to_bits());
        }
    }

    #[test]
    fn stepper_final_matches_run() {
        use crate::dynamics::{run, Mode, RunConfig};
        let eigs = crate::linspace(1.0, 50.0, 6);
        let mut rng = stream_rng(1, 1);
        let u = unit_sphere(&mut rng, 6);
        let w0 = unit_sphere(&mut rng, 6);
        let p = ProblemInstance::new(SymMatrix::from_diagonal(&eigs).unwrap().into_spd().unwrap(), u, None).unwrap();
        let cfg = RunConfig::new(&p, 0.5, 1.0, 0.0, w0.clone()).max_iters(50);
        let t = run(&p, &cfg, Mode::Bngd).unwrap();
        assert_eq!(t.iterations, 50);
        assert_eq!(final_eps_hat(&p, 0.5, 1.0, 0.0, w0, 50), t.final_step.eps_hat);
    }

    #[test]
    fn worker_count_does_not_change_rows() {
        let cfg = DimScanConfig {
            dims: vec![5, 8],
            n_runs: 3,
            ..small()
        };
        let a = dim_scan(&cfg, 9, &Executor::Sequential).unwrap();
        let b = dim_scan(&cfg, 9, &Executor::Parallel { workers: 4 }).unwrap();
        assert_eq!(a, b);
        for row in &a {
            if let Some(lb) = row.estimate.lower_bound_arithmetic {
                assert!(row.omega_pred >= lb);
            }
        }
    }

    #[test]
    fn rejects_bad_config() {
        let bad = DimScanConfig { dims: vec![], ..small() };
        assert!(dim_scan(&bad, 1, &Executor::Sequential).is_err());
        let bad = DimScanConfig { eps_grid: vec![1.0, 10.0], ..small() };
        assert!(dim_scan(&bad, 1, &Executor::Sequential).is_err());
    }

    #[test]
    fn regression_slope() {
        let x = [25.0, 50.0, 100.0, 200.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 2.0 * v.powf(0.9)).collect();
        assert!((loglog_regression(&x, &y).unwrap() - 0.9).abs() < 1e-12);
    }
}
