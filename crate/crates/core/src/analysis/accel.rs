//! Late-trajectory contraction of `‖e_k‖_H` under BNGD, compared with the
//! optimal GD rate and the reduced-spectrum rate.

use serde::{Deserialize, Serialize};

use crate::dynamics::{RunConfig, Stepper};
use crate::error::Result;
use crate::model::ProblemInstance;
use crate::par::Executor;
use crate::spectral::pseudo_spectral_radius;

/// Fit window on `‖e_k‖/‖e_0‖`.
pub const WINDOW_HI: f64 = 1e-4;
pub const WINDOW_LO: f64 = 1e-10;
/// A run must get this far below `‖e_0‖` to be rated.
pub const REACH: f64 = 1e-8;
const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub eps: f64,
    /// ε̂ at the last visited state.
    pub eps_hat: f64,
    pub late_rate: f64,
    /// `ρ*(I - ε̂H*)` at the final ε̂.
    pub rho_star: f64,
    /// `(κ-1)/(κ+1)`
    pub rho_opt_gd: f64,
    pub kappa_star: Option<f64>,
    pub iterations: usize,
}

/// Geometric rate fitted by least squares to `ln e_k` over the steps with
/// `e_k/e_0 ∈ [1e-10, 1e-4]`.
pub fn late_rate(e: &[f64]) -> Option<f64> {
    let e0 = *e.first()?;
    if !(e0 > 0.0) {
        return None;
    }
    let pts: Vec<(f64, f64)> = e
        .iter()
        .enumerate()
        .filter(|(_, v)| {
            let r = *v / e0;
            (WINDOW_LO..=WINDOW_HI).contains(&r)
        })
        .map(|(k, v)| (k as f64, v.ln()))
        .collect();
    if pts.len() < MIN_POINTS {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    Some((sxy / sxx).exp())
}

/// Rates one BNGD run of at most `k` steps; `None` when it never gets
/// below `1e-8 ‖e_0‖_H`.
pub fn rate_at(p: &ProblemInstance, template: &RunConfig, eps: f64, k: usize) -> Result<Option<RateReport>> {
    let reduced = p.reduced()?;
    let mut e = Vec::new();
    let mut eps_hat = f64::NAN;
    let mut stepper = Stepper::new(p, eps, template.eps_a, template.a0, template.w0.clone());
    for st in stepper.by_ref().take(k + 1) {
        e.push(st.e_h_norm);
        eps_hat = st.eps_hat;
        if st.e_h_norm < WINDOW_LO * e[0] {
            break;
        }
    }
    let reached = e.iter().any(|v| *v < REACH * e[0]);
    let Some(rate) = late_rate(&e).filter(|_| reached) else {
        return Ok(None);
    };
    let s = &p.spectrum;
    Ok(Some(RateReport {
        eps,
        eps_hat,
        late_rate: rate,
        rho_star: pseudo_spectral_radius(reduced, eps_hat)?,
        rho_opt_gd: (s.kappa - 1.0) / (s.kappa + 1.0),
        kappa_star: reduced.kappa_star,
        iterations: e.len() - 1,
    }))
}

/// The grid ε with the smallest late rate.
pub fn best_rate(
    p: &ProblemInstance,
    template: &RunConfig,
    eps_grid: &[f64],
    k: usize,
    exec: &Executor,
) -> Result<Option<RateReport>> {
    let all = exec.map(eps_grid.len(), |i| rate_at(p, template, eps_grid[i], k));
    let mut best: Option<RateReport> = None;
    for r in all {
        if let Some(r) = r? {
            if best.is_none_or(|b| r.late_rate < b.late_rate) {
                best = Some(r);
            }
        }
    }
    Ok(best)
}
