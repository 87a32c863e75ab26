//! Final effective step size as a function of ε.

use serde::{Deserialize, Serialize};

use crate::dynamics::{run, Mode, Outcome, RunConfig, Thinning};
use crate::error::{domain, Result};
use crate::model::ProblemInstance;
use crate::par::Executor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub eps: f64,
    pub eps_hat: f64,
}

pub(crate) fn check_grid(eps_values: &[f64]) -> Result<()> {
    if eps_values.is_empty() {
        return domain("eps grid is empty");
    }
    if eps_values.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return domain("eps values must be positive and finite");
    }
    if eps_values.windows(2).any(|w| !(w[0] < w[1])) {
        return domain("eps values must be strictly ascending");
    }
    Ok(())
}

/// Runs BNGD for `k` steps at every ε, all other settings from `template`,
/// and returns the final ε̂. A diverged run yields NaN.
pub fn eps_hat_curve(
    p: &ProblemInstance,
    eps_values: &[f64],
    template: &RunConfig,
    k: usize,
    exec: &Executor,
) -> Result<Vec<CurvePoint>> {
    check_grid(eps_values)?;
    let base = template.clone().max_iters(k).thinning(Thinning::final_only());
    base.validate(p, Mode::Bngd)?;
    let out = exec.map(eps_values.len(), |i| {
        let mut cfg = base.clone();
        cfg.eps = eps_values[i];
        let eps_hat = match run(p, &cfg, Mode::Bngd) {
            Ok(t) if t.outcome != Outcome::Diverged => t.final_step.eps_hat,
            _ => f64::NAN,
        };
        CurvePoint {
            eps: eps_values[i],
            eps_hat,
        }
    });
    Ok(out)
}

/// Least-squares slope of `log ε̂` against `log ε` over points with
/// `ε ∈ [lo, hi]`. `None` with fewer than two usable points.
pub fn loglog_slope(points: &[CurvePoint], lo: f64, hi: f64) -> Option<f64> {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|c| c.eps >= lo * (1.0 - 1e-12) && c.eps <= hi * (1.0 + 1e-12) && c.eps_hat > 0.0)
        .map(|c| (c.eps.ln(), c.eps_hat.ln()))
        .collect();
    if xy.len() < 2 {
        return None;
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|v| v.0).sum::<f64>() / n;
    let my = xy.iter().map(|v| v.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xy.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
