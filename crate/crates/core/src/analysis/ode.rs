//! Continuous approximation of the weight-norm growth.
//!
//! `ξ̇ = ε²β₀ρ^{2t}/ξ` gives `ξ∞² = ξ₀² + ε²β₀/|ln ρ|`, and ρ must equal the
//! spectral radius of `I - (ε/ξ∞)H`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::spectral::{spectral_radius_shift, SpectralSummary};

const SCAN_POINTS: usize = 2400;
const DELTA_MIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeApprox {
    pub xi0: f64,
    pub beta0: f64,
    pub rho: f64,
    pub xi_inf: f64,
    /// `ε / ξ∞`
    pub eps_hat_pred: f64,
    /// `|ρ - ρ_H(ε/ξ∞)|` at the returned root.
    pub residual: f64,
    /// No fixed point in (0, 1); `ξ∞ = ξ₀`.
    pub degenerate: bool,
}

/// Largest fixed point `ρ = ρ_H(ε/ξ∞(ρ))`, found by scanning `δ = 1 - ρ`
/// upward from `1e-12` on a log grid and bisecting the first sign change.
pub fn ode_predict(s: &SpectralSummary, eps: f64, xi0: f64, beta0: f64) -> Result<OdeApprox> {
    if !(eps > 0.0) || !eps.is_finite() {
        return domain("eps must be positive");
    }
    if !(xi0 > 0.0) || !xi0.is_finite() {
        return domain("xi0 must be positive");
    }
    if !(beta0 >= 0.0) || !beta0.is_finite() {
        return domain("beta0 must be non-negative");
    }
    let xi_of = |delta: f64| {
        // |ln ρ| without cancellation near ρ = 1
        let l = -(-delta).ln_1p();
        (xi0 * xi0 + eps * eps * beta0 / l).sqrt()
    };
    let g = |delta: f64| (1.0 - delta) - spectral_radius_shift(s, eps / xi_of(delta));
    let degenerate = || {
        let rho = spectral_radius_shift(s, eps / xi0);
        OdeApprox {
            xi0,
            beta0,
            rho,
            xi_inf: xi0,
            eps_hat_pred: eps / xi0,
            residual: 0.0,
            degenerate: true,
        }
    };
    if beta0 == 0.0 {
        return Ok(degenerate());
    }

    let (lo_exp, hi_exp) = (DELTA_MIN.log10(), (1.0 - DELTA_MIN).log10());
    let mut prev = (DELTA_MIN, g(DELTA_MIN));
    let mut bracket = None;
    if prev.1 == 0.0 {
        bracket = Some((prev.0, prev.0));
    } else {
        for i in 1..=SCAN_POINTS {
            let delta = if i == SCAN_POINTS {
                1.0 - DELTA_MIN
            } else {
                10f64.powf(lo_exp + (hi_exp - lo_exp) * i as f64 / SCAN_POINTS as f64)
            };
            let cur = (delta, g(delta));
            if cur.1 == 0.0 || (cur.1 < 0.0) != (prev.1 < 0.0) {
                bracket = Some((prev.0, cur.0));
                break;
            }
            prev = cur;
        }
    }
    let Some((mut a, mut b)) = bracket else {
        return Ok(degenerate());
    };
    let ga_neg = g(a) < 0.0;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if (g(m) < 0.0) == ga_neg {
            a = m;
        } else {
            b = m;
        }
    }
    let delta = if g(a).abs() <= g(b).abs() { a } else { b };
    let xi_inf = xi_of(delta);
    Ok(OdeApprox {
        xi0,
        beta0,
        rho: 1.0 - delta,
        xi_inf,
        eps_hat_pred: eps / xi_inf,
        residual: g(delta).abs(),
        degenerate: false,
    })
}
