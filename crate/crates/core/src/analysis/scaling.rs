//! Equivalent BNGD configurations under rescaling and orthogonal conjugation.
//!
//! Conjugation: `{μQHQᵀ, (γ/√μ)Qu, |γ|a₀, γQw₀, ε_a, ε}` reproduces
//! `w'_k = γQw_k`, `a'_k = |γ|a_k`.
//! Rescaling: `{H, u, sign(r)a₀, r w₀, ε_a, r²ε}` reproduces
//! `w'_k = r w_k`, `a'_k = sign(r) a_k`.

use serde::{Deserialize, Serialize};

use crate::dynamics::{bngd_step, RunConfig};
use crate::error::{domain, Result};
use crate::model::ProblemInstance;
use crate::spectral::{norm, SpectralSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingVariant {
    Conjugate,
    RescaleW,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingTransform {
    pub mu: f64,
    pub gamma: f64,
    pub r: f64,
    /// Row-major orthogonal `d×d`.
    pub q: Vec<f64>,
}

impl ScalingTransform {
    pub fn identity(d: usize) -> Self {
        let mut q = vec![0.0; d * d];
        for i in 0..d {
            q[i * d + i] = 1.0;
        }
        Self {
            mu: 1.0,
            gamma: 1.0,
            r: 1.0,
            q,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return domain(format!("mu must be positive, got {}", self.mu));
        }
        if self.gamma == 0.0 || !self.gamma.is_finite() || self.r == 0.0 || !self.r.is_finite() {
            return domain("gamma and r must be nonzero and finite");
        }
        if self.q.len() != d * d {
            return domain("Q has the wrong size");
        }
        let mut err = 0.0;
        for i in 0..d {
            for j in 0..d {
                let g: f64 = (0..d).map(|k| self.q[k * d + i] * self.q[k * d + j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                err += (g - want) * (g - want);
            }
        }
        if err.sqrt() > 1e-10 {
            return domain(format!("‖QᵀQ - I‖_F = {:e} exceeds 1e-10", err.sqrt()));
        }
        Ok(())
    }

    fn apply_q(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        (0..d)
            .map(|i| (0..d).map(|k| self.q[i * d + k] * x[k]).sum())
            .collect()
    }
}

/// Runs both configurations for `steps` BNGD updates and returns the
/// largest relative deviation of the transformed trajectory from the
/// predicted image of the original one.
pub fn verify_scaling(
    p: &ProblemInstance,
    cfg: &RunConfig,
    t: &ScalingTransform,
    variant: ScalingVariant,
    steps: usize,
) -> Result<f64> {
    if steps < 1 {
        return domain("steps must be at least 1");
    }
    t.validate(p.dim())?;
    let noise = p.c - p.uhu;

    let (p2, mut cfg2, w_map, a_sign): (ProblemInstance, RunConfig, Box<dyn Fn(&[f64]) -> Vec<f64>>, f64) =
        match variant {
            ScalingVariant::RescaleW => {
                let mut c2 = cfg.clone();
                c2.w0 = cfg.w0.iter().map(|x| t.r * x).collect();
                c2.eps = t.r * t.r * cfg.eps;
                c2.a0 = t.r.signum() * cfg.a0;
                let r = t.r;
                (p.clone(), c2, Box::new(move |w: &[f64]| w.iter().map(|x| r * x).collect()), t.r.signum())
            }
            ScalingVariant::Conjugate => {
                let h2 = p.h.conjugate(&t.q, t.mu)?;
                let u2: Vec<f64> = t.apply_q(&p.u).into_iter().map(|x| t.gamma / t.mu.sqrt() * x).collect();
                let spectrum = SpectralSummary::from_eigenvalues(p.spectrum.eigenvalues.iter().map(|l| t.mu * l).collect())?;
                let uhu2 = t.gamma * t.gamma * p.uhu;
                let p2 = ProblemInstance::with_spectrum(h2, u2, Some(uhu2 + t.gamma * t.gamma * noise), spectrum)?;
                let mut c2 = cfg.clone();
                let tq = t.clone();
                let gamma = t.gamma;
                let map = move |w: &[f64]| tq.apply_q(w).into_iter().map(|x| gamma * x).collect::<Vec<f64>>();
                c2.w0 = map(&cfg.w0);
                c2.a0 = t.gamma.abs() * cfg.a0;
                (p2, c2, Box::new(map), t.gamma.abs())
            }
        };
    cfg2.verify = false;
    cfg2.validate(&p2, crate::dynamics::Mode::Bngd)?;
    cfg.validate(p, crate::dynamics::Mode::Bngd)?;

    let a_scale = p2.u_h_norm();
    let (mut a, mut w) = (cfg.a0, cfg.w0.clone());
    let (mut a2, mut w2) = (cfg2.a0, cfg2.w0.clone());
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        let (na, nw, _) = bngd_step(p, a, &w, cfg)?;
        let (na2, nw2, _) = bngd_step(&p2, a2, &w2, &cfg2)?;
        (a, w, a2, w2) = (na, nw, na2, nw2);
        let want_w = w_map(&w);
        let dw: Vec<f64> = w2.iter().zip(&want_w).map(|(x, y)| x - y).collect();
        let want_a = a_sign * a;
        worst = worst
            .max(norm(&dw) / norm(&w2))
            .max((a2 - want_a).abs() / a2.abs().max(a_scale));
    }
    Ok(worst)
}
