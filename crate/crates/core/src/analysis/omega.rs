//! β₀, its geometric average β̄ over random `(u, w₀)`, and the magnitude
//! Ω of the insensitivity interval.

use serde::{Deserialize, Serialize};

use super::curve::{check_grid, CurvePoint};
use super::sweep::BAND_FACTOR;
use crate::dynamics::Eval;
use crate::error::{domain, Result};
use crate::model::ProblemInstance;
use crate::par::Executor;
use crate::rng::{stream_id, stream_rng, unit_sphere};
use crate::spectral::SpectralSummary;

/// Stream purpose for β₀ samples.
const BETA_STREAM: u32 = 2;
/// Redraw cap per sample before giving up on a zero β₀.
const MAX_REDRAWS: usize = 1000;

/// `β = (a²‖w‖²/σ²) eᵀH²e` at the state `(a, w)`.
pub fn beta0(p: &ProblemInstance, a: f64, w: &[f64]) -> Result<f64> {
    if w.iter().all(|x| *x == 0.0) {
        return domain("beta0 needs w ≠ 0");
    }
    Ok(Eval::new(p, a, w, 1.0)?.beta)
}

/// β₀ with `a₀ = y/σ` for `H = diag(eigs)`:
/// `(wᵀHu / wᵀHw)² ‖w‖² ‖H(u - (wᵀHu/wᵀHw) w)‖²`.
pub fn beta0_diagonal(eigs: &[f64], u: &[f64], w: &[f64]) -> f64 {
    let (mut y, mut s2, mut wn) = (0.0, 0.0, 0.0);
    for ((l, ui), wi) in eigs.iter().zip(u).zip(w) {
        y += l * wi * ui;
        s2 += l * wi * wi;
        wn += wi * wi;
    }
    let t = y / s2;
    let he_sq: f64 = eigs
        .iter()
        .zip(u)
        .zip(w)
        .map(|((l, ui), wi)| {
            let v = l * (ui - t * wi);
            v * v
        })
        .sum();
    t * t * wn * he_sq
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaEstimate {
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub beta0_samples: Vec<f64>,
    /// Geometric mean of the samples.
    pub beta_bar: f64,
    pub beta_arith: f64,
    /// `1 / (β̄ ε_max²)`
    pub omega: f64,
    pub omega_measured: Option<f64>,
    /// `d / C`
    pub lower_bound_generic: f64,
    /// `κ²/(κ+1)³ d`, equally spaced spectra only.
    pub lower_bound_arithmetic: Option<f64>,
    /// Largest `|mean(half) / mean(all) - 1|` over the two halves.
    pub geometric_half_change: f64,
    pub arithmetic_half_change: f64,
    /// Zero-β₀ draws that were discarded and redrawn.
    pub discarded: usize,
}

impl OmegaEstimate {
    pub fn without_samples(mut self) -> Self {
        self.beta0_samples.clear();
        self
    }
}

fn geo_mean(x: &[f64]) -> f64 {
    (x.iter().map(|v| v.ln()).sum::<f64>() / x.len() as f64).exp()
}

fn arith_mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn half_change(x: &[f64], mean: fn(&[f64]) -> f64) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let all = mean(x);
    let (a, b) = x.split_at(x.len() / 2);
    ((mean(a) / all - 1.0).abs()).max((mean(b) / all - 1.0).abs())
}

/// Sample `i` draws `(w₀, u)` from its own stream; only the spectrum of H
/// matters since the sphere distribution is rotation invariant.
pub fn beta_bar_mc(s: &SpectralSummary, n_samples: usize, seed: u64, exec: &Executor) -> Result<OmegaEstimate> {
    if n_samples < 1 {
        return domain("n_samples must be at least 1");
    }
    let eigs = &s.eigenvalues;
    let d = eigs.len();
    let draws = exec.map(n_samples, |i| {
        let mut rng = stream_rng(seed, stream_id(BETA_STREAM, i as u64));
        for redraws in 0..MAX_REDRAWS {
            let w = unit_sphere(&mut rng, d);
            let u = unit_sphere(&mut rng, d);
            let b = beta0_diagonal(eigs, &u, &w);
            if b > 0.0 && b.is_finite() {
                return Some((b, redraws));
            }
        }
        None
    });
    let mut samples = Vec::with_capacity(n_samples);
    let mut discarded = 0;
    for d in draws {
        match d {
            Some((b, r)) => {
                samples.push(b);
                discarded += r;
            }
            None => return domain("β₀ is zero for every draw; d = 1 has no insensitivity interval"),
        }
    }
    let beta_bar = geo_mean(&samples);
    Ok(OmegaEstimate {
        beta_bar,
        beta_arith: arith_mean(&samples),
        omega: 1.0 / (beta_bar * s.eps_max * s.eps_max),
        omega_measured: None,
        lower_bound_generic: lower_bound_generic(s),
        lower_bound_arithmetic: lower_bound_arithmetic(s),
        geometric_half_change: half_change(&samples, geo_mean),
        arithmetic_half_change: half_change(&samples, arith_mean),
        discarded,
        beta0_samples: samples,
    })
}

/// `d / C` with
/// `C = 4 (Tr H²/(dλ_min²)) (Tr H/(dλ_max)) exp((2 ln κ/(κ-1)) (1 - Tr H/(dλ_min)))`.
pub fn lower_bound_generic(s: &SpectralSummary) -> f64 {
    let d = s.dim() as f64;
    let tr: f64 = s.eigenvalues.iter().sum();
    let tr2: f64 = s.eigenvalues.iter().map(|l| l * l).sum();
    let k = s.kappa;
    // 2 ln κ / (κ - 1) → 2 as κ → 1
    let coef = if k - 1.0 > 1e-8 { 2.0 * k.ln() / (k - 1.0) } else { 2.0 };
    let c = 4.0 * (tr2 / (d * s.lambda_min * s.lambda_min)) * (tr / (d * s.lambda_max))
        * (coef * (1.0 - tr / (d * s.lambda_min))).exp();
    d / c
}

/// `κ²/(κ+1)³ d` for equally spaced eigenvalues.
pub fn lower_bound_arithmetic(s: &SpectralSummary) -> Option<f64> {
    let k = s.kappa;
    s.is_arithmetic().then(|| k * k / (k + 1.0).powi(3) * s.dim() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandWidth {
    /// `ε_high / ε_low`
    pub width: f64,
    pub eps_low: f64,
    pub eps_high: f64,
    /// Set when no point falls inside the band; `width` is then 1.
    pub empty: bool,
}

fn check_span(curve: &[CurvePoint]) -> Result<()> {
    let eps: Vec<f64> = curve.iter().map(|c| c.eps).collect();
    check_grid(&eps)?;
    if (eps[eps.len() - 1] / eps[0]).log10() < 4.0 - 1e-9 {
        return domain("curve must span at least 4 decades of eps");
    }
    Ok(())
}

/// Widest contiguous run of curve points with `ε̂ ∈ [0.8 ε_opt, ε_opt/0.8]`,
/// endpoints interpolated log-linearly where the curve crosses the band edge.
pub fn band_width(curve: &[CurvePoint], s: &SpectralSummary) -> Result<BandWidth> {
    check_span(curve)?;
    let (lo, hi) = (BAND_FACTOR * s.eps_opt, s.eps_opt / BAND_FACTOR);
    let inside = |c: &CurvePoint| c.eps_hat >= lo && c.eps_hat <= hi;
    // crossing of the edge between an outside point and an inside one
    let cross = |out: &CurvePoint, inn: &CurvePoint| -> f64 {
        let edge = if out.eps_hat < lo { lo } else { hi };
        if !out.eps_hat.is_finite() || out.eps_hat <= 0.0 {
            return inn.eps;
        }
        let (x0, x1) = (out.eps.ln(), inn.eps.ln());
        let (y0, y1) = (out.eps_hat.ln(), inn.eps_hat.ln());
        if y1 == y0 {
            return inn.eps;
        }
        (x0 + (edge.ln() - y0) * (x1 - x0) / (y1 - y0)).exp()
    };
    let mut best: Option<BandWidth> = None;
    let mut i = 0;
    while i < curve.len() {
        if !inside(&curve[i]) {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < curve.len() && inside(&curve[i + 1]) {
            i += 1;
        }
        let eps_low = if start > 0 { cross(&curve[start - 1], &curve[start]) } else { curve[start].eps };
        let eps_high = if i + 1 < curve.len() { cross(&curve[i + 1], &curve[i]) } else { curve[i].eps };
        let width = eps_high / eps_low;
        if best.is_none_or(|b| width > b.width) {
            best = Some(BandWidth {
                width,
                eps_low,
                eps_high,
                empty: false,
            });
        }
        i += 1;
    }
    Ok(best.unwrap_or(BandWidth {
        width: 1.0,
        eps_low: f64::NAN,
        eps_high: f64::NAN,
        empty: true,
    }))
}

/// Magnitude of the insensitivity interval `[C₁ ε_max, C₂/ε_max]` read off
/// the asymptotes of the curve: `ε̂ ≈ C₁ ε` on the lowest decade and
/// `ε̂ ≈ C₂/ε` on the highest; the result is `C₂ / (C₁ ε_max²)`.
pub fn omega_measured(curve: &[CurvePoint], s: &SpectralSummary) -> Result<f64> {
    check_span(curve)?;
    let (e0, e1) = (curve[0].eps, curve[curve.len() - 1].eps);
    let geo = |pts: Vec<f64>| -> Result<f64> {
        if pts.is_empty() || pts.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return domain("asymptote decade has missing or non-positive eps_hat");
        }
        Ok(geo_mean(&pts))
    };
    let tol = 1.0 + 1e-12;
    let c1 = geo(curve.iter().filter(|c| c.eps <= 10.0 * e0 * tol).map(|c| c.eps_hat / c.eps).collect())?;
    let c2 = geo(curve.iter().filter(|c| c.eps * 10.0 * tol >= e1).map(|c| c.eps_hat * c.eps).collect())?;
    Ok(c2 / (c1 * s.eps_max * s.eps_max))
}
