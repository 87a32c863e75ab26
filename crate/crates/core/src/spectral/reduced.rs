//! The reduced matrix `H* = H - H u uᵀ H / (uᵀ H u)`.

use serde::Serialize;

use super::{eigenvalues_sym, norm, SymMatrix};
use crate::error::{domain, Error, Result};

/// Eigenvalues of `H*` below `NULL_CUTOFF * λ_max(H)` count as the null direction.
pub const NULL_CUTOFF: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct ReducedSpectrum {
    #[serde(skip)]
    pub h_star: SymMatrix,
    /// Ascending, with `eigenvalues[0] == 0` exactly.
    pub eigenvalues: Vec<f64>,
    /// Smallest nonzero eigenvalue; `None` when `d = 1`.
    pub lambda_star_min: Option<f64>,
    pub lambda_star_max: Option<f64>,
    pub kappa_star: Option<f64>,
    pub eps_star_max: Option<f64>,
    /// `u / ‖u‖`
    pub null_direction: Vec<f64>,
}

pub fn build_h_star(h: &SymMatrix, u: &[f64]) -> Result<ReducedSpectrum> {
    let d = h.dim();
    if u.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: u.len(),
        });
    }
    if !h.is_spd() {
        return domain("H* requires an SPD matrix");
    }
    let un = norm(u);
    if !(un > 0.0) || !un.is_finite() {
        return domain("H* requires a nonzero finite u");
    }
    let hu = h.mul_vec(u);
    let uhu: f64 = super::dot(u, &hu);
    let mut entries = h.entries().to_vec();
    for i in 0..d {
        for j in 0..d {
            entries[i * d + j] -= hu[i] * hu[j] / uhu;
        }
    }
    let h_star = SymMatrix::new(d, entries)?;

    let mut eigenvalues = eigenvalues_sym(&h_star)?;
    let lambda_max_h = if h.is_diagonal() {
        h.diagonal().into_iter().fold(f64::NEG_INFINITY, f64::max)
    } else {
        *eigenvalues_sym(h)?.last().unwrap()
    };
    let cutoff = NULL_CUTOFF * lambda_max_h;
    let count = eigenvalues.iter().filter(|&&l| l < cutoff).count();
    if count != 1 {
        return Err(Error::NullRank { count, cutoff });
    }
    eigenvalues[0] = 0.0;

    let (lambda_star_min, lambda_star_max) = if d >= 2 {
        (Some(eigenvalues[1]), Some(eigenvalues[d - 1]))
    } else {
        (None, None)
    };
    Ok(ReducedSpectrum {
        h_star,
        lambda_star_min,
        lambda_star_max,
        kappa_star: lambda_star_max.zip(lambda_star_min).map(|(hi, lo)| hi / lo),
        eps_star_max: lambda_star_max.map(|hi| 2.0 / hi),
        eigenvalues,
        null_direction: u.iter().map(|x| x / un).collect(),
    })
}

/// `ρ*(I - εH*) = max_{i≥2} |1 - ε λᵢ(H*)|`
pub fn pseudo_spectral_radius(r: &ReducedSpectrum, eps: f64) -> Result<f64> {
    match (r.lambda_star_min, r.lambda_star_max) {
        (Some(lo), Some(hi)) => Ok((1.0 - eps * lo).abs().max((1.0 - eps * hi).abs())),
        _ => domain("pseudo-spectral radius needs dim ≥ 2"),
    }
}

/// `‖x‖_{H*}`, evaluated as the H-norm of the H-orthogonal residual of `x`
/// against `u`. Unlike `sqrt(xᵀH*x)` this stays accurate when `x ∥ u`.
pub fn reduced_seminorm(h: &SymMatrix, u: &[f64], x: &[f64]) -> f64 {
    let hu = h.mul_vec(u);
    let t = super::dot(x, &hu) / super::dot(u, &hu);
    let r: Vec<f64> = x.iter().zip(u).map(|(xi, ui)| xi - t * ui).collect();
    super::h_norm(h, &r)
}

impl ReducedSpectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Largest violation of the interlacing chain
    /// `0 = μ₁ < λ₁ ≤ μ₂ ≤ λ₂ ≤ … ≤ μ_d ≤ λ_d`, relative to `λ_d`.
    /// `h_eigs` must be ascending. Zero or negative means every inequality holds.
    pub fn interlacing_residual(&self, h_eigs: &[f64]) -> f64 {
        let mu = &self.eigenvalues;
        let d = mu.len();
        assert_eq!(h_eigs.len(), d);
        let scale = h_eigs[d - 1];
        let mut worst = (mu[0] - h_eigs[0]) / scale;
        for i in 0..d {
            if i + 1 < d {
                worst = worst.max((h_eigs[i] - mu[i + 1]) / scale);
            }
            if i >= 1 {
                worst = worst.max((mu[i] - h_eigs[i]) / scale);
            }
        }
        worst
    }
}
