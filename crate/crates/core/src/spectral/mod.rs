//! Dense symmetric linear algebra.
//!
//! Everything here works on small dense matrices (d up to a few hundred).
//! Diagonal matrices keep the dense layout but take an O(d) path through
//! the matrix-vector products, which is what makes long sweeps on the
//! diagonal experiment instances cheap.

mod jacobi;
mod reduced;

pub use jacobi::{eigen_sym, eigenvalues_sym, Eigen, JACOBI_SWEEP_CAP, JACOBI_TOLERANCE};
pub use reduced::{build_h_star, pseudo_spectral_radius, reduced_seminorm, ReducedSpectrum, NULL_CUTOFF};

use serde::Serialize;

use crate::error::{domain, Error, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `a - b`
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Real symmetric matrix, stored dense and row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
    diagonal: Option<Vec<f64>>,
    spd: bool,
}

impl SymMatrix {
    /// Builds a symmetric matrix from row-major entries. The input is
    /// symmetrized as `(M + Mᵀ)/2`, so the stored entries are exactly
    /// symmetric.
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return domain("matrix dimension must be positive");
        }
        if entries.len() != dim * dim {
            return Err(Error::Dimension {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return domain("matrix has non-finite entries");
        }
        let mut data = entries;
        for i in 0..dim {
            for j in (i + 1)..dim {
                let s = 0.5 * (data[i * dim + j] + data[j * dim + i]);
                data[i * dim + j] = s;
                data[j * dim + i] = s;
            }
        }
        let is_diag = (0..dim).all(|i| (0..dim).all(|j| i == j || data[i * dim + j] == 0.0));
        let diagonal = is_diag.then(|| (0..dim).map(|i| data[i * dim + i]).collect());
        Ok(Self {
            dim,
            data,
            diagonal,
            spd: false,
        })
    }

    /// Builds a matrix and checks positive definiteness through its spectrum.
    pub fn new_spd(dim: usize, entries: Vec<f64>) -> Result<Self> {
        Self::new(dim, entries)?.into_spd()
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let d = diag.len();
        let mut data = vec![0.0; d * d];
        for (i, &v) in diag.iter().enumerate() {
            data[i * d + i] = v;
        }
        Self::new(d, data)
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![1.0; dim])
            .and_then(Self::into_spd)
            .expect("identity is well formed")
    }

    /// Marks the matrix as SPD after verifying every eigenvalue is positive.
    pub fn into_spd(mut self) -> Result<Self> {
        let lambda_min = match &self.diagonal {
            Some(diag) => diag.iter().copied().fold(f64::INFINITY, f64::min),
            None => eigenvalues_sym(&self)?[0],
        };
        if !(lambda_min > 0.0) {
            return domain(format!(
                "matrix is not positive definite (smallest eigenvalue {lambda_min:e})"
            ));
        }
        self.spd = true;
        Ok(self)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    pub fn is_spd(&self) -> bool {
        self.spd
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal.is_some()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    /// `out = M x`
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        match &self.diagonal {
            Some(diag) => {
                for ((o, d), xi) in out.iter_mut().zip(diag).zip(x) {
                    *o = d * xi;
                }
            }
            None => {
                for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.dim)) {
                    *o = dot(row, x);
                }
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.mul_vec_into(x, &mut out);
        out
    }

    /// `xᵀ M x`
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        match &self.diagonal {
            Some(diag) => diag.iter().zip(x).map(|(d, xi)| d * xi * xi).sum(),
            None => dot(x, &self.mul_vec(x)),
        }
    }

    /// `Q M Qᵀ * scale` for a row-major orthogonal `q`.
    pub fn conjugate(&self, q: &[f64], scale: f64) -> Result<Self> {
        let d = self.dim;
        if q.len() != d * d {
            return Err(Error::Dimension {
                expected: d * d,
                got: q.len(),
            });
        }
        // tmp = M Qᵀ
        let mut tmp = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                tmp[i * d + j] = (0..d).map(|k| self.get(i, k) * q[j * d + k]).sum();
            }
        }
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = scale * (0..d).map(|k| q[i * d + k] * tmp[k * d + j]).sum::<f64>();
            }
        }
        let m = Self::new(d, out)?;
        if self.spd && scale > 0.0 {
            m.into_spd()
        } else {
            Ok(m)
        }
    }
}

/// `‖x‖_H = sqrt(xᵀ H x)`.
pub fn h_norm(h: &SymMatrix, x: &[f64]) -> f64 {
    h.quad_form(x).max(0.0).sqrt()
}

/// Spectral quantities of an SPD matrix that govern plain gradient descent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralSummary {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub kappa: f64,
    /// `2 / λ_max`, the GD stability limit.
    pub eps_max: f64,
    /// `2 / (λ_max + λ_min)`
    pub eps_opt: f64,
    /// `(κ - 1) / (κ + 1)`
    pub rho_opt: f64,
}

impl SpectralSummary {
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return domain("empty spectrum");
        }
        eigenvalues.sort_by(f64::total_cmp);
        let lambda_min = eigenvalues[0];
        let lambda_max = *eigenvalues.last().unwrap();
        if !(lambda_min > 0.0) || !lambda_max.is_finite() {
            return domain(format!("spectrum is not positive: λ_min = {lambda_min:e}"));
        }
        let kappa = lambda_max / lambda_min;
        Ok(Self {
            eigenvalues,
            lambda_min,
            lambda_max,
            kappa,
            eps_max: 2.0 / lambda_max,
            eps_opt: 2.0 / (lambda_max + lambda_min),
            rho_opt: (kappa - 1.0) / (kappa + 1.0),
        })
    }

    pub fn of(h: &SymMatrix) -> Result<Self> {
        if !h.is_spd() {
            return domain("spectral summary requires an SPD matrix");
        }
        Self::from_eigenvalues(eigenvalues_sym(h)?)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// True when the eigenvalues form an arithmetic progression (to 1e-9 relative).
    pub fn is_arithmetic(&self) -> bool {
        let d = self.dim();
        if d < 2 {
            return true;
        }
        let step = (self.lambda_max - self.lambda_min) / (d - 1) as f64;
        self.eigenvalues
            .iter()
            .enumerate()
            .all(|(i, &l)| (l - (self.lambda_min + step * i as f64)).abs() <= 1e-9 * self.lambda_max)
    }
}

/// `ρ(I - εH) = maxᵢ |1 - ε λᵢ|`.
///
/// `|1 - ελ|` is convex in λ, so the maximum over the spectrum sits at one
/// of the two extreme eigenvalues.
pub fn spectral_radius_shift(s: &SpectralSummary, eps: f64) -> f64 {
    (1.0 - eps * s.lambda_min).abs().max((1.0 - eps * s.lambda_max).abs())
}
