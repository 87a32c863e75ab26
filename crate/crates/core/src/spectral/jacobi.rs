//! Cyclic Jacobi eigensolver for real symmetric matrices.

use super::SymMatrix;
use crate::error::{Error, Result};

/// Convergence threshold on the off-diagonal Frobenius norm, relative to `‖M‖_F`.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
pub const JACOBI_SWEEP_CAP: usize = 100;

#[derive(Debug, Clone)]
pub struct Eigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// `vectors[i]` is the unit eigenvector for `values[i]`.
    pub vectors: Vec<Vec<f64>>,
}

impl Eigen {
    /// `V Λ Vᵀ`, row-major.
    pub fn reconstruct(&self) -> Vec<f64> {
        let d = self.values.len();
        let mut out = vec![0.0; d * d];
        for (lambda, v) in self.values.iter().zip(&self.vectors) {
            for i in 0..d {
                let li = lambda * v[i];
                for j in 0..d {
                    out[i * d + j] += li * v[j];
                }
            }
        }
        out
    }
}

pub fn eigen_sym(m: &SymMatrix) -> Result<Eigen> {
    let (values, v) = jacobi(m, true)?;
    let d = m.dim();
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..d)
        .map(|k| (values[k], (0..d).map(|i| v[i * d + k]).collect()))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (values, vectors) = pairs.into_iter().unzip();
    Ok(Eigen { values, vectors })
}

/// Eigenvalues only, ascending. Skips the eigenvector accumulation.
pub fn eigenvalues_sym(m: &SymMatrix) -> Result<Vec<f64>> {
    let (mut values, _) = jacobi(m, false)?;
    values.sort_by(f64::total_cmp);
    Ok(values)
}

fn off_diagonal_norm(a: &[f64], d: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..d {
        for j in (i + 1)..d {
            s += 2.0 * a[i * d + j] * a[i * d + j];
        }
    }
    s.sqrt()
}

/// Returns the unsorted diagonal and, if requested, the accumulated
/// rotations with eigenvectors in the columns.
fn jacobi(m: &SymMatrix, want_vectors: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = m.dim();
    let mut a = m.entries().to_vec();
    let mut v = if want_vectors {
        let mut id = vec![0.0; d * d];
        for i in 0..d {
            id[i * d + i] = 1.0;
        }
        id
    } else {
        Vec::new()
    };
    let threshold = JACOBI_TOLERANCE * m.frobenius_norm();
    let mut off = off_diagonal_norm(&a, d);
    let mut sweeps = 0;
    while off > threshold {
        if sweeps == JACOBI_SWEEP_CAP {
            return Err(Error::NoConvergence {
                sweeps,
                off_diagonal: off,
            });
        }
        sweeps += 1;
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                a[p * d + q] = 0.0;
                a[q * d + p] = 0.0;
                if want_vectors {
                    for k in 0..d {
                        let vkp = v[k * d + p];
                        let vkq = v[k * d + q];
                        v[k * d + p] = c * vkp - s * vkq;
                        v[k * d + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        off = off_diagonal_norm(&a, d);
    }
    Ok(((0..d).map(|i| a[i * d + i]).collect(), v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_vec, stream_rng};
    use crate::spectral::{dot, norm, sub};

    fn random_symmetric(seed: u64, d: usize) -> SymMatrix {
        let raw = gaussian_vec(&mut stream_rng(seed, 0), d * d);
        SymMatrix::new(d, raw).unwrap()
    }

    #[test]
    fn identity_and_diagonal() {
        let e = eigen_sym(&SymMatrix::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
        let e = eigen_sym(&SymMatrix::from_diagonal(&[3.0, 1.0, 2.0]).unwrap()).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(e.vectors[0], vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn random_8x8_reconstructs() {
        let m = random_symmetric(42, 8);
        let e = eigen_sym(&m).unwrap();
        assert!(norm(&sub(&e.reconstruct(), m.entries())) <= 1e-9);
    }

    #[test]
    fn pairs_and_orthonormality() {
        for (seed, d) in [(1, 2), (2, 5), (3, 17), (4, 40)] {
            let m = random_symmetric(seed, d);
            let e = eigen_sym(&m).unwrap();
            let scale = m.frobenius_norm();
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
            for (lambda, v) in e.values.iter().zip(&e.vectors) {
                let mv = m.mul_vec(v);
                let r: Vec<f64> = mv.iter().zip(v).map(|(x, y)| x - lambda * y).collect();
                assert!(norm(&r) <= 1e-10 * scale);
            }
            for i in 0..d {
                for j in 0..d {
                    let g = dot(&e.vectors[i], &e.vectors[j]);
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((g - want).abs() <= 1e-10);
                }
            }
            assert_eq!(eigenvalues_sym(&m).unwrap(), e.values);
        }
    }

    #[test]
    fn reconstruction_at_d200() {
        let m = random_symmetric(9, 200);
        let e = eigen_sym(&m).unwrap();
        assert!(norm(&sub(&e.reconstruct(), m.entries())) <= 1e-9 * m.frobenius_norm());
    }

    #[test]
    fn trace_is_preserved() {
        let m = random_symmetric(5, 12);
        let s: f64 = eigenvalues_sym(&m).unwrap().iter().sum();
        assert!((s - m.trace()).abs() < 1e-12 * m.frobenius_norm() * 12.0);
    }
}
