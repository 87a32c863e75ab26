//! Stationary points of the BN loss.
//!
//! Saddles sit at `a = 0, wᵀg = 0`; global minimizers at
//! `(sign(s)·‖u‖_H, s·u)` for any `s ≠ 0`.

use serde::Serialize;

use super::loss::{hessian_bn, sigma_y};
use super::ProblemInstance;
use crate::error::{domain, Result};
use crate::spectral::{dot, eigenvalues_sym, norm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    Saddle,
    GlobalMinimizer,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalPointReport {
    pub kind: CriticalKind,
    pub a: f64,
    pub w: Vec<f64>,
    /// Eigenvalues of the assembled `(d+1)×(d+1)` Hessian, ascending.
    pub hessian_eigenvalues: Vec<f64>,
    pub minimizer_scale: Option<f64>,
}

impl CriticalPointReport {
    pub fn saddle(p: &ProblemInstance, w: &[f64]) -> Result<Self> {
        check_saddle(p, w)?;
        Ok(Self {
            kind: CriticalKind::Saddle,
            a: 0.0,
            w: w.to_vec(),
            hessian_eigenvalues: eigenvalues_sym(&hessian_bn(p, 0.0, w)?)?,
            minimizer_scale: None,
        })
    }

    pub fn minimizer(p: &ProblemInstance, s: f64) -> Result<Self> {
        if s == 0.0 || !s.is_finite() {
            return domain("minimizer scale must be nonzero and finite");
        }
        let a = s.signum() * p.u_h_norm();
        let w: Vec<f64> = p.u.iter().map(|x| s * x).collect();
        Ok(Self {
            kind: CriticalKind::GlobalMinimizer,
            hessian_eigenvalues: eigenvalues_sym(&hessian_bn(p, a, &w)?)?,
            a,
            w,
            minimizer_scale: Some(s),
        })
    }

    pub fn negative_count(&self, tol: f64) -> usize {
        self.hessian_eigenvalues.iter().filter(|&&l| l < -tol).count()
    }
}

fn check_saddle(p: &ProblemInstance, w: &[f64]) -> Result<f64> {
    let (sigma, y) = sigma_y(p, w)?;
    if y.abs() > 1e-10 * norm(w) * norm(&p.g).max(1.0) {
        return domain(format!("wᵀg = {y:e} is not zero; not a saddle"));
    }
    Ok(sigma)
}

/// Closed-form Hessian spectrum at the saddle `(0, w)`:
/// `½(1 ± sqrt(1 + 4‖g‖²/σ²))` and `d - 1` zeros, ascending.
pub fn saddle_hessian_eigs(p: &ProblemInstance, w: &[f64]) -> Result<Vec<f64>> {
    let sigma = check_saddle(p, w)?;
    let r = (1.0 + 4.0 * dot(&p.g, &p.g) / (sigma * sigma)).sqrt();
    let mut out = vec![0.0; p.dim() + 1];
    out[0] = 0.5 * (1.0 - r);
    out[p.dim()] = 0.5 * (1.0 + r);
    Ok(out)
}

/// Closed-form Hessian spectrum at the minimizer with `w* = s·u`:
/// `{1} ∪ eig(H*)/s²`, ascending.
pub fn minimizer_hessian_eigs(p: &ProblemInstance, s: f64) -> Result<Vec<f64>> {
    if s == 0.0 || !s.is_finite() {
        return domain("minimizer scale must be nonzero and finite");
    }
    let mut out: Vec<f64> = p.reduced()?.eigenvalues.iter().map(|l| l / (s * s)).collect();
    out.push(1.0);
    out.sort_by(f64::total_cmp);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_instance, InstanceSpec, SpectrumSpec, UMode};
    use crate::rng::{gaussian_vec, stream_rng};

    fn instance(ev: Vec<f64>, u: Vec<f64>) -> ProblemInstance {
        make_instance(&InstanceSpec::new(SpectrumSpec::Explicit { eigenvalues: ev }, UMode::Given { u }), 0).unwrap()
    }

    #[test]
    fn identity_two_by_two() {
        let p = instance(vec![1.0, 1.0], vec![1.0, 0.0]);
        let e = saddle_hessian_eigs(&p, &[0.0, 1.0]).unwrap();
        let phi = 0.5 * (1.0 + 5f64.sqrt());
        assert!((e[2] - phi).abs() < 1e-15);
        assert!((e[0] - (1.0 - phi)).abs() < 1e-15);
        assert_eq!(e[1], 0.0);
        let r = CriticalPointReport::saddle(&p, &[0.0, 1.0]).unwrap();
        assert_eq!(r.negative_count(1e-12), 1);

        let p3 = instance(vec![1.0, 1.0, 1.0], vec![1.0, 0.0, 0.0]);
        let e3 = saddle_hessian_eigs(&p3, &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(e3.iter().filter(|x| **x == 0.0).count(), 2);
    }

    #[test]
    fn not_a_saddle() {
        let p = instance(vec![1.0, 2.0], vec![1.0, 0.0]);
        assert!(saddle_hessian_eigs(&p, &[1.0, 1.0]).is_err());
        assert!(saddle_hessian_eigs(&p, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn closed_forms_match_assembled_hessian() {
        for seed in 0..10 {
            let d = 2 + (seed as usize % 6);
            let mut spec = InstanceSpec::new(
                SpectrumSpec::Logspace { lambda_min: 1.0, lambda_max: 50.0, d },
                UMode::Given { u: gaussian_vec(&mut stream_rng(seed, 1), d) },
            );
            spec.rotate = true;
            let p = make_instance(&spec, seed).unwrap();

            // w ⊥ g
            let mut w = gaussian_vec(&mut stream_rng(seed, 2), d);
            let t = dot(&w, &p.g) / dot(&p.g, &p.g);
            w.iter_mut().zip(&p.g).for_each(|(wi, gi)| *wi -= t * gi);
            let closed = saddle_hessian_eigs(&p, &w).unwrap();
            let numeric = CriticalPointReport::saddle(&p, &w).unwrap();
            for (x, y) in closed.iter().zip(&numeric.hessian_eigenvalues) {
                assert!((x - y).abs() <= 1e-8, "{x} vs {y}");
            }
            assert_eq!(closed.iter().filter(|&&l| l < 0.0).count(), 1);

            for s in [-2.0, 0.5, 1.5] {
                let closed = minimizer_hessian_eigs(&p, s).unwrap();
                let numeric = CriticalPointReport::minimizer(&p, s).unwrap();
                for (x, y) in closed.iter().zip(&numeric.hessian_eigenvalues) {
                    assert!((x - y).abs() <= 1e-8 * closed[d], "{x} vs {y}");
                }
                assert!(numeric.hessian_eigenvalues[0] >= -1e-8);
            }
        }
    }
}
