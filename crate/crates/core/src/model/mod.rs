//! The OLS problem `min_w ½E[(y - xᵀw)²]` through its population moments.

mod critical;
mod loss;

pub use critical::{
    minimizer_hessian_eigs, saddle_hessian_eigs, CriticalKind, CriticalPointReport,
};
pub use loss::{grad_bn, hessian_bn, loss_bn, loss_bn_direct, loss_gd};

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::{random_orthogonal, stream_id, stream_rng, unit_sphere};
use crate::spectral::{build_h_star, dot, norm, ReducedSpectrum, SpectralSummary, SymMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectrumSpec {
    /// `d` log-spaced eigenvalues from `lambda_min` to `lambda_max`.
    Logspace { lambda_min: f64, lambda_max: f64, d: usize },
    Linspace { lambda_min: f64, lambda_max: f64, d: usize },
    /// `d - 1` ones followed by `lambda_big`.
    Spiked { d: usize, lambda_big: f64 },
    Explicit { eigenvalues: Vec<f64> },
}

impl SpectrumSpec {
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let ev = match self {
            SpectrumSpec::Logspace { lambda_min, lambda_max, d } => {
                if !(*lambda_min > 0.0 && *lambda_max > 0.0) {
                    return domain("logspace endpoints must be positive");
                }
                crate::logspace(lambda_min.log10(), lambda_max.log10(), *d)
                    .into_iter()
                    .enumerate()
                    // pin the endpoints exactly; 10^log10(x) can be off by an ulp
                    .map(|(i, x)| if i == 0 { *lambda_min } else if i + 1 == *d { *lambda_max } else { x })
                    .collect()
            }
            SpectrumSpec::Linspace { lambda_min, lambda_max, d } => crate::linspace(*lambda_min, *lambda_max, *d),
            SpectrumSpec::Spiked { d, lambda_big } => {
                if *d == 0 {
                    Vec::new()
                } else {
                    let mut v = vec![1.0; *d];
                    v[d - 1] = *lambda_big;
                    v
                }
            }
            SpectrumSpec::Explicit { eigenvalues } => eigenvalues.clone(),
        };
        if ev.is_empty() {
            return domain("spectrum must have at least one eigenvalue");
        }
        if let Some(bad) = ev.iter().find(|&&l| !(l > 0.0) || !l.is_finite()) {
            return domain(format!("eigenvalue {bad} is not positive"));
        }
        Ok(ev)
    }

    pub fn dim(&self) -> usize {
        match self {
            SpectrumSpec::Logspace { d, .. }
            | SpectrumSpec::Linspace { d, .. }
            | SpectrumSpec::Spiked { d, .. } => *d,
            SpectrumSpec::Explicit { eigenvalues } => eigenvalues.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UMode {
    RandomSphere,
    Given { u: Vec<f64> },
    /// Random `u`, plus the companion initial weight `w₀ = Hu/‖Hu‖`.
    HuNormalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub spectrum: SpectrumSpec,
    #[serde(default = "default_u_mode")]
    pub u_mode: UMode,
    /// Conjugate the diagonal `H` by a random orthogonal matrix.
    #[serde(default)]
    pub rotate: bool,
    /// Overrides `c = E[y²]`; defaults to `uᵀHu`.
    #[serde(default)]
    pub c: Option<f64>,
}

fn default_u_mode() -> UMode {
    UMode::RandomSphere
}

impl InstanceSpec {
    pub fn new(spectrum: SpectrumSpec, u_mode: UMode) -> Self {
        Self {
            spectrum,
            u_mode,
            rotate: false,
            c: None,
        }
    }
}

/// The OLS triple `(H, u, g = Hu, c)`.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub h: SymMatrix,
    pub u: Vec<f64>,
    pub g: Vec<f64>,
    pub c: f64,
    /// `uᵀHu`
    pub uhu: f64,
    pub spectrum: SpectralSummary,
    /// Set by [`UMode::HuNormalized`].
    pub w0_hint: Option<Vec<f64>>,
    reduced: OnceLock<ReducedSpectrum>,
}

impl ProblemInstance {
    /// Spectrum computed with the Jacobi solver.
    pub fn new(h: SymMatrix, u: Vec<f64>, c: Option<f64>) -> Result<Self> {
        let spectrum = if h.is_diagonal() {
            SpectralSummary::from_eigenvalues(h.diagonal())?
        } else {
            SpectralSummary::of(&h)?
        };
        Self::with_spectrum(h, u, c, spectrum)
    }

    /// Uses a known spectrum, e.g. for a conjugated diagonal matrix.
    pub fn with_spectrum(h: SymMatrix, u: Vec<f64>, c: Option<f64>, spectrum: SpectralSummary) -> Result<Self> {
        if !h.is_spd() {
            return domain("H must be SPD");
        }
        if u.len() != h.dim() {
            return Err(Error::Dimension {
                expected: h.dim(),
                got: u.len(),
            });
        }
        if u.iter().any(|x| !x.is_finite()) {
            return domain("u has non-finite entries");
        }
        let g = h.mul_vec(&u);
        let uhu = dot(&u, &g);
        let c = match c {
            Some(c) if c < uhu * (1.0 - 1e-12) => {
                return domain(format!("c = {c} is below uᵀHu = {uhu}"));
            }
            Some(c) => c,
            None => uhu,
        };
        Ok(Self {
            h,
            u,
            g,
            c,
            uhu,
            spectrum,
            w0_hint: None,
            reduced: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    /// `H*` and its spectrum, computed on first use.
    pub fn reduced(&self) -> Result<&ReducedSpectrum> {
        if let Some(r) = self.reduced.get() {
            return Ok(r);
        }
        let r = build_h_star(&self.h, &self.u)?;
        Ok(self.reduced.get_or_init(|| r))
    }

    /// `‖u‖_H`
    pub fn u_h_norm(&self) -> f64 {
        self.uhu.sqrt()
    }

    /// Minimum value of both losses, `(c - uᵀHu)/2`.
    pub fn loss_floor(&self) -> f64 {
        0.5 * (self.c - self.uhu)
    }
}

pub fn make_instance(spec: &InstanceSpec, seed: u64) -> Result<ProblemInstance> {
    let eigenvalues = spec.spectrum.eigenvalues()?;
    let d = eigenvalues.len();
    let spectrum = SpectralSummary::from_eigenvalues(eigenvalues.clone())?;
    let diag = SymMatrix::from_diagonal(&eigenvalues)?.into_spd()?;
    let h = if spec.rotate {
        let q = random_orthogonal(&mut stream_rng(seed, stream_id(0, 1)), d);
        diag.conjugate(&q, 1.0)?
    } else {
        diag
    };
    let u = match &spec.u_mode {
        UMode::Given { u } => u.clone(),
        UMode::RandomSphere | UMode::HuNormalized => unit_sphere(&mut stream_rng(seed, stream_id(0, 0)), d),
    };
    let mut p = ProblemInstance::with_spectrum(h, u, spec.c, spectrum)?;
    if spec.u_mode == UMode::HuNormalized {
        let n = norm(&p.g);
        if !(n > 0.0) {
            return domain("Hu/‖Hu‖ undefined for u = 0");
        }
        p.w0_hint = Some(p.g.iter().map(|x| x / n).collect());
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_two_linspace() {
        let spec = InstanceSpec::new(
            SpectrumSpec::Linspace { lambda_min: 1.0, lambda_max: 10000.0, d: 100 },
            UMode::RandomSphere,
        );
        let p = make_instance(&spec, 1).unwrap();
        assert_eq!(p.spectrum.kappa, 10000.0);
        assert_eq!(p.spectrum.lambda_min, 1.0);
        assert!((norm(&p.u) - 1.0).abs() < 1e-14);
        assert!(p.spectrum.is_arithmetic());
    }

    #[test]
    fn spiked_and_explicit() {
        let s = SpectrumSpec::Spiked { d: 4, lambda_big: 10000.0 };
        assert_eq!(s.eigenvalues().unwrap(), vec![1.0, 1.0, 1.0, 10000.0]);
        let spec = InstanceSpec::new(SpectrumSpec::Explicit { eigenvalues: vec![1.0] }, UMode::RandomSphere);
        let p = make_instance(&spec, 0).unwrap();
        assert_eq!(p.spectrum.kappa, 1.0);
        assert_eq!(p.spectrum.eps_opt, 1.0);
    }

    #[test]
    fn logspace_endpoints_exact() {
        let s = SpectrumSpec::Logspace { lambda_min: 1.0, lambda_max: 1e5, d: 100 };
        let ev = s.eigenvalues().unwrap();
        assert_eq!(ev[0], 1.0);
        assert_eq!(ev[99], 1e5);
    }

    #[test]
    fn rejects_nonpositive() {
        let bad = InstanceSpec::new(SpectrumSpec::Explicit { eigenvalues: vec![1.0, 0.0] }, UMode::RandomSphere);
        assert!(make_instance(&bad, 0).is_err());
        let bad = InstanceSpec::new(SpectrumSpec::Linspace { lambda_min: -1.0, lambda_max: 2.0, d: 3 }, UMode::RandomSphere);
        assert!(make_instance(&bad, 0).is_err());
    }

    #[test]
    fn moments_are_consistent() {
        let mut spec = InstanceSpec::new(
            SpectrumSpec::Logspace { lambda_min: 1.0, lambda_max: 100.0, d: 12 },
            UMode::HuNormalized,
        );
        spec.rotate = true;
        let p = make_instance(&spec, 5).unwrap();
        let hu = p.h.mul_vec(&p.u);
        for (a, b) in hu.iter().zip(&p.g) {
            assert!((a - b).abs() <= 1e-12 * norm(&p.g));
        }
        assert_eq!(p.c, p.uhu);
        assert_eq!(p.loss_floor(), 0.0);
        let w0 = p.w0_hint.as_ref().unwrap();
        assert!((norm(w0) - 1.0).abs() < 1e-14);
        assert!(!p.h.is_diagonal());
        assert!(p.reduced().unwrap().kappa_star.unwrap() <= p.spectrum.kappa);
    }

    #[test]
    fn given_u_and_noisy_c() {
        let mut spec = InstanceSpec::new(
            SpectrumSpec::Explicit { eigenvalues: vec![1.0, 2.0] },
            UMode::Given { u: vec![1.0, 0.0] },
        );
        spec.c = Some(3.0);
        let p = make_instance(&spec, 0).unwrap();
        assert_eq!(p.g, vec![1.0, 0.0]);
        assert_eq!(p.loss_floor(), 1.0);
        spec.c = Some(0.5);
        assert!(make_instance(&spec, 0).is_err());
    }

    #[test]
    fn same_seed_same_instance() {
        let spec = InstanceSpec::new(SpectrumSpec::Linspace { lambda_min: 1.0, lambda_max: 5.0, d: 7 }, UMode::RandomSphere);
        assert_eq!(make_instance(&spec, 3).unwrap().u, make_instance(&spec, 3).unwrap().u);
        assert_ne!(make_instance(&spec, 3).unwrap().u, make_instance(&spec, 4).unwrap().u);
    }
}
