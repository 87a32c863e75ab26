use super::ProblemInstance;
use crate::error::{domain, Result};
use crate::spectral::{dot, SymMatrix};

/// `J₀(w) = c/2 - wᵀg + ½wᵀHw`
pub fn loss_gd(p: &ProblemInstance, w: &[f64]) -> f64 {
    0.5 * p.c - dot(w, &p.g) + 0.5 * p.h.quad_form(w)
}

pub(crate) fn sigma_y(p: &ProblemInstance, w: &[f64]) -> Result<(f64, f64)> {
    let sigma = p.h.quad_form(w).sqrt();
    if !(sigma > 0.0) || !sigma.is_finite() {
        return domain("σ = sqrt(wᵀHw) is zero or non-finite");
    }
    Ok((sigma, dot(w, &p.g)))
}

/// `J(a, w) = c/2 - (wᵀg/σ) a + ½a²`, evaluated literally.
pub fn loss_bn_direct(p: &ProblemInstance, a: f64, w: &[f64]) -> Result<f64> {
    let (sigma, y) = sigma_y(p, w)?;
    Ok(0.5 * p.c - y / sigma * a + 0.5 * a * a)
}

/// `J(a, w) = ½‖u - (a/σ)w‖²_H + (c - uᵀHu)/2`.
///
/// Same value as [`loss_bn_direct`] but without the cancellation between
/// `c/2` and the other terms near the minimum.
pub fn loss_bn(p: &ProblemInstance, a: f64, w: &[f64]) -> Result<f64> {
    let (sigma, _) = sigma_y(p, w)?;
    let t = a / sigma;
    let r: Vec<f64> = p.u.iter().zip(w).map(|(ui, wi)| ui - t * wi).collect();
    Ok(0.5 * p.h.quad_form(&r) + p.loss_floor())
}

/// `(∂J/∂a, ∂J/∂w) = (a - y/σ, -(a/σ)g + (a y/σ³)Hw)`
pub fn grad_bn(p: &ProblemInstance, a: f64, w: &[f64]) -> Result<(f64, Vec<f64>)> {
    let (sigma, y) = sigma_y(p, w)?;
    let hw = p.h.mul_vec(w);
    let s = a / sigma;
    let t = a * y / (sigma * sigma * sigma);
    let dw = p.g.iter().zip(&hw).map(|(gi, hwi)| -s * gi + t * hwi).collect();
    Ok((a - y / sigma, dw))
}

/// Hessian of `J` in the variables `(a, w)`, a `(d+1)×(d+1)` matrix with
/// `a` first.
pub fn hessian_bn(p: &ProblemInstance, a: f64, w: &[f64]) -> Result<SymMatrix> {
    let d = p.dim();
    let (sigma, y) = sigma_y(p, w)?;
    let hw = p.h.mul_vec(w);
    let s2 = sigma * sigma;
    let n = d + 1;
    let mut m = vec![0.0; n * n];
    m[0] = 1.0;
    for i in 0..d {
        let a21 = -(p.g[i] - y / s2 * hw[i]) / sigma;
        m[(i + 1) * n] = a21;
        m[i + 1] = a21;
    }
    let f = a / (s2 * sigma);
    for i in 0..d {
        for j in 0..d {
            m[(i + 1) * n + (j + 1)] = f
                * (y * p.h.get(i, j) + hw[i] * p.g[j] + p.g[i] * hw[j] - 3.0 * y / s2 * hw[i] * hw[j]);
        }
    }
    SymMatrix::new(n, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_instance, InstanceSpec, SpectrumSpec, UMode};
    use crate::rng::{gaussian_vec, stream_rng};
    use crate::spectral::norm;
    use proptest::prelude::*;

    fn diag12() -> ProblemInstance {
        let spec = InstanceSpec::new(
            SpectrumSpec::Explicit { eigenvalues: vec![1.0, 2.0] },
            UMode::Given { u: vec![1.0, 0.0] },
        );
        make_instance(&spec, 0).unwrap()
    }

    fn random_instance(seed: u64, d: usize) -> ProblemInstance {
        let mut spec = InstanceSpec::new(
            SpectrumSpec::Logspace { lambda_min: 0.5, lambda_max: 20.0, d },
            UMode::Given { u: gaussian_vec(&mut stream_rng(seed, 9), d) },
        );
        spec.rotate = true;
        make_instance(&spec, seed).unwrap()
    }

    #[test]
    fn gd_loss_examples() {
        let p = diag12();
        assert_eq!(loss_gd(&p, &[1.0, 0.0]), 0.0);
        assert_eq!(loss_gd(&p, &[0.0, 0.0]), 0.5);
        assert_eq!(loss_gd(&p, &[0.0, 1.0]), 1.5);
    }

    #[test]
    fn bn_loss_examples() {
        let p = diag12();
        assert_eq!(loss_bn_direct(&p, 1.0, &[0.0, 1.0]).unwrap(), 1.0);
        assert!((loss_bn(&p, 1.0, &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(loss_bn(&p, 1.0, &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(loss_bn_direct(&p, 0.0, &[0.3, -0.7]).unwrap(), p.c / 2.0);
        assert!(loss_bn(&p, 1.0, &[0.0, 0.0]).is_err());
        assert!(grad_bn(&p, 1.0, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn gradient_vanishes_at_minimizer_and_saddle() {
        let p = random_instance(1, 6);
        let a = p.uhu.sqrt();
        let (da, dw) = grad_bn(&p, a, &p.u).unwrap();
        assert!(da.abs() < 1e-14 && norm(&dw) < 1e-13);

        let q = diag12();
        let (da, dw) = grad_bn(&q, 0.0, &[0.0, 1.0]).unwrap();
        assert_eq!(da, 0.0);
        assert!(dw.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn minimizer_family() {
        let p = random_instance(2, 5);
        for s in [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0_f64] {
            let w: Vec<f64> = p.u.iter().map(|x| s * x).collect();
            let (da, dw) = grad_bn(&p, s.signum() * p.uhu.sqrt(), &w).unwrap();
            assert!((da * da + dw.iter().map(|x| x * x).sum::<f64>()).sqrt() <= 1e-10);
        }
    }

    fn fd_grad(p: &ProblemInstance, a: f64, w: &[f64], h: f64) -> (f64, Vec<f64>) {
        let f = |a: f64, w: &[f64]| loss_bn_direct(p, a, w).unwrap();
        let da = (f(a + h, w) - f(a - h, w)) / (2.0 * h);
        let dw = (0..w.len())
            .map(|i| {
                let mut wp = w.to_vec();
                let mut wm = w.to_vec();
                wp[i] += h;
                wm[i] -= h;
                (f(a, &wp) - f(a, &wm)) / (2.0 * h)
            })
            .collect();
        (da, dw)
    }

    #[test]
    fn gradient_matches_finite_differences_d5() {
        let p = random_instance(3, 5);
        let w = gaussian_vec(&mut stream_rng(3, 10), 5);
        let (da, dw) = grad_bn(&p, 0.7, &w).unwrap();
        let (fa, fw) = fd_grad(&p, 0.7, &w, 1e-6);
        assert!((da - fa).abs() <= 1e-6);
        for (x, y) in dw.iter().zip(&fw) {
            assert!((x - y).abs() <= 1e-6);
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let p = random_instance(4, 4);
        let w = gaussian_vec(&mut stream_rng(4, 10), 4);
        let a = -0.4;
        let hess = hessian_bn(&p, a, &w).unwrap();
        let h = 1e-6;
        let grad = |a: f64, w: &[f64]| {
            let (da, dw) = grad_bn(&p, a, w).unwrap();
            std::iter::once(da).chain(dw).collect::<Vec<f64>>()
        };
        for j in 0..5 {
            let (mut ap, mut am) = (a, a);
            let (mut wp, mut wm) = (w.clone(), w.clone());
            if j == 0 {
                ap += h;
                am -= h;
            } else {
                wp[j - 1] += h;
                wm[j - 1] -= h;
            }
            let gp = grad(ap, &wp);
            let gm = grad(am, &wm);
            for i in 0..5 {
                let fd = (gp[i] - gm[i]) / (2.0 * h);
                assert!((hess.get(i, j) - fd).abs() <= 1e-5, "({i},{j}) {} vs {fd}", hess.get(i, j));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn gradient_checks(seed in 0u64..10_000, d in 1usize..=10, a in -3.0f64..3.0) {
            let p = random_instance(seed, d);
            let w = gaussian_vec(&mut stream_rng(seed, 11), d);
            let (da, dw) = grad_bn(&p, a, &w).unwrap();
            let (fa, fw) = fd_grad(&p, a, &w, 1e-6);
            prop_assert!((da - fa).abs() <= 1e-6);
            for (x, y) in dw.iter().zip(&fw) {
                prop_assert!((x - y).abs() <= 1e-6, "{} vs {}", x, y);
            }
            // floor at a few ulps of the two terms that cancel inside dw
            let (sigma, y) = sigma_y(&p, &w).unwrap();
            let terms = (a / sigma).abs() * norm(&p.g) + (a * y / sigma.powi(3)).abs() * norm(&p.h.mul_vec(&w));
            prop_assert!(dot(&w, &dw).abs() <= norm(&w) * (1e-12 * norm(&dw) + 4.0 * f64::EPSILON * terms));
            let direct = loss_bn_direct(&p, a, &w).unwrap();
            let residual = loss_bn(&p, a, &w).unwrap();
            prop_assert!((direct - residual).abs() <= 1e-12 * direct.abs().max(p.c));
        }
    }
}
