//! Single GD and BNGD steps.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::model::ProblemInstance;
use crate::spectral::{dot, h_norm};

/// Mutation hooks for exercising the verification suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// `a' = a - ε_a(y/σ - a)`
    FlipAUpdate,
    /// `w' = w - ε(a/σ)He`
    FlipWStep,
}

/// `(I - εH)w + εg`
pub fn gd_step(p: &ProblemInstance, w: &[f64], eps: f64) -> Vec<f64> {
    let hw = p.h.mul_vec(w);
    w.iter()
        .zip(&hw)
        .zip(&p.g)
        .map(|((wi, hwi), gi)| wi - eps * hwi + eps * gi)
        .collect()
}

/// `e = u - (wᵀg/σ²) w` and `q = ‖e‖²_H`.
pub fn residual_e(p: &ProblemInstance, w: &[f64]) -> Result<(Vec<f64>, f64)> {
    let s2 = p.h.quad_form(w);
    if !(s2 > 0.0) || !s2.is_finite() {
        return domain("residual needs wᵀHw > 0");
    }
    let t = dot(w, &p.g) / s2;
    let e: Vec<f64> = p.u.iter().zip(w).map(|(ui, wi)| ui - t * wi).collect();
    let q = p.h.quad_form(&e);
    Ok((e, q))
}

/// `ε̂ = ε (a/σ)(wᵀg/σ²)`
pub fn effective_lr(p: &ProblemInstance, a: f64, w: &[f64], eps: f64) -> Result<f64> {
    let s2 = p.h.quad_form(w);
    if !(s2 > 0.0) || !s2.is_finite() {
        return domain("effective learning rate needs wᵀHw > 0");
    }
    Ok(eps * (a / s2.sqrt()) * (dot(w, &p.g) / s2))
}

/// Every scalar the dynamics and the diagnostics need at one state `(a, w)`.
#[derive(Debug, Clone)]
pub(crate) struct Eval {
    pub sigma: f64,
    pub y: f64,
    pub w_norm_sq: f64,
    /// `a / σ`
    pub s: f64,
    /// `y / σ²`
    pub t: f64,
    pub hw: Vec<f64>,
    /// `He = g - t Hw`
    pub he: Vec<f64>,
    pub he_norm_sq: f64,
    pub q: f64,
    pub eps_hat: f64,
    pub beta: f64,
    pub delta: f64,
    /// `∂J/∂a`
    pub da: f64,
}

impl Eval {
    pub fn new(p: &ProblemInstance, a: f64, w: &[f64], eps: f64) -> Result<Self> {
        let hw = p.h.mul_vec(w);
        Self::with_hw(p, a, w, hw, eps)
    }

    pub fn with_hw(p: &ProblemInstance, a: f64, w: &[f64], hw: Vec<f64>, eps: f64) -> Result<Self> {
        let (mut s2, mut y, mut wn) = (0.0, 0.0, 0.0);
        for ((wi, hwi), gi) in w.iter().zip(&hw).zip(&p.g) {
            s2 += wi * hwi;
            y += wi * gi;
            wn += wi * wi;
        }
        if !(s2 > 0.0) || !s2.is_finite() {
            return domain("σ = sqrt(wᵀHw) is zero or non-finite");
        }
        let sigma = s2.sqrt();
        let t = y / s2;
        let s = a / sigma;
        let he: Vec<f64> = p.g.iter().zip(&hw).map(|(gi, hwi)| gi - t * hwi).collect();
        let (mut q, mut hn) = (0.0, 0.0);
        for ((ui, wi), hei) in p.u.iter().zip(w).zip(&he) {
            q += (ui - t * wi) * hei;
            hn += hei * hei;
        }
        let q = q.max(0.0);
        Ok(Self {
            sigma,
            y,
            w_norm_sq: wn,
            s,
            t,
            eps_hat: eps * s * t,
            beta: s * s * wn * hn,
            delta: p.spectrum.lambda_max * eps * a.abs() * q.sqrt() / s2,
            da: a - y / sigma,
            hw,
            he,
            he_norm_sq: hn,
            q,
        })
    }

    /// `‖w‖·‖∂J/∂w‖`, invariant under `w → r w`.
    pub fn scaled_grad_w(&self) -> f64 {
        (self.s.abs() * self.he_norm_sq.sqrt()) * self.w_norm_sq.sqrt()
    }

    /// `‖u - (a/σ)w‖²_H`, through `H(u - (a/σ)w) = g - (a/σ)Hw`.
    pub fn e_tilde_sq(&self, p: &ProblemInstance, w: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (((ui, wi), gi), hwi) in p.u.iter().zip(w).zip(&p.g).zip(&self.hw) {
            acc += (ui - self.s * wi) * (gi - self.s * hwi);
        }
        acc.max(0.0)
    }

    pub fn next(&self, a: f64, w: &[f64], eps: f64, eps_a: f64, fault: Option<Fault>) -> (f64, Vec<f64>) {
        let da = eps_a * (self.y / self.sigma - a);
        let a_next = match fault {
            Some(Fault::FlipAUpdate) => a - da,
            _ => a + da,
        };
        let c = match fault {
            Some(Fault::FlipWStep) => -eps * self.s,
            _ => eps * self.s,
        };
        let w_next = w.iter().zip(&self.he).map(|(wi, hei)| wi + c * hei).collect();
        (a_next, w_next)
    }
}

/// One BNGD step from `(a, w)`, with the diagnostics of the pre-step state.
pub fn bngd_step(
    p: &ProblemInstance,
    a: f64,
    w: &[f64],
    cfg: &super::RunConfig,
) -> Result<(f64, Vec<f64>, super::StepDiagnostics)> {
    let ev = Eval::new(p, a, w, cfg.eps)?;
    let diag = super::StepDiagnostics::from_eval(p, 0, a, w, &ev);
    let (a2, w2) = ev.next(a, w, cfg.eps, cfg.eps_a, cfg.fault);
    Ok((a2, w2, diag))
}

/// Lean BNGD iterator: yields `(k, a_k, ‖e_k‖_H, ε̂_k)` without recording,
/// stopping on non-finite state. For long scans where only a few scalars
/// per step matter.
pub struct Stepper<'a> {
    p: &'a ProblemInstance,
    eps: f64,
    eps_a: f64,
    a: f64,
    w: Vec<f64>,
    k: usize,
    done: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct LeanStep {
    pub k: usize,
    pub a: f64,
    pub e_h_norm: f64,
    pub eps_hat: f64,
    pub w_norm_sq: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(p: &'a ProblemInstance, eps: f64, eps_a: f64, a0: f64, w0: Vec<f64>) -> Self {
        Self {
            p,
            eps,
            eps_a,
            a: a0,
            w: w0,
            k: 0,
            done: false,
        }
    }

    pub fn state(&self) -> (f64, &[f64]) {
        (self.a, &self.w)
    }
}

impl Iterator for Stepper<'_> {
    type Item = LeanStep;

    fn next(&mut self) -> Option<LeanStep> {
        if self.done {
            return None;
        }
        let ev = match Eval::new(self.p, self.a, &self.w, self.eps) {
            Ok(ev) if ev.q.is_finite() && ev.eps_hat.is_finite() => ev,
            _ => {
                self.done = true;
                return None;
            }
        };
        let out = LeanStep {
            k: self.k,
            a: self.a,
            e_h_norm: ev.q.sqrt(),
            eps_hat: ev.eps_hat,
            w_norm_sq: ev.w_norm_sq,
        };
        let (a, w) = ev.next(self.a, &self.w, self.eps, self.eps_a, None);
        self.a = a;
        self.w = w;
        self.k += 1;
        Some(out)
    }
}

/// `‖x‖_H` of `x = u - t w`.
pub(crate) fn h_norm_of_affine(p: &ProblemInstance, t: f64, w: &[f64]) -> f64 {
    let x: Vec<f64> = p.u.iter().zip(w).map(|(ui, wi)| ui - t * wi).collect();
    h_norm(&p.h, &x)
}
