//! Batch-normalized gradient descent on ordinary least squares.
//!
//! The crate is organized bottom-up:
//!
//! - [`spectral`]: dense symmetric matrices, Jacobi eigensolver, the reduced matrix `H*`.
//! - [`model`]: the OLS instance, the GD and BN losses, gradients, Hessians, critical points.
//! - [`dynamics`]: GD and BNGD iterations with per-step diagnostics and invariant checks.
//! - [`analysis`]: scaling equivalence, learning-rate sweeps, effective-step asymptotics, Ω.
//! - [`harness`]: config-driven experiment commands and the verification suite.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod io;
pub mod model;
pub mod par;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};

/// `n` base-10 log-spaced points from `10^lo` to `10^hi`, endpoints included.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linspace(lo, hi, n).into_iter().map(|x| 10f64.powf(x)).collect()
}

/// `n` evenly spaced points from `lo` to `hi`, endpoints included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i + 1 == n { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}
