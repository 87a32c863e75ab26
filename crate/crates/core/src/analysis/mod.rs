//! Experiment-level analytics built on top of single runs.

pub mod accel;
pub mod curve;
pub mod dim_scan;
pub mod ode;
pub mod omega;
pub mod scaling;
pub mod sweep;

pub use accel::{best_rate, late_rate, rate_at, RateReport};
pub use curve::{eps_hat_curve, loglog_slope, CurvePoint};
pub use dim_scan::{dim_scan, final_eps_hat, loglog_regression, DimScanConfig, DimScanRow};
pub use ode::{ode_predict, OdeApprox};
pub use omega::{
    band_width, beta0, beta0_diagonal, beta_bar_mc, lower_bound_arithmetic, lower_bound_generic, omega_measured,
    BandWidth, OmegaEstimate,
};
pub use scaling::{verify_scaling, ScalingTransform, ScalingVariant};
pub use sweep::{classify, near_opt, sweep, BandExtent, CellColor, CellResult, SweepGrid};
