//! Pass/fail tallies for the per-step identities and bounds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// `u - (y/σ²)w' = (I - ε̂H)e`, residual in H-norm over `‖u‖_H`.
    ResidualIdentity,
    /// `‖e'‖_H ≤ ρ(I - ε̂H)‖e‖_H`
    ResidualContraction,
    /// `(1-δ)‖e'‖_H ≤ (ρ*(I - ε̂H*) + δ)‖e‖_H` when `δ < 1`.
    ReducedContraction,
    /// `‖w'‖² = ‖w‖² + ε²(a/σ)²‖He‖²`
    NormGrowth,
    /// `‖w'‖ ≥ ‖w‖`
    NormMonotone,
    /// `‖u - (a/σ)w‖²_H = q + (a - y/σ)²`
    LossIdentity,
    /// `|a_k| ≤ |a₀| + 2‖u‖_H / (1 - |1 - ε_a|)`
    ABounded,
    /// `‖u - w'‖ ≤ ρ(I - εH)‖u - w‖` for GD below `ε_max`.
    GdContraction,
    /// BNGD never diverges.
    NoDivergence,
}

impl Check {
    pub const ALL: [Check; 9] = [
        Check::ResidualIdentity,
        Check::ResidualContraction,
        Check::ReducedContraction,
        Check::NormGrowth,
        Check::NormMonotone,
        Check::LossIdentity,
        Check::ABounded,
        Check::GdContraction,
        Check::NoDivergence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::ResidualIdentity => "residual_identity",
            Check::ResidualContraction => "residual_contraction",
            Check::ReducedContraction => "reduced_contraction",
            Check::NormGrowth => "norm_growth",
            Check::NormMonotone => "norm_monotone",
            Check::LossIdentity => "loss_identity",
            Check::ABounded => "a_bounded",
            Check::GdContraction => "gd_contraction",
            Check::NoDivergence => "no_divergence",
        }
    }

    pub fn from_name(name: &str) -> Option<Check> {
        Check::ALL.into_iter().find(|c| c.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub checked: u64,
    pub violations: u64,
    /// Largest measured value (residual, or excess of lhs over rhs).
    pub worst: Option<f64>,
    pub tolerance: f64,
}

impl Tally {
    pub fn new(tolerance: f64) -> Self {
        Self {
            checked: 0,
            violations: 0,
            worst: None,
            tolerance,
        }
    }

    /// Counts a violation when `value > tolerance` or `value` is NaN.
    pub fn record(&mut self, value: f64) {
        self.checked += 1;
        if !(value <= self.tolerance) {
            self.violations += 1;
        }
        self.worst = Some(match self.worst {
            Some(w) if !(value > w) && !value.is_nan() => w,
            _ => value,
        });
    }

    pub fn merge(&mut self, o: &Tally) {
        self.checked += o.checked;
        self.violations += o.violations;
        self.worst = match (self.worst, o.worst) {
            (Some(a), Some(b)) => Some(if b > a || b.is_nan() { b } else { a }),
            (a, b) => a.or(b),
        };
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub tallies: BTreeMap<Check, Tally>,
}

impl InvariantReport {
    pub fn record(&mut self, check: Check, value: f64, tolerance: f64) {
        self.tallies.entry(check).or_insert_with(|| Tally::new(tolerance)).record(value);
    }

    pub fn merge(&mut self, other: &InvariantReport) {
        for (check, o) in &other.tallies {
            self.tallies.entry(*check).or_insert_with(|| Tally::new(o.tolerance)).merge(o);
        }
    }

    pub fn violations(&self, check: Check) -> u64 {
        self.tallies.get(&check).map_or(0, |t| t.violations)
    }

    pub fn checked(&self, check: Check) -> u64 {
        self.tallies.get(&check).map_or(0, |t| t.checked)
    }

    pub fn worst(&self, check: Check) -> Option<f64> {
        self.tallies.get(&check).and_then(|t| t.worst)
    }

    pub fn passed(&self) -> bool {
        self.tallies.values().all(Tally::passed)
    }
}
