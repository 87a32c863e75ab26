//! The (ε_a, ε) sweep grid with its four-color cell classification.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::dynamics::{run, Mode, RunConfig, Thinning};
use crate::error::{domain, Result};
use crate::model::ProblemInstance;
use crate::par::Executor;

/// Lower edge of the near-optimal band, as a fraction of `ε_opt`.
pub const BAND_FACTOR: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellColor {
    NearOptAndBetter,
    NearOptOnly,
    BetterOnly,
    Neither,
}

impl CellColor {
    pub fn name(self) -> &'static str {
        match self {
            CellColor::NearOptAndBetter => "near_opt_and_better",
            CellColor::NearOptOnly => "near_opt_only",
            CellColor::BetterOnly => "better_only",
            CellColor::Neither => "neither",
        }
    }
}

/// `0.8 ε_opt < ε̂ < ε_opt / 0.8`
pub fn near_opt(eps_hat: f64, eps_opt: f64) -> bool {
    BAND_FACTOR * eps_opt < eps_hat && eps_hat < eps_opt / BAND_FACTOR
}

pub fn classify(loss_bngd: f64, loss_gd_opt: f64, eps_hat: f64, eps_opt: f64) -> CellColor {
    match (near_opt(eps_hat, eps_opt), loss_bngd <= loss_gd_opt) {
        (true, true) => CellColor::NearOptAndBetter,
        (true, false) => CellColor::NearOptOnly,
        (false, true) => CellColor::BetterOnly,
        (false, false) => CellColor::Neither,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub eps_a: f64,
    pub eps: f64,
    pub final_loss_bngd: f64,
    pub final_loss_gd_opt: f64,
    pub eps_hat_final: f64,
    pub color: CellColor,
    /// Run outcome, or the error message of a failed cell.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub eps_a_values: Vec<f64>,
    pub eps_values: Vec<f64>,
    pub eps_opt: f64,
    pub k: usize,
    pub baseline_loss: f64,
    /// Row-major in ε: cell `(i, j)` is `cells[i * eps_a_values.len() + j]`
    /// for `eps_values[i]`, `eps_a_values[j]`.
    pub cells: Vec<CellResult>,
}

/// Connected run of near-opt-and-better cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandExtent {
    pub cells: usize,
    pub eps_lo: f64,
    pub eps_hi: f64,
    /// Number of ε rows spanned times the grid step, in decades.
    pub decades: f64,
}

impl SweepGrid {
    pub fn cell(&self, i_eps: usize, j_eps_a: usize) -> &CellResult {
        &self.cells[i_eps * self.eps_a_values.len() + j_eps_a]
    }

    /// Recomputes every color from the stored scalars.
    pub fn recolor(&self) -> Vec<CellColor> {
        self.cells
            .iter()
            .map(|c| classify(c.final_loss_bngd, c.final_loss_gd_opt, c.eps_hat_final, self.eps_opt))
            .collect()
    }

    pub fn count(&self, color: CellColor) -> usize {
        self.cells.iter().filter(|c| c.color == color).count()
    }

    /// Largest 4-connected component of near-opt-and-better cells.
    pub fn band_extent(&self) -> Option<BandExtent> {
        let (ni, nj) = (self.eps_values.len(), self.eps_a_values.len());
        let good = |i: usize, j: usize| self.cell(i, j).color == CellColor::NearOptAndBetter;
        let mut seen = vec![false; ni * nj];
        let mut best: Option<(usize, usize, usize)> = None;
        for start in 0..ni * nj {
            if seen[start] || !good(start / nj, start % nj) {
                continue;
            }
            let (mut size, mut lo, mut hi) = (0, usize::MAX, 0);
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            while let Some(idx) = queue.pop_front() {
                let (i, j) = (idx / nj, idx % nj);
                size += 1;
                lo = lo.min(i);
                hi = hi.max(i);
                let mut push = |ii: usize, jj: usize| {
                    let n = ii * nj + jj;
                    if !seen[n] && good(ii, jj) {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                };
                if i > 0 {
                    push(i - 1, j);
                }
                if i + 1 < ni {
                    push(i + 1, j);
                }
                if j > 0 {
                    push(i, j - 1);
                }
                if j + 1 < nj {
                    push(i, j + 1);
                }
            }
            if best.is_none_or(|(s, _, _)| size > s) {
                best = Some((size, lo, hi));
            }
        }
        best.map(|(cells, lo, hi)| {
            let step = if ni > 1 {
                (self.eps_values[ni - 1] / self.eps_values[0]).log10().abs() / (ni - 1) as f64
            } else {
                0.0
            };
            BandExtent {
                cells,
                eps_lo: self.eps_values[lo],
                eps_hi: self.eps_values[hi],
                decades: (hi - lo + 1) as f64 * step,
            }
        })
    }
}

/// One BNGD run per cell from the shared `(w0, a0)`, against GD at `ε_opt`
/// for the same `k` steps. Per-cell errors end up in `status`.
pub fn sweep(
    p: &ProblemInstance,
    eps_a_grid: &[f64],
    eps_grid: &[f64],
    w0: &[f64],
    a0: f64,
    k: usize,
    exec: &Executor,
) -> Result<SweepGrid> {
    if eps_a_grid.is_empty() || eps_grid.is_empty() {
        return domain("sweep grids must be non-empty");
    }
    if k < 1 {
        return domain("k must be at least 1");
    }
    let eps_opt = p.spectrum.eps_opt;
    let template = RunConfig::new(p, eps_opt, 1.0, a0, w0.to_vec())
        .max_iters(k)
        .thinning(Thinning::final_only());
    let baseline_loss = run(p, &template, Mode::Gd)?.final_step.loss;

    let nj = eps_a_grid.len();
    let cells = exec.map(eps_grid.len() * nj, |idx| {
        let (eps, eps_a) = (eps_grid[idx / nj], eps_a_grid[idx % nj]);
        let mut cfg = template.clone();
        cfg.eps = eps;
        cfg.eps_a = eps_a;
        let (loss, eps_hat, status) = match run(p, &cfg, Mode::Bngd) {
            Ok(t) => (t.final_step.loss, t.final_step.eps_hat, outcome_name(&t.outcome)),
            Err(e) => (f64::NAN, f64::NAN, format!("error: {e}")),
        };
        CellResult {
            eps_a,
            eps,
            final_loss_bngd: loss,
            final_loss_gd_opt: baseline_loss,
            eps_hat_final: eps_hat,
            color: classify(loss, baseline_loss, eps_hat, eps_opt),
            status,
        }
    });
    Ok(SweepGrid {
        eps_a_values: eps_a_grid.to_vec(),
        eps_values: eps_grid.to_vec(),
        eps_opt,
        k,
        baseline_loss,
        cells,
    })
}

fn outcome_name(o: &crate::dynamics::Outcome) -> String {
    serde_json::to_value(o)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}
