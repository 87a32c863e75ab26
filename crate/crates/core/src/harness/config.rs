//! Experiment configuration: a JSON file, defaults filled per experiment
//! kind, command-line overrides on top.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::analysis::DimScanConfig;
use crate::dynamics::{Fault, Mode, Thinning, DEFAULT_DIV_TOL, DEFAULT_Q_TOL};
use crate::error::{Error, Result};
use crate::model::{InstanceSpec, SpectrumSpec, UMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SingleRun,
    Sweep,
    DimScan,
    Omega,
    ScalingCheck,
    Verify,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SingleRun => "run",
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::DimScan => "dim-scan",
            ExperimentKind::Omega => "omega",
            ExperimentKind::ScalingCheck => "scaling-check",
            ExperimentKind::Verify => "verify",
        }
    }
}

/// Initial weight vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum W0Mode {
    /// Uniform on the unit sphere, drawn from the instance seed.
    RandomSphere,
    /// `Hu / ‖Hu‖`
    HuNormalized,
    Given { w0: Vec<f64> },
}

/// `scale · 10^linspace(lo, hi, n)` or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    Logspace {
        lo: f64,
        hi: f64,
        n: usize,
        #[serde(default = "one")]
        scale: f64,
    },
    Values { values: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            GridSpec::Logspace { lo, hi, n, scale } => crate::logspace(*lo, *hi, *n).into_iter().map(|x| scale * x).collect(),
            GridSpec::Values { values } => values.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunTemplate {
    pub mode: Mode,
    pub eps: f64,
    pub eps_a: f64,
    pub a0: f64,
    pub w0: W0Mode,
    /// Step budget.
    pub k: usize,
    /// Defaults to `1e-10 (1 + ‖g‖)`.
    pub grad_tol: Option<f64>,
    pub q_tol: f64,
    pub div_tol: f64,
    pub verify: bool,
    pub fault: Option<Fault>,
}

impl Default for RunTemplate {
    fn default() -> Self {
        Self {
            mode: Mode::Bngd,
            eps: 1.0,
            eps_a: 1.0,
            a0: 1.0,
            w0: W0Mode::RandomSphere,
            k: 2000,
            grad_tol: None,
            q_tol: DEFAULT_Q_TOL,
            div_tol: DEFAULT_DIV_TOL,
            verify: false,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub eps_a: GridSpec,
    pub eps: GridSpec,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            eps_a: GridSpec::Logspace {
                lo: -10.0,
                hi: 0.0,
                n: 41,
                scale: 1.99,
            },
            eps: GridSpec::Logspace {
                lo: -5.0,
                hi: 16.0,
                n: 43,
                scale: 1.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OmegaSpec {
    pub n_samples: usize,
    /// Write every β₀ sample into the JSON output.
    pub include_samples: bool,
    /// When set, also measure Ω from the final-ε̂ curve of the run template.
    pub curve_eps: Option<GridSpec>,
}

impl Default for OmegaSpec {
    fn default() -> Self {
        Self {
            n_samples: 500,
            include_samples: false,
            curve_eps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingSpec {
    pub cases: usize,
    pub steps: usize,
    pub tolerance: f64,
}

impl Default for ScalingSpec {
    fn default() -> Self {
        Self {
            cases: 100,
            steps: 50,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySpec {
    /// Suites to run; `None` runs all of them, an empty list none.
    pub checks: Option<Vec<String>>,
    pub trajectories: usize,
    pub steps: usize,
    pub max_dim: usize,
    pub interlacing_cases: usize,
    pub saddle_cases: usize,
    pub scaling_cases: usize,
    /// Mutation applied to every verified BNGD trajectory.
    pub fault: Option<Fault>,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            checks: None,
            trajectories: 100,
            steps: 500,
            max_dim: 50,
            interlacing_cases: 1000,
            saddle_cases: 50,
            scaling_cases: 100,
            fault: None,
        }
    }
}

/// The file schema. Every section is optional; `resolve` fills the gaps.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Option<ExperimentKind>,
    pub seed: Option<u64>,
    pub instance: Option<InstanceSpec>,
    pub run: Option<RunTemplate>,
    pub sweep: Option<SweepSpec>,
    pub dim_scan: Option<DimScanConfig>,
    pub omega: Option<OmegaSpec>,
    pub scaling: Option<ScalingSpec>,
    pub verify: Option<VerifySpec>,
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    /// Keep every `thin`-th step after the first 1000.
    pub thin: Option<usize>,
}

/// Flags given on the command line; each one wins over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub thin: Option<usize>,
}

/// Fully explicit configuration; this is what gets echoed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolvedConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub instance: InstanceSpec,
    pub run: RunTemplate,
    pub sweep: Option<SweepSpec>,
    pub dim_scan: Option<DimScanConfig>,
    pub omega: Option<OmegaSpec>,
    pub scaling: Option<ScalingSpec>,
    pub verify: Option<VerifySpec>,
    pub out_dir: PathBuf,
    pub workers: usize,
    pub thin: usize,
}

impl ResolvedConfig {
    pub fn thinning(&self) -> Thinning {
        Thinning {
            every: self.thin,
            ..Thinning::default()
        }
    }
}

/// Verification draws from a fixed master seed unless told otherwise.
pub const DEFAULT_VERIFY_SEED: u64 = 20180527;

fn default_instance() -> InstanceSpec {
    InstanceSpec::new(
        SpectrumSpec::Logspace {
            lambda_min: 1.0,
            lambda_max: 1e5,
            d: 100,
        },
        UMode::RandomSphere,
    )
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Reading a resolved echo back gives the same resolved config.
    pub fn from_resolved(r: &ResolvedConfig) -> Self {
        Self {
            kind: Some(r.kind),
            seed: Some(r.seed),
            instance: Some(r.instance.clone()),
            run: Some(r.run.clone()),
            sweep: r.sweep.clone(),
            dim_scan: r.dim_scan.clone(),
            omega: r.omega.clone(),
            scaling: r.scaling.clone(),
            verify: r.verify.clone(),
            out_dir: Some(r.out_dir.clone()),
            workers: Some(r.workers),
            thin: Some(r.thin),
        }
    }

    pub fn resolve(self, kind: ExperimentKind, ov: &Overrides) -> Result<ResolvedConfig> {
        if let Some(k) = self.kind {
            if k != kind {
                return Err(Error::Config(format!(
                    "config is for `{}` but the `{}` command was invoked",
                    k.name(),
                    kind.name()
                )));
            }
        }
        let seed = match (ov.seed, self.seed, kind) {
            (Some(s), _, _) | (None, Some(s), _) => s,
            (None, None, ExperimentKind::Verify) => DEFAULT_VERIFY_SEED,
            (None, None, _) => {
                return Err(Error::Config(format!("`{}` samples random draws; --seed is required", kind.name())));
            }
        };
        let thin = ov.thin.or(self.thin).unwrap_or(Thinning::default().every);
        if thin == 0 {
            return Err(Error::Config("thin must be positive".into()));
        }
        let run = self.run.unwrap_or_default();
        let r = ResolvedConfig {
            kind,
            seed,
            instance: self.instance.unwrap_or_else(default_instance),
            sweep: (kind == ExperimentKind::Sweep).then(|| self.sweep.unwrap_or_default()),
            dim_scan: (kind == ExperimentKind::DimScan).then(|| self.dim_scan.unwrap_or_default()),
            omega: (kind == ExperimentKind::Omega).then(|| self.omega.unwrap_or_default()),
            scaling: (kind == ExperimentKind::ScalingCheck).then(|| self.scaling.unwrap_or_default()),
            verify: (kind == ExperimentKind::Verify).then(|| self.verify.unwrap_or_default()),
            out_dir: ov
                .out_dir
                .clone()
                .or(self.out_dir)
                .unwrap_or_else(|| PathBuf::from("out").join(kind.name())),
            workers: ov.workers.or(self.workers).unwrap_or(0),
            thin,
            run,
        };
        if r.run.k < 1 {
            return Err(Error::Config("run.k must be at least 1".into()));
        }
        Ok(r)
    }
}
