//! Single fits and the `FIT.json` report.

use ksfiqr_core::exhaustive::RelaxedPath;
use ksfiqr_core::{
    fit_exhaustive, fit_gumbel, Bandwidth, FitConfig, FitResult, GumbelConfig, KernelFamily,
    KernelSpec, MultiEnvDataset, PenaltyExtension,
};
use serde::{Deserialize, Serialize};

use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    #[default]
    Exhaustive,
    Gumbel,
}

/// A bandwidth as written by users: `"auto"` or a positive number.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BandwidthArg {
    #[default]
    #[serde(with = "auto")]
    Auto,
    Fixed(f64),
}

mod auto {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("auto")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        match String::deserialize(d)?.as_str() {
            "auto" => Ok(()),
            other => Err(de::Error::custom(format!(
                "expected \"auto\" or a number, got \"{other}\""
            ))),
        }
    }
}

impl BandwidthArg {
    pub fn to_core(self) -> Bandwidth {
        match self {
            Self::Auto => Bandwidth::Auto,
            Self::Fixed(h) => Bandwidth::Fixed(h),
        }
    }
}

impl std::str::FromStr for BandwidthArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Self::Auto);
        }
        s.parse()
            .map(Self::Fixed)
            .map_err(|_| format!("bandwidth must be `auto` or a number, got `{s}`"))
    }
}

/// Everything that determines a single fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitRequest {
    pub tau: f64,
    pub gamma: f64,
    pub bandwidth: BandwidthArg,
    pub kernel: KernelFamily,
    pub solver: Solver,
    pub penalty_extension: PenaltyExtension,
    /// Used by the Gumbel solver only.
    pub gumbel: GumbelConfig,
}

impl Default for FitRequest {
    fn default() -> Self {
        Self {
            tau: 0.5,
            gamma: 20.0,
            bandwidth: BandwidthArg::Auto,
            kernel: KernelFamily::Gaussian,
            solver: Solver::Exhaustive,
            penalty_extension: PenaltyExtension::None,
            gumbel: GumbelConfig::default(),
        }
    }
}

impl FitRequest {
    pub fn config(&self) -> FitConfig {
        let mut cfg = FitConfig::new(self.tau, self.gamma)
            .with_kernel(KernelSpec::new(self.kernel))
            .with_extension(self.penalty_extension);
        cfg.bandwidth = self.bandwidth.to_core();
        cfg
    }

    pub fn run(&self, ds: &MultiEnvDataset) -> Result<FitResult> {
        let cfg = self.config();
        Ok(match self.solver {
            Solver::Exhaustive => fit_exhaustive(ds, &cfg)?,
            Solver::Gumbel => fit_gumbel(ds, &cfg, &self.gumbel)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub tau: f64,
    pub gamma: f64,
    /// As requested.
    pub bandwidth: BandwidthArg,
    /// As used, after resolving `auto`.
    pub bandwidth_used: Option<f64>,
    pub kernel: KernelFamily,
    pub penalty_extension: PenaltyExtension,
    pub force_intercept: bool,
    pub environments: usize,
    pub weights: Vec<f64>,
    pub n_per_environment: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverMeta {
    pub kind: String,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub supports_enumerated: Option<usize>,
    /// Supports excluded by their unpenalised lower bound.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub supports_skipped: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gumbel: Option<GumbelConfig>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub relaxed: Option<RelaxedPath>,
}

/// Contents of `FIT.json`. Indices are 0-based with 0 the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub beta: Vec<f64>,
    pub support: Vec<usize>,
    pub objective: f64,
    pub config: ConfigEcho,
    pub env_gradient_norms: Vec<f64>,
    pub solver: SolverMeta,
}

impl FitReport {
    pub fn new(ds: &MultiEnvDataset, req: &FitRequest, fit: &FitResult) -> Self {
        let table = fit.per_support_table.as_ref();
        Self {
            beta: fit.beta.clone(),
            support: fit.support.indices().to_vec(),
            objective: fit.objective,
            config: ConfigEcho {
                tau: req.tau,
                gamma: req.gamma,
                bandwidth: req.bandwidth,
                bandwidth_used: fit.bandwidth,
                kernel: req.kernel,
                penalty_extension: req.penalty_extension,
                force_intercept: true,
                environments: ds.n_envs(),
                weights: ds.weights().to_vec(),
                n_per_environment: ds.envs().iter().map(|e| e.n()).collect(),
            },
            env_gradient_norms: fit.env_gradient_norms.clone(),
            solver: SolverMeta {
                kind: fit.solver.name().to_string(),
                iterations: fit.iterations,
                converged: fit.converged,
                supports_enumerated: table.map(Vec::len),
                supports_skipped: table.map(|t| t.iter().filter(|e| e.skipped).count()),
                gumbel: (req.solver == Solver::Gumbel).then_some(req.gumbel),
                relaxed: fit.relaxed.clone(),
            },
        }
    }
}
