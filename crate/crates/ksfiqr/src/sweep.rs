//! Replication sweeps over `(n, τ)` grids of a benchmark model.
//!
//! Replication `r` uses seed `base_seed + r` for both data generation and
//! the Gumbel solver. Rows are emitted in (n, τ, replication, estimator)
//! order whatever the number of worker threads.

use std::io::Write;
use std::time::Instant;

use ksfiqr_core::baselines::{fit_eills, fit_pooled_ls_result, fit_pooled_qr};
use ksfiqr_core::metrics::{pooled_covariance, selection_metrics};
use ksfiqr_core::scm::{ModelId, ScmTruth};
use ksfiqr_core::{FitResult, GumbelConfig, KernelFamily, MultiEnvDataset, PenaltyExtension};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::report::{BandwidthArg, FitRequest, Solver};
use crate::{format_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// The invariance quantile estimator, fitted with [`SweepSpec::solver`].
    Ksfiqr,
    Eills,
    PooledLs,
    PooledQr,
}

fn default_tau_grid() -> Vec<f64> {
    vec![0.5]
}

fn default_gamma() -> f64 {
    20.0
}

fn default_replications() -> usize {
    50
}

fn default_estimators() -> Vec<Estimator> {
    vec![Estimator::Ksfiqr, Estimator::Eills]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// `1i`, `1ii`, `2` or `3`.
    pub model: String,
    /// Threshold quantile of Model 3.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    pub n_grid: Vec<usize>,
    #[serde(default = "default_tau_grid")]
    pub tau_grid: Vec<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Estimator>,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub bandwidth: BandwidthArg,
    #[serde(default = "default_kernel")]
    pub kernel: KernelFamily,
    #[serde(default)]
    pub penalty_extension: PenaltyExtension,
    /// Gumbel settings; the seed is replaced per replication.
    #[serde(default)]
    pub gumbel: GumbelConfig,
    /// Count the intercept in the ℓ₂ errors.
    #[serde(default)]
    pub include_intercept: bool,
    /// Fill `runtime_ms`. Off by default because timings break
    /// byte-for-byte reproducibility.
    #[serde(default)]
    pub timing: bool,
    /// Where the CLI writes the metrics table when `--out` is not given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

fn default_kernel() -> KernelFamily {
    KernelFamily::Gaussian
}

impl SweepSpec {
    /// Default protocol for `model` over `n_grid`.
    pub fn new(model: &str, n_grid: Vec<usize>) -> Self {
        Self {
            model: model.to_string(),
            q: None,
            n_grid,
            tau_grid: default_tau_grid(),
            gamma: default_gamma(),
            replications: default_replications(),
            base_seed: 0,
            estimators: default_estimators(),
            solver: Solver::Exhaustive,
            bandwidth: BandwidthArg::Auto,
            kernel: default_kernel(),
            penalty_extension: PenaltyExtension::None,
            gumbel: GumbelConfig::default(),
            include_intercept: false,
            timing: false,
            out: None,
        }
    }

    pub fn model_id(&self) -> Result<ModelId> {
        Ok(ModelId::from_label(&self.model, self.q)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.model_id()?;
        if self.n_grid.is_empty() || self.tau_grid.is_empty() {
            return Err(format_err("n_grid and tau_grid must be nonempty"));
        }
        if self.n_grid.contains(&0) {
            return Err(format_err("sample sizes must be positive"));
        }
        if self.replications == 0 {
            return Err(format_err("replications must be at least 1"));
        }
        if self.estimators.is_empty() {
            return Err(format_err("at least one estimator is required"));
        }
        for &tau in &self.tau_grid {
            self.request(tau, 0).config().validate()?;
        }
        self.gumbel.validate()?;
        Ok(())
    }

    fn request(&self, tau: f64, replication: usize) -> FitRequest {
        FitRequest {
            tau,
            gamma: self.gamma,
            bandwidth: self.bandwidth,
            kernel: self.kernel,
            solver: self.solver,
            penalty_extension: self.penalty_extension,
            gumbel: self.gumbel.with_seed(self.seed(replication)),
        }
    }

    pub fn seed(&self, replication: usize) -> u64 {
        self.base_seed.wrapping_add(replication as u64)
    }
}

/// One fitted estimator on one replication. Metric fields are empty when
/// the fit failed; `error` then carries the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub model: String,
    pub n: usize,
    pub tau: f64,
    pub gamma: f64,
    pub replication: usize,
    pub seed: u64,
    pub solver: String,
    pub l2_raw: Option<f64>,
    pub l2_sigma: Option<f64>,
    pub n_in_sstar: Option<usize>,
    pub n_in_g: Option<usize>,
    /// Selected covariates as `1;2;3`.
    pub support: Option<String>,
    pub runtime_ms: Option<u64>,
    pub error: Option<String>,
}

impl MetricsRow {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

struct Job {
    n: usize,
    tau: f64,
    replication: usize,
}

fn estimator_label(est: Estimator, solver: Solver) -> &'static str {
    match (est, solver) {
        (Estimator::Ksfiqr, Solver::Exhaustive) => "exhaustive",
        (Estimator::Ksfiqr, Solver::Gumbel) => "gumbel",
        (Estimator::Eills, _) => "eills",
        (Estimator::PooledLs, _) => "pooled_ls",
        (Estimator::PooledQr, _) => "pooled_qr",
    }
}

fn fit_one(
    spec: &SweepSpec,
    est: Estimator,
    ds: &MultiEnvDataset,
    req: &FitRequest,
) -> Result<FitResult> {
    Ok(match est {
        Estimator::Ksfiqr => req.run(ds)?,
        Estimator::Eills => fit_eills(ds, spec.gamma)?,
        Estimator::PooledLs => fit_pooled_ls_result(ds)?,
        Estimator::PooledQr => fit_pooled_qr(ds, &req.config())?,
    })
}

fn run_job(spec: &SweepSpec, model: ModelId, job: &Job) -> Vec<MetricsRow> {
    let seed = spec.seed(job.replication);
    let base = |est: Estimator| MetricsRow {
        model: spec.model.clone(),
        n: job.n,
        tau: job.tau,
        gamma: match est {
            Estimator::Ksfiqr | Estimator::Eills => spec.gamma,
            Estimator::PooledLs | Estimator::PooledQr => 0.0,
        },
        replication: job.replication,
        seed,
        solver: estimator_label(est, spec.solver).to_string(),
        l2_raw: None,
        l2_sigma: None,
        n_in_sstar: None,
        n_in_g: None,
        support: None,
        runtime_ms: None,
        error: None,
    };
    let generated: Result<(MultiEnvDataset, ScmTruth)> =
        model.generate(job.n, seed).map_err(Into::into);
    let (ds, truth) = match generated {
        Ok(v) => v,
        Err(e) => {
            return spec
                .estimators
                .iter()
                .map(|&est| MetricsRow {
                    error: Some(e.to_string()),
                    ..base(est)
                })
                .collect();
        }
    };
    let sigma = pooled_covariance(&ds);
    let req = spec.request(job.tau, job.replication);
    spec.estimators
        .iter()
        .map(|&est| {
            let start = Instant::now();
            let outcome = fit_one(spec, est, &ds, &req).and_then(|fit| {
                let m = selection_metrics(
                    &fit.beta,
                    &fit.support,
                    &truth,
                    &sigma,
                    spec.include_intercept,
                )?;
                Ok((fit, m))
            });
            let elapsed = start.elapsed().as_millis() as u64;
            let row = base(est);
            match outcome {
                Ok((fit, m)) => MetricsRow {
                    l2_raw: Some(m.l2_raw),
                    l2_sigma: Some(m.l2_sigma),
                    n_in_sstar: Some(m.n_in_sstar),
                    n_in_g: Some(m.n_in_g),
                    support: Some(fit.support.encode()),
                    runtime_ms: spec.timing.then_some(elapsed),
                    ..row
                },
                Err(e) => MetricsRow {
                    error: Some(e.to_string()),
                    runtime_ms: spec.timing.then_some(elapsed),
                    ..row
                },
            }
        })
        .collect()
}

/// Runs every (n, τ, replication) cell in parallel. Individual failures
/// become rows with `error` set; only an invalid spec aborts.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<MetricsRow>> {
    spec.validate()?;
    let model = spec.model_id()?;
    let mut jobs = Vec::new();
    for &n in &spec.n_grid {
        for &tau in &spec.tau_grid {
            for replication in 0..spec.replications {
                jobs.push(Job {
                    n,
                    tau,
                    replication,
                });
            }
        }
    }
    let rows: Vec<Vec<MetricsRow>> = jobs
        .par_iter()
        .map(|job| run_job(spec, model, job))
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

pub fn write_metrics<W: Write>(rows: &[MetricsRow], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for row in rows {
        wtr.serialize(row)?;
    }
    if rows.is_empty() {
        wtr.write_record([
            "model",
            "n",
            "tau",
            "gamma",
            "replication",
            "seed",
            "solver",
            "l2_raw",
            "l2_sigma",
            "n_in_sstar",
            "n_in_g",
            "support",
            "runtime_ms",
            "error",
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_metrics<R: std::io::Read>(reader: R) -> Result<Vec<MetricsRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Aggregates of one (n, τ, solver) cell over its successful replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub tau: f64,
    pub solver: String,
    pub replications: usize,
    pub failures: usize,
    pub mean_in_sstar: f64,
    pub mean_in_g: f64,
    pub median_l2_raw: f64,
    pub median_l2_sigma: f64,
    /// Fraction of replications that selected each covariate, indexed from
    /// covariate 1.
    pub inclusion: Vec<f64>,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Summaries in first-appearance order of the cells.
pub fn summarize(rows: &[MetricsRow], covariates: usize) -> Vec<Summary> {
    let mut keys: Vec<(usize, f64, String)> = Vec::new();
    for r in rows {
        let key = (r.n, r.tau, r.solver.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(n, tau, solver)| {
            let cell: Vec<&MetricsRow> = rows
                .iter()
                .filter(|r| r.n == n && r.tau == tau && r.solver == solver)
                .collect();
            let ok: Vec<&MetricsRow> = cell.iter().copied().filter(|r| r.ok()).collect();
            let k = ok.len().max(1) as f64;
            let mut inclusion = vec![0.0; covariates];
            for r in &ok {
                for j in r
                    .support
                    .as_deref()
                    .unwrap_or("")
                    .split(';')
                    .filter(|s| !s.is_empty())
                {
                    if let Ok(j) = j.parse::<usize>() {
                        if (1..=covariates).contains(&j) {
                            inclusion[j - 1] += 1.0 / k;
                        }
                    }
                }
            }
            Summary {
                n,
                tau,
                solver,
                replications: cell.len(),
                failures: cell.len() - ok.len(),
                mean_in_sstar: ok
                    .iter()
                    .map(|r| r.n_in_sstar.unwrap_or(0) as f64)
                    .sum::<f64>()
                    / k,
                mean_in_g: ok.iter().map(|r| r.n_in_g.unwrap_or(0) as f64).sum::<f64>() / k,
                median_l2_raw: median(ok.iter().filter_map(|r| r.l2_raw).collect()),
                median_l2_sigma: median(ok.iter().filter_map(|r| r.l2_sigma).collect()),
                inclusion,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_defaults_follow_the_standard_protocol() {
        let spec: SweepSpec = serde_json::from_str(r#"{"model": "1i", "n_grid": [100]}"#).unwrap();
        assert_eq!(spec, SweepSpec::new("1i", vec![100]));
        assert_eq!(spec.gamma, 20.0);
        assert_eq!(spec.replications, 50);
        assert_eq!(spec.tau_grid, vec![0.5]);
        assert_eq!(spec.bandwidth, BandwidthArg::Auto);
        assert!(
            serde_json::from_str::<SweepSpec>(r#"{"model": "2", "n_grid": [1], "typo": 1}"#)
                .is_err()
        );
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = SweepSpec::new("2", vec![50]);
        spec.replications = 0;
        assert!(spec.validate().is_err());
        let mut spec = SweepSpec::new("3", vec![50]);
        assert!(spec.validate().is_err());
        spec.q = Some(0.8);
        assert!(spec.validate().is_ok());
        spec.tau_grid = vec![];
        assert!(spec.validate().is_err());
        let mut spec = SweepSpec::new("2", vec![50]);
        spec.tau_grid = vec![1.0];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn medians() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(vec![]).is_nan());
    }
}
