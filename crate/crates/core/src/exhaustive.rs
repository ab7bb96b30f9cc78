//! Exhaustive support search.
//!
//! Every support containing the intercept is fitted with the bounded
//! quasi-Newton solver (first at `γ = 0` for a warm start, then with the
//! penalty), and the support with the smallest penalised objective wins.
//! Among supports within [`TIE_TOLERANCE`] of the minimum, the smallest
//! support wins, then the lexicographically smallest.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{MultiEnvDataset, SupportMask};
use crate::error::{bail, Error, Result};
use crate::loss::{active_gradient_norms, FitConfig, SmoothedObjective};
use crate::optim::{minimize_preconditioned, LbfgsbOptions, Minimum, Preconditioner};

/// Largest number of enumerated coordinates accepted by the exhaustive solvers.
pub const MAX_ENUMERATED: usize = 20;

pub const TIE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Exhaustive,
    Gumbel,
    Eills,
    PooledLs,
    PooledQr,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Exhaustive => "exhaustive",
            Self::Gumbel => "gumbel",
            Self::Eills => "eills",
            Self::PooledLs => "pooled_ls",
            Self::PooledQr => "pooled_qr",
        }
    }
}

/// Solution of the problem restricted to one support.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedFit {
    /// Full-length coefficients; zero off the support.
    pub beta: Vec<f64>,
    pub objective: f64,
    /// ∞-norm of the restricted objective gradient at `beta`.
    pub grad_inf_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Diagnostics from the relaxed (Gumbel-gate) optimisation path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedPath {
    /// `β ⊙ σ(w)` at the end of the relaxed run.
    pub beta_relaxed: Vec<f64>,
    /// `σ(w_j)` per coordinate.
    pub gate_probabilities: Vec<f64>,
    /// Relaxed objective with the gates hardened to the selected support.
    pub hardened_objective: f64,
    pub final_temperature: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub beta: Vec<f64>,
    pub support: SupportMask,
    pub objective: f64,
    /// One entry per enumerated support, in canonical order.
    pub per_support_table: Option<Vec<SupportEntry>>,
    pub solver: SolverKind,
    /// Per-environment norms of the active gradient coordinates.
    pub env_gradient_norms: Vec<f64>,
    pub bandwidth: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub relaxed: Option<RelaxedPath>,
}

pub(crate) fn map_supports<T, R, F>(supports: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        supports.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        supports.iter().map(f).collect()
    }
}

/// Index of the best entry of a canonically ordered table.
pub(crate) fn select_best(objectives: &[f64]) -> usize {
    let key = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
    let min = objectives
        .iter()
        .copied()
        .map(key)
        .fold(f64::INFINITY, f64::min);
    objectives
        .iter()
        .position(|&v| key(v) <= min + TIE_TOLERANCE)
        .unwrap_or(0)
}

pub(crate) fn enumeration_guard(p: usize, force_intercept: bool) -> Result<()> {
    let covariates = if force_intercept {
        p.saturating_sub(1)
    } else {
        p
    };
    if covariates > MAX_ENUMERATED {
        return Err(Error::TooManyCovariates {
            covariates,
            limit: MAX_ENUMERATED,
        });
    }
    Ok(())
}

fn run(
    obj: &mut SmoothedObjective,
    z0: &[f64],
    precond: &Preconditioner,
    opts: &LbfgsbOptions,
) -> Result<Minimum> {
    minimize_preconditioned(
        |z, g| obj.evaluate(z, None, Some(g), None).total,
        z0,
        precond,
        opts,
    )
    .map_err(|e| match e {
        Error::Numerical(msg) => {
            Error::Numerical(alloc::format!("support {:?}: {msg}", obj.columns()))
        }
        other => other,
    })
}

/// The `γ = 0` restricted fit from zeros, preconditioned by the pooled Gram
/// matrix.
fn unpenalized(obj: &mut SmoothedObjective, opts: &LbfgsbOptions) -> Result<Minimum> {
    let gamma = obj.gamma();
    obj.set_gamma(0.0);
    let precond = Preconditioner::from_matrix(&obj.gram(), obj.dim());
    let m = run(obj, &vec![0.0; obj.dim()], &precond, opts);
    obj.set_gamma(gamma);
    m
}

/// The penalised fit from `z0`, preconditioned by the Gauss-Newton model at
/// `z0`.
fn penalized(obj: &mut SmoothedObjective, z0: &[f64], opts: &LbfgsbOptions) -> Result<Minimum> {
    let precond = Preconditioner::from_matrix(&obj.gauss_newton(z0), obj.dim());
    run(obj, z0, &precond, opts)
}

fn checked_objective(
    ds: &MultiEnvDataset,
    support: &SupportMask,
    cfg: &FitConfig,
) -> Result<SmoothedObjective> {
    if support.is_empty() {
        bail!(Usage, "support must be nonempty");
    }
    if cfg.force_intercept && !support.contains(0) {
        bail!(
            Usage,
            "support must contain the intercept when it is forced"
        );
    }
    SmoothedObjective::new(ds, cfg, support)
}

/// Minimises the penalised objective over coefficient vectors supported on
/// `support` (coordinates may collapse to zero inside it).
///
/// Without `init` the search starts from the `γ = 0` restricted solution,
/// itself computed from zeros.
pub fn fit_support(
    ds: &MultiEnvDataset,
    support: &SupportMask,
    cfg: &FitConfig,
    init: Option<&[f64]>,
) -> Result<RestrictedFit> {
    fit_support_with(ds, support, cfg, init, &LbfgsbOptions::default())
}

pub fn fit_support_with(
    ds: &MultiEnvDataset,
    support: &SupportMask,
    cfg: &FitConfig,
    init: Option<&[f64]>,
    opts: &LbfgsbOptions,
) -> Result<RestrictedFit> {
    let cfg = cfg.resolved(ds)?;
    let mut obj = checked_objective(ds, support, &cfg)?;
    let p = ds.p();
    let mut iterations = 0;
    let start: Vec<f64> = match init {
        Some(beta) => {
            if beta.len() != p {
                bail!(
                    Usage,
                    "initial vector has length {}, expected {p}",
                    beta.len()
                );
            }
            support.indices().iter().map(|&j| beta[j]).collect()
        }
        None => {
            let warm = unpenalized(&mut obj, opts)?;
            if cfg.gamma == 0.0 {
                return Ok(restricted(&obj, warm, p, 0));
            }
            iterations += warm.iterations;
            warm.x
        }
    };
    let m = if cfg.gamma > 0.0 {
        penalized(&mut obj, &start, opts)?
    } else {
        let precond = Preconditioner::from_matrix(&obj.gram(), obj.dim());
        run(&mut obj, &start, &precond, opts)?
    };
    Ok(restricted(&obj, m, p, iterations))
}

fn restricted(
    obj: &SmoothedObjective,
    m: Minimum,
    p: usize,
    extra_iterations: usize,
) -> RestrictedFit {
    RestrictedFit {
        beta: obj.expand(&m.x, p),
        objective: m.f,
        grad_inf_norm: m.pg_norm,
        iterations: m.iterations + extra_iterations,
        converged: m.converged(),
    }
}

/// One row of the per-support table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportEntry {
    pub support: SupportMask,
    /// The penalised optimum, or for a skipped support its unpenalised
    /// minimum (the bound that excluded it).
    pub objective: f64,
    pub skipped: bool,
}

/// Controls for [`fit_exhaustive_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExhaustiveOptions {
    /// Skip the penalised fit of supports whose unpenalised minimum already
    /// exceeds the incumbent objective. `Q ≥ R ≥ min R` on every support, so
    /// a skipped support can neither win nor tie; the selected support and
    /// coefficients are unchanged.
    pub skip_dominated: bool,
    /// Number of penalised fits between incumbent updates. Fixed so that the
    /// result does not depend on the thread count.
    pub batch: usize,
    pub lbfgs: LbfgsbOptions,
}

impl Default for ExhaustiveOptions {
    fn default() -> Self {
        Self {
            skip_dominated: true,
            batch: 32,
            lbfgs: LbfgsbOptions::default(),
        }
    }
}

/// Enumerates all supports and returns the global minimiser of the
/// penalised objective.
pub fn fit_exhaustive(ds: &MultiEnvDataset, cfg: &FitConfig) -> Result<FitResult> {
    fit_exhaustive_with(ds, cfg, &ExhaustiveOptions::default())
}

pub fn fit_exhaustive_with(
    ds: &MultiEnvDataset,
    cfg: &FitConfig,
    eopts: &ExhaustiveOptions,
) -> Result<FitResult> {
    let cfg = cfg.resolved(ds)?;
    let p = ds.p();
    enumeration_guard(p, cfg.force_intercept)?;
    if eopts.batch == 0 {
        bail!(Config, "batch size must be at least 1");
    }
    let supports = SupportMask::enumerate(p, cfg.force_intercept);
    let opts = &eopts.lbfgs;

    // γ = 0 fits: warm starts, and lower bounds on each support's objective.
    let warm: Vec<Minimum> = map_supports(&supports, |s| {
        let mut obj = checked_objective(ds, s, &cfg)?;
        unpenalized(&mut obj, opts)
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let mut fits: Vec<Option<RestrictedFit>> = vec![None; supports.len()];
    if cfg.gamma == 0.0 {
        for (i, m) in warm.iter().enumerate() {
            let obj = checked_objective(ds, &supports[i], &cfg)?;
            fits[i] = Some(restricted(&obj, m.clone(), p, 0));
        }
    } else {
        let mut order: Vec<usize> = (0..supports.len()).collect();
        if eopts.skip_dominated {
            order.sort_by(|&a, &b| warm[a].f.total_cmp(&warm[b].f).then(a.cmp(&b)));
        }
        let mut best = f64::INFINITY;
        for chunk in order.chunks(eopts.batch) {
            let live: Vec<usize> = chunk
                .iter()
                .copied()
                .filter(|&i| !(eopts.skip_dominated && dominated(warm[i].f, best)))
                .collect();
            if live.is_empty() {
                // `order` is sorted by the bound and `best` only decreases.
                break;
            }
            let results = map_supports(&live, |&i| -> Result<RestrictedFit> {
                let mut obj = checked_objective(ds, &supports[i], &cfg)?;
                let m = penalized(&mut obj, &warm[i].x, opts)?;
                Ok(restricted(&obj, m, p, warm[i].iterations))
            });
            for (i, fit) in live.into_iter().zip(results) {
                let fit = fit?;
                best = best.min(fit.objective);
                fits[i] = Some(fit);
            }
        }
    }

    let objectives: Vec<f64> = fits
        .iter()
        .map(|f| f.as_ref().map_or(f64::INFINITY, |f| f.objective))
        .collect();
    let best = select_best(&objectives);
    let fit = fits[best]
        .clone()
        .ok_or_else(|| Error::Numerical("no support was fitted".into()))?;
    let support = supports[best].clone();
    let env_gradient_norms = active_gradient_norms(ds, &fit.beta, &support, &cfg)?;
    let mut iterations = 0;
    let mut table = Vec::with_capacity(supports.len());
    for ((s, f), w) in supports.into_iter().zip(&fits).zip(&warm) {
        table.push(match f {
            Some(f) => {
                iterations += f.iterations;
                SupportEntry {
                    support: s,
                    objective: f.objective,
                    skipped: false,
                }
            }
            None => {
                iterations += w.iterations;
                SupportEntry {
                    support: s,
                    objective: w.f,
                    skipped: true,
                }
            }
        });
    }
    Ok(FitResult {
        beta: fit.beta,
        support,
        objective: fit.objective,
        per_support_table: Some(table),
        solver: SolverKind::Exhaustive,
        env_gradient_norms,
        bandwidth: cfg.h().ok(),
        iterations,
        converged: fit.converged,
        relaxed: None,
    })
}

/// A lower bound exceeds the incumbent by more than the tie margin, with
/// slack for optimiser tolerance.
fn dominated(lower_bound: f64, best: f64) -> bool {
    lower_bound > best + TIE_TOLERANCE + 1e-9 * (1.0 + best.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_prefer_earlier_canonical_entries() {
        assert_eq!(select_best(&[1.0, 1.0 - 1e-11, 2.0]), 0);
        assert_eq!(select_best(&[1.0, 1.0 - 1e-9, 2.0]), 1);
        assert_eq!(select_best(&[f64::NAN, 3.0]), 1);
    }

    #[test]
    fn guard_refuses_wide_problems() {
        assert!(enumeration_guard(21, true).is_ok());
        let err = enumeration_guard(22, true).unwrap_err();
        assert!(matches!(
            err,
            Error::TooManyCovariates { covariates: 21, .. }
        ));
        assert!(alloc::format!("{err}").contains("Gumbel"));
    }
}
