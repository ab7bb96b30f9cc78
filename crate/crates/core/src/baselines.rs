//! Comparison estimators: EILLS, pooled least squares and pooled smoothed
//! quantile regression.
//!
//! EILLS minimises
//! `Σ_e ω_e Ê[(y − βᵀx)²] + γ Σ_{j∈S} Σ_e ω_e (Ê[(y − βᵀx) x_j])²`
//! by the same support enumeration as the quantile estimator. Both terms
//! depend on the data only through per-environment moments, so every
//! evaluation is `O(p²)` regardless of `n`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::data::{MultiEnvDataset, SupportMask};
use crate::error::{bail, Result};
use crate::exhaustive::{
    enumeration_guard, fit_support, map_supports, select_best, FitResult, SolverKind, SupportEntry,
};
use crate::loss::{active_gradient_norms, FitConfig};
use crate::optim::{minimize, LbfgsbOptions};

/// Second moments of one environment: `E[xxᵀ]`, `E[xy]`, `E[y²]`.
#[derive(Debug, Clone)]
struct Moments {
    gram: DMatrix<f64>,
    cross: DVector<f64>,
    yy: f64,
    weight: f64,
}

fn moments(ds: &MultiEnvDataset) -> Vec<Moments> {
    let p = ds.p();
    ds.iter()
        .map(|(env, w)| {
            let inv_n = 1.0 / env.n() as f64;
            let mut gram = DMatrix::zeros(p, p);
            let mut cross = DVector::zeros(p);
            let mut yy = 0.0;
            for (x, &y) in env.rows().zip(env.y()) {
                for a in 0..p {
                    cross[a] += x[a] * y;
                    for b in a..p {
                        gram[(a, b)] += x[a] * x[b];
                    }
                }
                yy += y * y;
            }
            for a in 0..p {
                for b in a..p {
                    let v = gram[(a, b)] * inv_n;
                    gram[(a, b)] = v;
                    gram[(b, a)] = v;
                }
            }
            Moments {
                gram,
                cross: cross * inv_n,
                yy: yy * inv_n,
                weight: w,
            }
        })
        .collect()
}

fn restrict(m: &Moments, cols: &[usize]) -> Moments {
    let k = cols.len();
    Moments {
        gram: DMatrix::from_fn(k, k, |a, b| m.gram[(cols[a], cols[b])]),
        cross: DVector::from_fn(k, |a, _| m.cross[cols[a]]),
        yy: m.yy,
        weight: m.weight,
    }
}

fn solve_pooled(ms: &[Moments]) -> Result<DVector<f64>> {
    let k = ms[0].cross.len();
    let mut gram = DMatrix::zeros(k, k);
    let mut rhs = DVector::zeros(k);
    for m in ms {
        gram += &m.gram * m.weight;
        rhs += &m.cross * m.weight;
    }
    match gram.cholesky() {
        Some(ch) => Ok(ch.solve(&rhs)),
        None => bail!(Numerical, "pooled Gram matrix is singular"),
    }
}

/// Weighted least squares over the stacked environments (row weight
/// `ω_e / n_e`).
pub fn fit_pooled_ls(ds: &MultiEnvDataset) -> Result<Vec<f64>> {
    Ok(solve_pooled(&moments(ds))?.iter().copied().collect())
}

/// Value and gradient of the restricted EILLS objective.
fn eills_eval(ms: &[Moments], gamma: f64, z: &[f64], grad: &mut [f64]) -> f64 {
    let z = DVector::from_column_slice(z);
    let mut total = 0.0;
    let mut g = DVector::zeros(z.len());
    for m in ms {
        let gz = &m.gram * &z;
        // Ê[(y − zᵀx) x] on the active columns
        let cov = &m.cross - &gz;
        total += m.weight * (m.yy - 2.0 * z.dot(&m.cross) + z.dot(&gz));
        g += (&gz - &m.cross) * (2.0 * m.weight);
        if gamma > 0.0 {
            total += gamma * m.weight * cov.norm_squared();
            g -= (&m.gram * &cov) * (2.0 * gamma * m.weight);
        }
    }
    grad.copy_from_slice(g.as_slice());
    total
}

/// EILLS objective at a full coefficient vector with the given support.
pub fn eills_objective(
    ds: &MultiEnvDataset,
    beta: &[f64],
    support: &SupportMask,
    gamma: f64,
) -> Result<f64> {
    if beta.len() != ds.p() {
        bail!(
            Usage,
            "coefficient vector has length {}, expected {}",
            beta.len(),
            ds.p()
        );
    }
    let ms = moments(ds);
    let cols = support.indices();
    let restricted: Vec<Moments> = ms.iter().map(|m| restrict(m, cols)).collect();
    let z: Vec<f64> = cols.iter().map(|&j| beta[j]).collect();
    if (0..beta.len()).any(|j| beta[j] != 0.0 && !support.contains(j)) {
        bail!(Usage, "coefficients outside the support must be zero");
    }
    let mut g = vec![0.0; z.len()];
    Ok(eills_eval(&restricted, gamma, &z, &mut g))
}

struct EillsFit {
    beta: Vec<f64>,
    objective: f64,
    iterations: usize,
    converged: bool,
}

fn eills_support(ms: &[Moments], support: &SupportMask, gamma: f64, p: usize) -> Result<EillsFit> {
    let cols = support.indices();
    let restricted: Vec<Moments> = ms.iter().map(|m| restrict(m, cols)).collect();
    let start = solve_pooled(&restricted)
        .map(|v| v.iter().copied().collect())
        .unwrap_or_else(|_| vec![0.0; cols.len()]);
    let m = minimize(
        |z, g| eills_eval(&restricted, gamma, z, g),
        &start,
        &LbfgsbOptions::default(),
    )?;
    let mut beta = vec![0.0; p];
    for (&j, &v) in cols.iter().zip(&m.x) {
        beta[j] = v;
    }
    Ok(EillsFit {
        beta,
        objective: m.f,
        iterations: m.iterations,
        converged: m.converged(),
    })
}

/// EILLS by exhaustive support enumeration (intercept always active).
pub fn fit_eills(ds: &MultiEnvDataset, gamma: f64) -> Result<FitResult> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        bail!(
            Config,
            "penalty weight must be finite and nonnegative, got {gamma}"
        );
    }
    let p = ds.p();
    enumeration_guard(p, true)?;
    let ms = moments(ds);
    let supports = SupportMask::enumerate(p, true);
    let fits: Vec<EillsFit> = map_supports(&supports, |s| eills_support(&ms, s, gamma, p))
        .into_iter()
        .collect::<Result<_>>()?;
    let objectives: Vec<f64> = fits.iter().map(|f| f.objective).collect();
    let best = select_best(&objectives);
    let support = supports[best].clone();
    let fit = &fits[best];
    let env_gradient_norms = ms
        .iter()
        .map(|m| {
            let beta = DVector::from_column_slice(&fit.beta);
            let g = (&m.gram * beta - &m.cross) * 2.0;
            libm::sqrt(support.indices().iter().map(|&j| g[j] * g[j]).sum())
        })
        .collect();
    Ok(FitResult {
        beta: fit.beta.clone(),
        support,
        objective: fit.objective,
        per_support_table: Some(
            supports
                .into_iter()
                .zip(objectives)
                .map(|(support, objective)| SupportEntry {
                    support,
                    objective,
                    skipped: false,
                })
                .collect(),
        ),
        solver: SolverKind::Eills,
        env_gradient_norms,
        bandwidth: None,
        iterations: fits.iter().map(|f| f.iterations).sum(),
        converged: fit.converged,
        relaxed: None,
    })
}

/// Pooled smoothed quantile regression: the `γ = 0` fit on the full support.
///
/// The bandwidth is resolved with the configured `γ` before the penalty is
/// switched off, so `Auto` yields the same `h` as the penalised estimator.
pub fn fit_pooled_qr(ds: &MultiEnvDataset, cfg: &FitConfig) -> Result<FitResult> {
    let cfg = cfg.resolved(ds)?.with_gamma(0.0);
    let support = SupportMask::full(ds.p());
    let fit = fit_support(ds, &support, &cfg, None)?;
    Ok(FitResult {
        env_gradient_norms: active_gradient_norms(ds, &fit.beta, &support, &cfg)?,
        beta: fit.beta,
        support,
        objective: fit.objective,
        per_support_table: None,
        solver: SolverKind::PooledQr,
        bandwidth: cfg.h().ok(),
        iterations: fit.iterations,
        converged: fit.converged,
        relaxed: None,
    })
}

/// Pooled least squares packaged as a [`FitResult`] on the full support.
pub fn fit_pooled_ls_result(ds: &MultiEnvDataset) -> Result<FitResult> {
    let beta = fit_pooled_ls(ds)?;
    let support = SupportMask::full(ds.p());
    let objective = eills_objective(ds, &beta, &support, 0.0)?;
    Ok(FitResult {
        beta,
        support,
        objective,
        per_support_table: None,
        solver: SolverKind::PooledLs,
        env_gradient_norms: Vec::new(),
        bandwidth: None,
        iterations: 0,
        converged: true,
        relaxed: None,
    })
}
