//! Smoothed quantile losses, the focused invariance penalty and the KSFIQR
//! objective
//!
//! ```text
//! R_e(β)  = (1/n_e) Σ_i ℓ_{h,τ}(y_i − x_iᵀβ)
//! ∇R_e(β) = (1/n_e) Σ_i {K̄_h(−r_i) − τ} x_i
//! J(β)    = Σ_{j ∈ S} Σ_e ω_e (∇_j R_e(β))²
//! Q(β)    = Σ_e ω_e R_e(β) + γ J(β)
//! ```
//!
//! The free functions evaluate these on the full coefficient vector and are
//! the reference entry points. [`SmoothedObjective`] is the fused evaluator
//! the solvers use: it works on a column-restricted copy of the design and
//! returns the value and analytic gradient in two passes over the data.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{EnvironmentData, MultiEnvDataset, SupportMask};
use crate::error::{bail, Result};
use crate::kernel::{validate_tau_h, KernelSpec};

/// Bandwidth choice: explicit, or the rule `h = sqrt(τ(1−τ) p γ / n_*)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth {
    Auto,
    Fixed(f64),
}

/// Optional nonlinear moment added to the penalty: `f(u) = u²` or `cos(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyExtension {
    #[default]
    None,
    Square,
    Cosine,
}

impl PenaltyExtension {
    #[inline]
    pub fn apply(self, u: f64) -> Option<f64> {
        match self {
            Self::None => None,
            Self::Square => Some(u * u),
            Self::Cosine => Some(libm::cos(u)),
        }
    }
}

impl core::str::FromStr for PenaltyExtension {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "square" => Ok(Self::Square),
            "cosine" => Ok(Self::Cosine),
            other => bail!(Config, "unknown penalty extension '{other}'"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub tau: f64,
    pub gamma: f64,
    pub bandwidth: Bandwidth,
    pub kernel: KernelSpec,
    pub force_intercept: bool,
    pub penalty_extension: PenaltyExtension,
}

impl FitConfig {
    /// Gaussian kernel, automatic bandwidth, intercept forced, no extension.
    pub fn new(tau: f64, gamma: f64) -> Self {
        Self {
            tau,
            gamma,
            bandwidth: Bandwidth::Auto,
            kernel: KernelSpec::gaussian(),
            force_intercept: true,
            penalty_extension: PenaltyExtension::None,
        }
    }

    pub fn with_bandwidth(mut self, h: f64) -> Self {
        self.bandwidth = Bandwidth::Fixed(h);
        self
    }

    pub fn with_kernel(mut self, kernel: KernelSpec) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn with_extension(mut self, ext: PenaltyExtension) -> Self {
        self.penalty_extension = ext;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            bail!(
                Config,
                "quantile level must lie in (0, 1), got {}",
                self.tau
            );
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            bail!(
                Config,
                "penalty weight must be finite and nonnegative, got {}",
                self.gamma
            );
        }
        if let Bandwidth::Fixed(h) = self.bandwidth {
            validate_tau_h(self.tau, h)?;
        }
        Ok(())
    }

    /// The numeric bandwidth; fails if it is still `Auto`.
    pub fn h(&self) -> Result<f64> {
        match self.bandwidth {
            Bandwidth::Fixed(h) => {
                validate_tau_h(self.tau, h)?;
                Ok(h)
            }
            Bandwidth::Auto => bail!(Config, "bandwidth has not been resolved"),
        }
    }

    /// Copy of the config with the bandwidth resolved against `ds`.
    pub fn resolved(&self, ds: &MultiEnvDataset) -> Result<Self> {
        let h = resolve_bandwidth(ds, self)?;
        Ok(Self {
            bandwidth: Bandwidth::Fixed(h),
            ..*self
        })
    }
}

pub const AUTO_BANDWIDTH_MIN: f64 = 1e-3;
pub const AUTO_BANDWIDTH_MAX: f64 = 1.0;

/// Resolves the bandwidth. `Auto` uses `sqrt(τ(1−τ) p γ / n_*)` with
/// `n_* = min_e n_e/ω_e`, clipped to `[1e-3, 1]`; explicit values pass through.
pub fn resolve_bandwidth(ds: &MultiEnvDataset, cfg: &FitConfig) -> Result<f64> {
    cfg.validate()?;
    match cfg.bandwidth {
        Bandwidth::Fixed(h) => Ok(h),
        Bandwidth::Auto => {
            if cfg.gamma <= 0.0 {
                bail!(
                    Config,
                    "automatic bandwidth needs gamma > 0 (the rule degenerates to 0)"
                );
            }
            Ok(
                auto_bandwidth_rule(cfg.tau, ds.p(), cfg.gamma, ds.effective_n())
                    .clamp(AUTO_BANDWIDTH_MIN, AUTO_BANDWIDTH_MAX),
            )
        }
    }
}

/// Unclipped bandwidth rule.
pub fn auto_bandwidth_rule(tau: f64, p: usize, gamma: f64, n_star: f64) -> f64 {
    libm::sqrt(tau * (1.0 - tau) * p as f64 * gamma / n_star)
}

fn check_beta(env: &EnvironmentData, beta: &[f64]) -> Result<()> {
    if beta.len() != env.p() {
        bail!(
            Usage,
            "coefficient vector has length {}, expected {}",
            beta.len(),
            env.p()
        );
    }
    Ok(())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `R_e(β)`.
pub fn env_loss(env: &EnvironmentData, beta: &[f64], cfg: &FitConfig) -> Result<f64> {
    check_beta(env, beta)?;
    let h = cfg.h()?;
    let total: f64 = env
        .rows()
        .zip(env.y())
        .map(|(x, &y)| {
            cfg.kernel
                .smoothed_loss_unchecked(cfg.tau, h, y - dot(x, beta))
        })
        .sum();
    Ok(total / env.n() as f64)
}

/// `∇R_e(β) = (1/n) Σ_i {K̄_h(−r_i) − τ} x_i`.
pub fn env_grad(env: &EnvironmentData, beta: &[f64], cfg: &FitConfig) -> Result<Vec<f64>> {
    check_beta(env, beta)?;
    let h = cfg.h()?;
    let mut g = vec![0.0; env.p()];
    for (x, &y) in env.rows().zip(env.y()) {
        let s = cfg.kernel.cdf(-(y - dot(x, beta)) / h) - cfg.tau;
        g.iter_mut().zip(x).for_each(|(gj, xj)| *gj += s * xj);
    }
    let inv_n = 1.0 / env.n() as f64;
    g.iter_mut().for_each(|gj| *gj *= inv_n);
    Ok(g)
}

/// `(1/n) Σ_i {K̄_h(−r_i) − τ} f(x_i)` for the penalty extension `f`.
fn env_ext_moment(
    env: &EnvironmentData,
    beta: &[f64],
    cfg: &FitConfig,
    h: f64,
) -> Option<Vec<f64>> {
    let ext = cfg.penalty_extension;
    ext.apply(0.0)?;
    let mut m = vec![0.0; env.p()];
    for (x, &y) in env.rows().zip(env.y()) {
        let s = cfg.kernel.cdf(-(y - dot(x, beta)) / h) - cfg.tau;
        m.iter_mut()
            .zip(x)
            .for_each(|(mj, &xj)| *mj += s * ext.apply(xj).unwrap_or(0.0));
    }
    let inv_n = 1.0 / env.n() as f64;
    m.iter_mut().for_each(|mj| *mj *= inv_n);
    Some(m)
}

/// `∇²R_e(β) = (1/n) Σ_i K_h(−r_i) x_i x_iᵀ`.
pub fn env_hessian(env: &EnvironmentData, beta: &[f64], cfg: &FitConfig) -> Result<DMatrix<f64>> {
    check_beta(env, beta)?;
    let h = cfg.h()?;
    let p = env.p();
    let mut hess = DMatrix::zeros(p, p);
    for (x, &y) in env.rows().zip(env.y()) {
        let w = cfg.kernel.density(-(y - dot(x, beta)) / h) / h;
        if w == 0.0 {
            continue;
        }
        for a in 0..p {
            let wa = w * x[a];
            for b in a..p {
                hess[(a, b)] += wa * x[b];
            }
        }
    }
    let inv_n = 1.0 / env.n() as f64;
    for a in 0..p {
        for b in a..p {
            let v = hess[(a, b)] * inv_n;
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    Ok(hess)
}

/// `Σ_e ω_e R_e(β)`.
pub fn pooled_loss(ds: &MultiEnvDataset, beta: &[f64], cfg: &FitConfig) -> Result<f64> {
    ds.iter()
        .map(|(e, w)| Ok(w * env_loss(e, beta, cfg)?))
        .sum()
}

/// `Σ_e ω_e ∇R_e(β)`.
pub fn pooled_grad(ds: &MultiEnvDataset, beta: &[f64], cfg: &FitConfig) -> Result<Vec<f64>> {
    let mut g = vec![0.0; ds.p()];
    for (e, w) in ds.iter() {
        for (gj, ej) in g.iter_mut().zip(env_grad(e, beta, cfg)?) {
            *gj += w * ej;
        }
    }
    Ok(g)
}

fn check_support(beta: &[f64], support: &SupportMask) -> Result<()> {
    if let Some(&j) = support.indices().last() {
        if j >= beta.len() {
            bail!(Usage, "support index {j} out of range");
        }
    }
    if let Some(j) = (0..beta.len()).find(|&j| beta[j] != 0.0 && !support.contains(j)) {
        bail!(Usage, "coefficient {j} is nonzero but outside the support");
    }
    Ok(())
}

/// Focused invariance penalty `Σ_{j∈S} Σ_e ω_e (∇_j R_e(β))²`, plus the
/// extension moments when configured.
pub fn penalty(
    ds: &MultiEnvDataset,
    beta: &[f64],
    support: &SupportMask,
    cfg: &FitConfig,
) -> Result<f64> {
    check_support(beta, support)?;
    let h = cfg.h()?;
    let mut total = 0.0;
    for (e, w) in ds.iter() {
        let g = env_grad(e, beta, cfg)?;
        let m = env_ext_moment(e, beta, cfg, h);
        for &j in support.indices() {
            let mut term = g[j] * g[j];
            if let Some(m) = &m {
                term += m[j] * m[j];
            }
            total += w * term;
        }
    }
    Ok(total)
}

/// `Q(β) = Σ_e ω_e R_e(β) + γ J(β)`.
pub fn objective(
    ds: &MultiEnvDataset,
    beta: &[f64],
    support: &SupportMask,
    cfg: &FitConfig,
) -> Result<f64> {
    let pen = if cfg.gamma > 0.0 {
        penalty(ds, beta, support, cfg)?
    } else {
        check_support(beta, support)?;
        0.0
    };
    Ok(pooled_loss(ds, beta, cfg)? + cfg.gamma * pen)
}

/// Per-environment Euclidean norms of the active gradient coordinates.
pub fn active_gradient_norms(
    ds: &MultiEnvDataset,
    beta: &[f64],
    support: &SupportMask,
    cfg: &FitConfig,
) -> Result<Vec<f64>> {
    ds.envs()
        .iter()
        .map(|e| {
            let g = env_grad(e, beta, cfg)?;
            Ok(libm::sqrt(
                support.indices().iter().map(|&j| g[j] * g[j]).sum(),
            ))
        })
        .collect()
}

struct Block {
    /// Restricted design, row-major `n × k`.
    x: Vec<f64>,
    /// `f(x)` for the penalty extension, same layout.
    fx: Option<Vec<f64>>,
    y: Vec<f64>,
    weight: f64,
    inv_n: f64,
}

/// Value split of the smoothed objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub loss: f64,
    pub penalty: f64,
    pub total: f64,
}

/// Fused evaluator of `R(b) + γ Σ_j c_j P_j(b)` over a subset of columns,
/// where `P_j(b) = Σ_e ω_e {(∇_j R_e(b))² + m_{e,j}(b)²}` and `c_j` are
/// per-coordinate weights (the support indicator, or Gumbel gates).
pub struct SmoothedObjective {
    blocks: Vec<Block>,
    columns: Vec<usize>,
    kernel: KernelSpec,
    tau: f64,
    h: f64,
    gamma: f64,
    curv: Vec<f64>,
    g: Vec<f64>,
    m: Vec<f64>,
}

impl SmoothedObjective {
    /// Evaluator restricted to the columns in `support`.
    pub fn new(ds: &MultiEnvDataset, cfg: &FitConfig, support: &SupportMask) -> Result<Self> {
        let h = cfg.h()?;
        let columns = support.indices().to_vec();
        if columns.is_empty() {
            bail!(Usage, "support must be nonempty");
        }
        if *columns.last().unwrap() >= ds.p() {
            bail!(Usage, "support exceeds the design width");
        }
        let ext = cfg.penalty_extension;
        let blocks = ds
            .iter()
            .map(|(env, w)| {
                let x: Vec<f64> = env
                    .rows()
                    .flat_map(|r| columns.iter().map(move |&j| r[j]))
                    .collect();
                let fx = ext
                    .apply(0.0)
                    .map(|_| x.iter().map(|&u| ext.apply(u).unwrap_or(0.0)).collect());
                Block {
                    x,
                    fx,
                    y: env.y().to_vec(),
                    weight: w,
                    inv_n: 1.0 / env.n() as f64,
                }
            })
            .collect::<Vec<_>>();
        let k = columns.len();
        let max_n = ds.envs().iter().map(EnvironmentData::n).max().unwrap_or(0);
        Ok(Self {
            blocks,
            columns,
            kernel: cfg.kernel,
            tau: cfg.tau,
            h,
            gamma: cfg.gamma,
            curv: vec![0.0; max_n],
            g: vec![0.0; k],
            m: vec![0.0; k],
        })
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Pooled Gram matrix `Σ_e ω_e X_eᵀX_e / n_e` of the restricted columns,
    /// row-major.
    pub fn gram(&self) -> Vec<f64> {
        let k = self.columns.len();
        let mut m = vec![0.0; k * k];
        for blk in &self.blocks {
            let c = blk.weight * blk.inv_n;
            for row in blk.x.chunks_exact(k) {
                for a in 0..k {
                    let xa = c * row[a];
                    for b in a..k {
                        m[a * k + b] += xa * row[b];
                    }
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                m[a * k + b] = m[b * k + a];
            }
        }
        m
    }

    /// Gauss-Newton model of the Hessian at `b` (unit gates), row-major:
    /// `Σ_e ω_e H_e + 2γ Σ_e ω_e H_e H_e`, with `H_e` the restricted
    /// per-environment Hessian of the smoothed loss. The term in the second
    /// derivative of `∇R_e` is dropped; it vanishes with the gradients.
    pub fn gauss_newton(&self, b: &[f64]) -> Vec<f64> {
        let k = self.columns.len();
        let mut out = vec![0.0; k * k];
        let mut he = vec![0.0; k * k];
        for blk in &self.blocks {
            he.fill(0.0);
            for (row, &y) in blk.x.chunks_exact(k).zip(&blk.y) {
                let r = y - dot(row, b);
                let w = self.kernel.density(r / self.h) / self.h;
                if w == 0.0 {
                    continue;
                }
                for a in 0..k {
                    let xa = w * row[a];
                    for c in a..k {
                        he[a * k + c] += xa * row[c];
                    }
                }
            }
            for a in 0..k {
                for c in a..k {
                    he[a * k + c] *= blk.inv_n;
                    he[c * k + a] = he[a * k + c];
                }
            }
            for a in 0..k {
                for c in 0..k {
                    let hh: f64 = (0..k).map(|l| he[a * k + l] * he[l * k + c]).sum();
                    out[a * k + c] += blk.weight * (he[a * k + c] + 2.0 * self.gamma * hh);
                }
            }
        }
        out
    }

    pub fn set_gamma(&mut self, gamma: f64) {
        self.gamma = gamma;
    }

    /// Scatters restricted coordinates into a full-length vector.
    pub fn expand(&self, z: &[f64], p: usize) -> Vec<f64> {
        let mut beta = vec![0.0; p];
        for (&j, &v) in self.columns.iter().zip(z) {
            beta[j] = v;
        }
        beta
    }

    /// Evaluates the objective at `b`. `gates` defaults to all ones. When
    /// `grad` is given it receives `∇_b`; when `parts` is given it receives
    /// `P_j(b)` for each coordinate.
    pub fn evaluate(
        &mut self,
        b: &[f64],
        gates: Option<&[f64]>,
        mut grad: Option<&mut [f64]>,
        mut parts: Option<&mut [f64]>,
    ) -> ObjectiveValue {
        let k = self.columns.len();
        debug_assert_eq!(b.len(), k);
        if let Some(gr) = grad.as_deref_mut() {
            gr.fill(0.0);
        }
        if let Some(pp) = parts.as_deref_mut() {
            pp.fill(0.0);
        }
        let need_penalty = self.gamma > 0.0 || parts.is_some();
        let (tau, h, kernel) = (self.tau, self.h, self.kernel);
        let mut loss = 0.0;
        let mut pen = 0.0;
        for blk in &self.blocks {
            let n = blk.y.len();
            let g = &mut self.g;
            let m = &mut self.m;
            g.fill(0.0);
            m.fill(0.0);
            let mut lsum = 0.0;
            for i in 0..n {
                let row = &blk.x[i * k..(i + 1) * k];
                let r = blk.y[i] - dot(row, b);
                let t = kernel.smoothed_terms(tau, h, r);
                lsum += t.loss;
                // K̄_h(−r) − τ = −ℓ'(r)
                let s = -t.slope;
                for (gj, xj) in g.iter_mut().zip(row) {
                    *gj += s * xj;
                }
                if let Some(fx) = &blk.fx {
                    for (mj, fj) in m.iter_mut().zip(&fx[i * k..(i + 1) * k]) {
                        *mj += s * fj;
                    }
                }
                self.curv[i] = t.curvature;
            }
            loss += blk.weight * lsum * blk.inv_n;
            g.iter_mut().for_each(|v| *v *= blk.inv_n);
            m.iter_mut().for_each(|v| *v *= blk.inv_n);

            if !need_penalty {
                if let Some(gr) = grad.as_deref_mut() {
                    for (o, gj) in gr.iter_mut().zip(g.iter()) {
                        *o += blk.weight * gj;
                    }
                }
                continue;
            }
            for j in 0..k {
                let pj = blk.weight * (g[j] * g[j] + m[j] * m[j]);
                let cj = gates.map_or(1.0, |c| c[j]);
                pen += cj * pj;
                if let Some(pp) = parts.as_deref_mut() {
                    pp[j] += pj;
                }
            }
            let Some(gr) = grad.as_deref_mut() else {
                continue;
            };
            for (o, gj) in gr.iter_mut().zip(g.iter()) {
                *o += blk.weight * gj;
            }
            if self.gamma == 0.0 {
                continue;
            }
            // ∇ Σ_j c_j g_j² = 2 H (c ⊙ g), H = (1/n) Σ K_h(r_i) x_i x_iᵀ
            // and likewise for the extension moments with f(x_i) in place of x_i.
            if let Some(c) = gates {
                g.iter_mut().zip(c).for_each(|(v, cj)| *v *= cj);
                m.iter_mut().zip(c).for_each(|(v, cj)| *v *= cj);
            }
            let scale = 2.0 * self.gamma * blk.weight * blk.inv_n;
            for i in 0..n {
                let w = self.curv[i];
                if w == 0.0 {
                    continue;
                }
                let row = &blk.x[i * k..(i + 1) * k];
                let mut proj = dot(row, g);
                if let Some(fx) = &blk.fx {
                    proj += dot(&fx[i * k..(i + 1) * k], m);
                }
                let coef = scale * w * proj;
                for (o, xj) in gr.iter_mut().zip(row) {
                    *o += coef * xj;
                }
            }
        }
        ObjectiveValue {
            loss,
            penalty: pen,
            total: loss + self.gamma * pen,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::EnvironmentData;
    use alloc::vec;

    fn toy() -> MultiEnvDataset {
        let rows_a = [
            vec![0.5, -1.0],
            vec![1.5, 0.3],
            vec![-0.7, 2.0],
            vec![0.1, 0.1],
        ];
        let rows_b = [vec![1.0, 1.0], vec![-1.2, 0.4], vec![0.3, -0.8]];
        let a = EnvironmentData::from_covariates(&rows_a, vec![1.0, 2.5, -0.3, 0.2]).unwrap();
        let b = EnvironmentData::from_covariates(&rows_b, vec![0.4, -1.0, 1.1]).unwrap();
        MultiEnvDataset::new(vec![a, b], vec![0.4, 0.6]).unwrap()
    }

    #[test]
    fn bandwidth_rule_example() {
        let e =
            EnvironmentData::from_covariates(&vec![vec![0.0; 12]; 500], vec![0.0; 500]).unwrap();
        let ds = MultiEnvDataset::uniform(vec![e.clone(), e]).unwrap();
        let h = resolve_bandwidth(&ds, &FitConfig::new(0.5, 20.0)).unwrap();
        assert!((h - 0.254_951_0).abs() < 1e-7);
        let fixed = resolve_bandwidth(&ds, &FitConfig::new(0.5, 20.0).with_bandwidth(0.1)).unwrap();
        assert_eq!(fixed, 0.1);
        assert!(resolve_bandwidth(&ds, &FitConfig::new(0.5, 0.0)).is_err());
    }

    #[test]
    fn bandwidth_is_clipped() {
        // 13 columns, 2 x 1 observations, γ = 20: rule = sqrt(.25·13·20/2) ≈ 5.7
        let e = EnvironmentData::from_covariates(&[vec![0.0; 12]], vec![0.0]).unwrap();
        let ds = MultiEnvDataset::uniform(vec![e.clone(), e]).unwrap();
        assert!(auto_bandwidth_rule(0.5, 13, 20.0, 2.0) > 1.0);
        assert_eq!(
            resolve_bandwidth(&ds, &FitConfig::new(0.5, 20.0)).unwrap(),
            1.0
        );
    }

    #[test]
    fn unresolved_bandwidth_is_an_error() {
        let ds = toy();
        let beta = vec![0.0; 3];
        assert!(env_loss(&ds.envs()[0], &beta, &FitConfig::new(0.5, 1.0)).is_err());
    }

    #[test]
    fn dimension_and_support_errors() {
        let ds = toy();
        let cfg = FitConfig::new(0.5, 1.0).with_bandwidth(0.3);
        assert!(env_grad(&ds.envs()[0], &[0.0; 2], &cfg).is_err());
        let s = SupportMask::new(vec![0, 1], 3).unwrap();
        assert!(penalty(&ds, &[0.1, 0.2, 0.3], &s, &cfg).is_err());
        assert!(penalty(&ds, &[0.1, 0.2, 0.0], &s, &cfg).is_ok());
    }

    #[test]
    fn fused_evaluator_matches_reference() {
        let ds = toy();
        for ext in [
            PenaltyExtension::None,
            PenaltyExtension::Square,
            PenaltyExtension::Cosine,
        ] {
            let cfg = FitConfig::new(0.3, 2.5)
                .with_bandwidth(0.4)
                .with_extension(ext);
            let support = SupportMask::new(vec![0, 2], 3).unwrap();
            let mut obj = SmoothedObjective::new(&ds, &cfg, &support).unwrap();
            let z = [0.2, -0.4];
            let mut grad = [0.0; 2];
            let val = obj.evaluate(&z, None, Some(&mut grad), None);
            let beta = obj.expand(&z, 3);
            let reference = objective(&ds, &beta, &support, &cfg).unwrap();
            assert!(
                (val.total - reference).abs() < 1e-13,
                "{} vs {reference}",
                val.total
            );
            assert!((val.penalty - penalty(&ds, &beta, &support, &cfg).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn extension_parses() {
        assert_eq!(
            "square".parse::<PenaltyExtension>().unwrap(),
            PenaltyExtension::Square
        );
        assert!("cube".parse::<PenaltyExtension>().is_err());
    }
}
