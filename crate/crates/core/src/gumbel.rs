//! Gumbel-gate relaxation of the support search.
//!
//! The support indicator is replaced by gates
//! `a_j = 1 / (1 + exp((U_{j,1} − U_{j,2} − w_j) / T))` driven by fresh
//! Gumbel pairs each iteration, and `(β, w)` descend the gradient of
//! `R(β⊙a) + γ Σ_j a_j P_j(β⊙a)` with Adam. The temperature `T` is
//! multiplied by `ρ` every `anneal_every` iterations down to `temp_final`.
//! The final support keeps coordinates with `σ(w_j) > threshold` and is
//! refitted exactly with [`fit_support`].
//!
//! Coefficients are optimised in column-scaled units (`θ_j = s_j β_j` with
//! `s_j` the pooled RMS of column `j`) so that one Adam step size suits
//! covariates of very different magnitude.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{MultiEnvDataset, SupportMask};
use crate::error::{bail, Error, Result};
use crate::exhaustive::{fit_support, FitResult, RelaxedPath, SolverKind};
use crate::loss::{active_gradient_norms, objective, FitConfig, SmoothedObjective};
use crate::rng::GumbelSource;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GumbelConfig {
    pub iterations: usize,
    pub temp_initial: f64,
    pub temp_final: f64,
    /// Anneal factor in (0, 1).
    pub rho: f64,
    pub anneal_every: usize,
    pub step_size: f64,
    pub seed: u64,
    /// Gate probability above which a coordinate is kept.
    pub threshold: f64,
    /// Starting logit for every gate.
    pub init_logit: f64,
}

impl Default for GumbelConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            temp_initial: 1.0,
            temp_final: 0.1,
            rho: 0.9,
            anneal_every: 100,
            step_size: 0.01,
            seed: 0,
            threshold: 0.5,
            init_logit: 0.0,
        }
    }
}

impl GumbelConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temp_final > 0.0
            && self.temp_final <= self.temp_initial
            && self.temp_initial.is_finite())
        {
            bail!(Config, "temperatures must satisfy 0 < final <= initial");
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            bail!(Config, "anneal rate must lie in (0, 1)");
        }
        if self.anneal_every == 0 {
            bail!(Config, "anneal period must be at least 1");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            bail!(Config, "gate threshold must lie in (0, 1)");
        }
        if !self.init_logit.is_finite() {
            bail!(Config, "initial gate logit must be finite");
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            bail!(Config, "step size must be positive");
        }
        Ok(())
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `V = 1 / (1 + exp((u1 − u2 − w) / temp))`.
pub fn gumbel_gate(u1: f64, u2: f64, w: f64, temp: f64) -> f64 {
    sigmoid((w - (u1 - u2)) / temp)
}

/// The relaxed objective for fixed noise, with gradients in `(β, w)`.
pub struct RelaxedObjective {
    inner: SmoothedObjective,
    gamma: f64,
    /// Coordinates whose gate is pinned to one.
    pinned: Vec<bool>,
    grad_b: Vec<f64>,
    parts: Vec<f64>,
    gates: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedEval {
    pub value: f64,
    pub grad_beta: Vec<f64>,
    pub grad_w: Vec<f64>,
    pub gates: Vec<f64>,
}

impl RelaxedObjective {
    pub fn new(ds: &MultiEnvDataset, cfg: &FitConfig) -> Result<Self> {
        let cfg = cfg.resolved(ds)?;
        let p = ds.p();
        let inner = SmoothedObjective::new(ds, &cfg, &SupportMask::full(p))?;
        let mut pinned = vec![false; p];
        pinned[0] = cfg.force_intercept;
        Ok(Self {
            inner,
            gamma: cfg.gamma,
            pinned,
            grad_b: vec![0.0; p],
            parts: vec![0.0; p],
            gates: vec![0.0; p],
            b: vec![0.0; p],
        })
    }

    /// Evaluates at `(β, w)` with logistic noise `L_j = U_{j,1} − U_{j,2}`.
    pub fn evaluate(&mut self, beta: &[f64], w: &[f64], noise: &[f64], temp: f64) -> RelaxedEval {
        let p = beta.len();
        for j in 0..p {
            self.gates[j] = if self.pinned[j] {
                1.0
            } else {
                sigmoid((w[j] - noise[j]) / temp)
            };
            self.b[j] = beta[j] * self.gates[j];
        }
        let val = self.inner.evaluate(
            &self.b,
            Some(&self.gates),
            Some(&mut self.grad_b),
            Some(&mut self.parts),
        );
        let mut grad_beta = vec![0.0; p];
        let mut grad_w = vec![0.0; p];
        for j in 0..p {
            let a = self.gates[j];
            grad_beta[j] = a * self.grad_b[j];
            if !self.pinned[j] {
                let da = beta[j] * self.grad_b[j] + self.gamma * self.parts[j];
                grad_w[j] = da * a * (1.0 - a) / temp;
            }
        }
        RelaxedEval {
            value: val.total,
            grad_beta,
            grad_w,
            gates: self.gates.clone(),
        }
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(Self::B1, self.t as f64);
        let c2 = 1.0 - libm::pow(Self::B2, self.t as f64);
        for i in 0..params.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] -= self.lr * mhat / (libm::sqrt(vhat) + Self::EPS);
        }
    }
}

fn column_scales(ds: &MultiEnvDataset) -> Vec<f64> {
    let p = ds.p();
    let mut s = vec![0.0; p];
    for (env, w) in ds.iter() {
        let scale = w / env.n() as f64;
        for x in env.rows() {
            for j in 0..p {
                s[j] += scale * x[j] * x[j];
            }
        }
    }
    s.iter()
        .map(|v| if *v > 0.0 { libm::sqrt(*v) } else { 1.0 })
        .collect()
}

/// Relaxed support search followed by an exact refit on the hardened support.
pub fn fit_gumbel(ds: &MultiEnvDataset, cfg: &FitConfig, gcfg: &GumbelConfig) -> Result<FitResult> {
    gcfg.validate()?;
    let cfg = cfg.resolved(ds)?;
    let p = ds.p();
    let full = SupportMask::full(p);
    let pooled = fit_support(ds, &full, &cfg.with_gamma(0.0), None)?;

    let scales = column_scales(ds);
    let mut relaxed = RelaxedObjective::new(ds, &cfg)?;
    let mut theta: Vec<f64> = pooled
        .beta
        .iter()
        .zip(&scales)
        .map(|(b, s)| b * s)
        .collect();
    let mut w = vec![gcfg.init_logit; p];
    let mut opt_theta = Adam::new(p, gcfg.step_size);
    let mut opt_w = Adam::new(p, gcfg.step_size);
    let mut source = GumbelSource::new(gcfg.seed, p);
    let mut temp = gcfg.temp_initial;
    let mut noise = vec![0.0; p];
    let mut beta = vec![0.0; p];

    for t in 1..=gcfg.iterations {
        if t % gcfg.anneal_every == 0 {
            temp = (temp * gcfg.rho).max(gcfg.temp_final);
        }
        for (j, nj) in noise.iter_mut().enumerate() {
            let (u1, u2) = source.pair(t as u64, j);
            *nj = u1 - u2;
        }
        for j in 0..p {
            beta[j] = theta[j] / scales[j];
        }
        let ev = relaxed.evaluate(&beta, &w, &noise, temp);
        if !ev.value.is_finite()
            || ev
                .grad_beta
                .iter()
                .chain(&ev.grad_w)
                .any(|g| !g.is_finite())
        {
            return Err(Error::Diverged {
                iteration: t,
                reason: "non-finite relaxed objective".into(),
            });
        }
        let grad_theta: Vec<f64> = ev
            .grad_beta
            .iter()
            .zip(&scales)
            .map(|(g, s)| g / s)
            .collect();
        opt_theta.step(&mut theta, &grad_theta);
        opt_w.step(&mut w, &ev.grad_w);
    }
    for j in 0..p {
        beta[j] = theta[j] / scales[j];
    }

    let probs: Vec<f64> = (0..p)
        .map(|j| {
            if j == 0 && cfg.force_intercept {
                1.0
            } else {
                sigmoid(w[j])
            }
        })
        .collect();
    let mut active: Vec<usize> = (0..p).filter(|&j| probs[j] > gcfg.threshold).collect();
    if cfg.force_intercept && !active.contains(&0) {
        active.insert(0, 0);
    }
    if active.is_empty() {
        let top = (0..p).fold(0, |b, j| if probs[j] > probs[b] { j } else { b });
        active.push(top);
    }
    let support = SupportMask::new(active, p)?;
    let hardened: Vec<f64> = (0..p)
        .map(|j| if support.contains(j) { beta[j] } else { 0.0 })
        .collect();
    let hardened_objective = objective(ds, &hardened, &support, &cfg)?;

    let warm = fit_support(ds, &support, &cfg, None)?;
    let refit = match fit_support(ds, &support, &cfg, Some(&hardened)) {
        Ok(alt) if alt.objective < warm.objective => alt,
        _ => warm,
    };
    let beta_relaxed = beta.iter().zip(&probs).map(|(b, q)| b * q).collect();
    Ok(FitResult {
        env_gradient_norms: active_gradient_norms(ds, &refit.beta, &support, &cfg)?,
        beta: refit.beta,
        objective: refit.objective,
        support,
        per_support_table: None,
        solver: SolverKind::Gumbel,
        bandwidth: cfg.h().ok(),
        iterations: gcfg.iterations,
        converged: refit.converged,
        relaxed: Some(RelaxedPath {
            beta_relaxed,
            gate_probabilities: probs,
            hardened_objective,
            final_temperature: temp,
            iterations: gcfg.iterations,
        }),
    })
}
