//! Structural causal model benchmarks.
//!
//! Three two-environment models with known causal coefficients
//! `β* = (3, 2, −0.5)` on `(x1, x2, x3)`:
//!
//! * Model 1: twelve covariates, endogenous children `x7, x8, x9` of the
//!   response; variant (ii) draws environment 1 noise from `t_{1.5}`.
//! * Model 2: `x4 = 5y² + u4` in environment 1 only, so `x4` is correlated
//!   with the quantile-residual indicator but not with the mean residual.
//! * Model 3: the `x3` effect switches on only when the response noise
//!   exceeds its `q`-quantile.
//!
//! Noise term `u_k` of environment `e` is drawn from its own counter-based
//! stream, so datasets are a pure function of `(model, n, seed)`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{EnvironmentData, MultiEnvDataset, SupportMask};
use crate::error::{bail, Result};
use crate::rng::{domain, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model1Variant {
    /// Gaussian noise in both environments.
    I,
    /// `t_{1.5}` noise in environment 1.
    Ii,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelId {
    Model1 { variant: Model1Variant },
    Model2,
    Model3 { q: f64 },
}

impl ModelId {
    /// Short label: `1i`, `1ii`, `2` or `3`.
    pub fn label(&self) -> &'static str {
        match self {
            Self::Model1 {
                variant: Model1Variant::I,
            } => "1i",
            Self::Model1 {
                variant: Model1Variant::Ii,
            } => "1ii",
            Self::Model2 => "2",
            Self::Model3 { .. } => "3",
        }
    }

    /// Parses a label; Model 3 needs its `q`.
    pub fn from_label(label: &str, q: Option<f64>) -> Result<Self> {
        Ok(match label {
            "1i" => Self::Model1 {
                variant: Model1Variant::I,
            },
            "1ii" => Self::Model1 {
                variant: Model1Variant::Ii,
            },
            "2" => Self::Model2,
            "3" => match q {
                Some(q) => Self::Model3 { q },
                None => bail!(Usage, "model 3 requires q"),
            },
            other => bail!(Usage, "unknown model '{other}'"),
        })
    }

    pub fn generate(&self, n: usize, seed: u64) -> Result<(MultiEnvDataset, ScmTruth)> {
        match *self {
            Self::Model1 { variant } => gen_model1(n, variant, seed),
            Self::Model2 => gen_model2(n, seed),
            Self::Model3 { q } => gen_model3(n, q, seed),
        }
    }
}

/// Ground truth of a generated benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmTruth {
    /// Full-length coefficients including a zero intercept.
    pub beta_star: Vec<f64>,
    pub s_star: SupportMask,
    /// Endogenously spurious covariates.
    pub g_set: SupportMask,
    pub model_id: ModelId,
}

/// Student-t draw `Z / sqrt(V/df)` with `V ~ χ²(df)`.
pub fn sample_student_t<R: Rng + ?Sized>(df: f64, rng: &mut R) -> f64 {
    let chi = ChiSquared::new(df).expect("degrees of freedom must be positive");
    let z: f64 = StandardNormal.sample(rng);
    let v = chi.sample(rng);
    z / libm::sqrt(v / df)
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal quantile by bracketed Newton iteration on the CDF.
pub fn normal_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        bail!(Usage, "quantile level must lie in (0, 1), got {q}");
    }
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    let mut x = 0.0f64;
    for _ in 0..200 {
        let f = std_normal_cdf(x) - q;
        if f == 0.0 {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let pdf = 0.398_942_280_401_432_7 * libm::exp(-0.5 * x * x);
        let mut next = x - f / pdf;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-12 * (1.0 + x.abs()) || hi - lo <= 1e-12 {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Noise sampler for one environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLaw {
    Normal,
    StudentT(f64),
}

/// `n` draws of noise term `k` (1-based) in environment `env` (1-based).
pub fn noise_term(seed: u64, env: u64, k: u64, n: usize, law: NoiseLaw) -> Vec<f64> {
    let mut rng = stream(seed, domain::SCM_NOISE, (env << 8) | k);
    match law {
        NoiseLaw::Normal => (0..n).map(|_| StandardNormal.sample(&mut rng)).collect(),
        NoiseLaw::StudentT(df) => (0..n).map(|_| sample_student_t(df, &mut rng)).collect(),
    }
}

fn noise_block(seed: u64, env: u64, terms: u64, n: usize, law: NoiseLaw) -> Vec<Vec<f64>> {
    (1..=terms)
        .map(|k| noise_term(seed, env, k, n, law))
        .collect()
}

fn validate_n(n: usize) -> Result<()> {
    if n == 0 {
        bail!(Usage, "sample size must be at least 1");
    }
    Ok(())
}

fn assemble(columns: &[Vec<f64>], y: Vec<f64>) -> Result<EnvironmentData> {
    let n = y.len();
    let p = columns.len() + 1;
    let mut x = Vec::with_capacity(n * p);
    for i in 0..n {
        x.push(1.0);
        x.extend(columns.iter().map(|c| c[i]));
    }
    EnvironmentData::new(x, y, p)
}

fn truth(p: usize, g: &[usize], model_id: ModelId) -> Result<ScmTruth> {
    let mut beta_star = vec![0.0; p];
    beta_star[1] = 3.0;
    beta_star[2] = 2.0;
    beta_star[3] = -0.5;
    Ok(ScmTruth {
        beta_star,
        s_star: SupportMask::new(vec![1, 2, 3], p)?,
        g_set: SupportMask::new(g.to_vec(), p)?,
        model_id,
    })
}

/// Noise law of Model 1 in environment `env` (1-based).
pub fn model1_noise_law(variant: Model1Variant, env: u64) -> NoiseLaw {
    match (variant, env) {
        (Model1Variant::Ii, 1) => NoiseLaw::StudentT(1.5),
        _ => NoiseLaw::Normal,
    }
}

/// Model 1 variables of one environment from its 13 noise terms.
/// Returns `(columns x1..x12, y)`.
pub fn model1_equations(env: u64, u: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = u[0].len();
    let mut x = vec![vec![0.0; n]; 13];
    let mut y = vec![0.0; n];
    let uk = |k: usize, i: usize| u[k - 1][i];
    for i in 0..n {
        x[1][i] = uk(1, i);
        x[4][i] = if env == 1 {
            uk(4, i)
        } else {
            uk(4, i) * uk(4, i) - 1.0
        };
        x[2][i] = libm::sin(x[4][i]) + uk(2, i);
        x[3][i] = libm::cos(x[4][i]) + uk(3, i);
        x[5][i] = libm::sin(x[3][i] + uk(5, i));
        x[10][i] = 2.5 * x[1][i] + 1.5 * x[2][i] + uk(10, i);
        y[i] = 3.0 * x[1][i] + 2.0 * x[2][i] - 0.5 * x[3][i] + uk(13, i);
        x[6][i] = 0.8 * y[i] * uk(6, i);
        x[7][i] = if env == 1 {
            0.5 * x[3][i] + y[i] + uk(7, i)
        } else {
            4.0 * x[3][i] + libm::tanh(y[i]) + uk(7, i)
        };
        x[8][i] = 0.5 * x[7][i] - y[i] + x[10][i] + uk(8, i);
        x[9][i] = libm::tanh(x[7][i]) + 0.1 * libm::cos(x[8][i]) + uk(9, i);
        x[11][i] = 0.4 * (x[7][i] + x[8][i]) * uk(11, i);
        x[12][i] = uk(12, i);
    }
    x.remove(0);
    (x, y)
}

pub fn gen_model1(
    n: usize,
    variant: Model1Variant,
    seed: u64,
) -> Result<(MultiEnvDataset, ScmTruth)> {
    validate_n(n)?;
    let envs = (1..=2u64)
        .map(|e| {
            let u = noise_block(seed, e, 13, n, model1_noise_law(variant, e));
            let (cols, y) = model1_equations(e, &u);
            assemble(&cols, y)
        })
        .collect::<Result<Vec<_>>>()?;
    let ds = MultiEnvDataset::uniform(envs)?;
    Ok((ds, truth(13, &[7, 8, 9], ModelId::Model1 { variant })?))
}

pub fn gen_model2(n: usize, seed: u64) -> Result<(MultiEnvDataset, ScmTruth)> {
    validate_n(n)?;
    let envs = (1..=2u64)
        .map(|e| {
            let u = noise_block(seed, e, 5, n, NoiseLaw::Normal);
            let x1 = u[0].clone();
            let x3 = u[2].clone();
            let x2: Vec<f64> = x3
                .iter()
                .zip(&u[1])
                .map(|(a, b)| libm::sin(*a) + b)
                .collect();
            let y: Vec<f64> = (0..n)
                .map(|i| 3.0 * x1[i] + 2.0 * x2[i] - 0.5 * x3[i] + u[4][i])
                .collect();
            let x4: Vec<f64> = if e == 1 {
                (0..n).map(|i| 5.0 * y[i] * y[i] + u[3][i]).collect()
            } else {
                u[3].clone()
            };
            assemble(&[x1, x2, x3, x4], y)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((
        MultiEnvDataset::uniform(envs)?,
        truth(5, &[4], ModelId::Model2)?,
    ))
}

pub fn gen_model3(n: usize, q: f64, seed: u64) -> Result<(MultiEnvDataset, ScmTruth)> {
    validate_n(n)?;
    let z_q = normal_quantile(q)?;
    let envs = (1..=2u64)
        .map(|e| {
            let u = noise_block(seed, e, 4, n, NoiseLaw::Normal);
            let x1 = u[0].clone();
            let x3 = u[2].clone();
            let x2: Vec<f64> = x3
                .iter()
                .zip(&u[1])
                .map(|(a, b)| libm::sin(*a) + b)
                .collect();
            let y: Vec<f64> = (0..n)
                .map(|i| {
                    let active = if u[3][i] > z_q { 1.0 } else { 0.0 };
                    3.0 * x1[i] + 2.0 * x2[i] - 0.5 * x3[i] * active + u[3][i]
                })
                .collect();
            assemble(&[x1, x2, x3], y)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((
        MultiEnvDataset::uniform(envs)?,
        truth(4, &[], ModelId::Model3 { q })?,
    ))
}
