//! Multi-environment data and support masks.
//!
//! Column 0 of every design matrix is the intercept (identically one); column
//! `j ≥ 1` holds covariate `x_j`. Support masks use the same column indices.

use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

/// Design matrix (row-major, `n × p`) and response of a single environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentData {
    x: Vec<f64>,
    y: Vec<f64>,
    p: usize,
}

impl EnvironmentData {
    /// Builds an environment from a row-major design whose first column is
    /// the intercept.
    pub fn new(x: Vec<f64>, y: Vec<f64>, p: usize) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            bail!(Usage, "an environment needs at least one observation");
        }
        if p == 0 || x.len() != n * p {
            bail!(Usage, "design has {} entries, expected {n} x {p}", x.len());
        }
        if x.chunks_exact(p).any(|row| row[0] != 1.0) {
            bail!(
                Usage,
                "first design column must be the intercept (all ones)"
            );
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            bail!(Usage, "design and response must be finite");
        }
        Ok(Self { x, y, p })
    }

    /// Builds an environment from covariate rows, prepending the intercept.
    pub fn from_covariates(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let q = rows.first().map_or(0, Vec::len);
        if rows.len() != y.len() {
            bail!(
                Usage,
                "{} covariate rows but {} responses",
                rows.len(),
                y.len()
            );
        }
        let mut x = Vec::with_capacity(rows.len() * (q + 1));
        for row in rows {
            if row.len() != q {
                bail!(Usage, "ragged covariate rows");
            }
            x.push(1.0);
            x.extend_from_slice(row);
        }
        Self::new(x, y, q + 1)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Row-major design.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> core::slice::ChunksExact<'_, f64> {
        self.x.chunks_exact(self.p)
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[j])
    }

    /// Copy of this environment with covariate columns permuted:
    /// new column `k` is old column `perm[k]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.p || perm[0] != 0 {
            bail!(
                Usage,
                "permutation must keep the intercept first and cover all columns"
            );
        }
        let x = self
            .rows()
            .flat_map(|r| perm.iter().map(move |&j| r[j]))
            .collect();
        Self::new(x, self.y.clone(), self.p)
    }
}

/// Environments sharing a common covariate dimension, with positive weights
/// summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiEnvDataset {
    envs: Vec<EnvironmentData>,
    weights: Vec<f64>,
}

impl MultiEnvDataset {
    pub fn new(envs: Vec<EnvironmentData>, weights: Vec<f64>) -> Result<Self> {
        if envs.is_empty() {
            bail!(Usage, "at least one environment is required");
        }
        let p = envs[0].p();
        if envs.iter().any(|e| e.p() != p) {
            bail!(
                Usage,
                "all environments must share the same number of columns"
            );
        }
        if weights.len() != envs.len() {
            bail!(
                Usage,
                "{} weights for {} environments",
                weights.len(),
                envs.len()
            );
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            bail!(Usage, "environment weights must be positive");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            bail!(Usage, "environment weights sum to {total}, expected 1");
        }
        Ok(Self { envs, weights })
    }

    /// Equal weights `1/|E|`.
    pub fn uniform(envs: Vec<EnvironmentData>) -> Result<Self> {
        let m = envs.len().max(1) as f64;
        let weights = envs.iter().map(|_| 1.0 / m).collect();
        Self::new(envs, weights)
    }

    /// Weights proportional to environment sample sizes.
    pub fn size_weighted(envs: Vec<EnvironmentData>) -> Result<Self> {
        let total: usize = envs.iter().map(EnvironmentData::n).sum();
        let weights = envs.iter().map(|e| e.n() as f64 / total as f64).collect();
        Self::new(envs, weights)
    }

    pub fn envs(&self) -> &[EnvironmentData] {
        &self.envs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn p(&self) -> usize {
        self.envs[0].p()
    }

    pub fn n_envs(&self) -> usize {
        self.envs.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&EnvironmentData, f64)> {
        self.envs.iter().zip(self.weights.iter().copied())
    }

    /// `n_* = min_e n_e / ω_e`.
    pub fn effective_n(&self) -> f64 {
        self.iter()
            .map(|(e, w)| e.n() as f64 / w)
            .fold(f64::INFINITY, f64::min)
    }

    /// Environments (and weights) in the given order.
    pub fn reorder(&self, order: &[usize]) -> Result<Self> {
        let envs = order.iter().map(|&i| self.envs[i].clone()).collect();
        let weights = order.iter().map(|&i| self.weights[i]).collect();
        Self::new(envs, weights)
    }

    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        let envs = self
            .envs
            .iter()
            .map(|e| e.permute_columns(perm))
            .collect::<Result<_>>()?;
        Self::new(envs, self.weights.clone())
    }
}

/// Sorted set of active column indices (0 is the intercept).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SupportMask(Vec<usize>);

impl SupportMask {
    pub fn new(mut active: Vec<usize>, p: usize) -> Result<Self> {
        active.sort_unstable();
        if active.windows(2).any(|w| w[0] == w[1]) {
            bail!(Usage, "support indices must be unique");
        }
        if let Some(&j) = active.last() {
            if j >= p {
                bail!(Usage, "support index {j} out of range for {p} columns");
            }
        }
        Ok(Self(active))
    }

    pub fn full(p: usize) -> Self {
        Self((0..p).collect())
    }

    pub fn intercept_only() -> Self {
        Self(alloc::vec![0])
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    /// Active covariates, i.e. the support without the intercept.
    pub fn covariates(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied().filter(|&j| j != 0)
    }

    pub fn intersection_len(&self, other: &SupportMask) -> usize {
        self.0.iter().filter(|&&j| other.contains(j)).count()
    }

    /// Cardinality first, then lexicographic order of the indices.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.0.cmp(&other.0))
    }

    /// All supports over `p` columns in canonical order. With
    /// `force_intercept` column 0 is always present and only the covariates
    /// are enumerated; otherwise every nonempty subset is produced.
    pub fn enumerate(p: usize, force_intercept: bool) -> Vec<SupportMask> {
        let (offset, free) = if force_intercept { (1, p - 1) } else { (0, p) };
        let mut out: Vec<SupportMask> = (0u64..(1u64 << free))
            .filter_map(|bits| {
                let mut idx: Vec<usize> = Vec::new();
                if force_intercept {
                    idx.push(0);
                }
                idx.extend((0..free).filter(|k| bits >> k & 1 == 1).map(|k| k + offset));
                (!idx.is_empty()).then_some(SupportMask(idx))
            })
            .collect();
        out.sort_by(SupportMask::canonical_cmp);
        out
    }

    /// Encodes covariates as `1;2;3` (the intercept is omitted).
    pub fn encode(&self) -> alloc::string::String {
        let parts: Vec<alloc::string::String> =
            self.covariates().map(|j| alloc::format!("{j}")).collect();
        parts.join(";")
    }
}

impl From<SupportMask> for Vec<usize> {
    fn from(s: SupportMask) -> Self {
        s.0
    }
}
