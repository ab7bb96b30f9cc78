//! Selection counts and estimation errors against a known truth.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{MultiEnvDataset, SupportMask};
use crate::error::{bail, Result};
use crate::scm::ScmTruth;

/// `Σ̄ = Σ_e ω_e (1/n_e) X_eᵀ X_e`, intercept column included.
pub fn pooled_covariance(ds: &MultiEnvDataset) -> DMatrix<f64> {
    let p = ds.p();
    let mut sigma = DMatrix::zeros(p, p);
    for (env, w) in ds.iter() {
        let scale = w / env.n() as f64;
        for x in env.rows() {
            for a in 0..p {
                let xa = scale * x[a];
                for b in a..p {
                    sigma[(a, b)] += xa * x[b];
                }
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            sigma[(a, b)] = sigma[(b, a)];
        }
    }
    sigma
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionMetrics {
    /// `|Ŝ ∩ S*|`
    pub n_in_sstar: usize,
    /// `|Ŝ ∩ G|`
    pub n_in_g: usize,
    /// `‖β̂ − β*‖²`
    pub l2_raw: f64,
    /// `‖Σ̄^{1/2}(β̂ − β*)‖²`
    pub l2_sigma: f64,
}

/// Selection counts and both squared ℓ₂ errors. The intercept coordinate is
/// left out of the errors unless `include_intercept` is set.
pub fn selection_metrics(
    beta: &[f64],
    support: &SupportMask,
    truth: &ScmTruth,
    sigma: &DMatrix<f64>,
    include_intercept: bool,
) -> Result<SelectionMetrics> {
    let p = truth.beta_star.len();
    if beta.len() != p || sigma.nrows() != p || sigma.ncols() != p {
        bail!(
            Usage,
            "dimension mismatch between estimate, truth and covariance"
        );
    }
    let diff: Vec<f64> = beta
        .iter()
        .zip(&truth.beta_star)
        .enumerate()
        .map(|(j, (b, t))| {
            if j == 0 && !include_intercept {
                0.0
            } else {
                b - t
            }
        })
        .collect();
    let d = DVector::from_vec(diff);
    Ok(SelectionMetrics {
        n_in_sstar: support.intersection_len(&truth.s_star),
        n_in_g: support.intersection_len(&truth.g_set),
        l2_raw: d.norm_squared(),
        l2_sigma: d.dot(&(sigma * &d)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::EnvironmentData;
    use crate::scm::{ModelId, ScmTruth};
    use alloc::vec;

    fn truth() -> ScmTruth {
        ScmTruth {
            beta_star: vec![0.0, 3.0, 2.0, -0.5, 0.0, 0.0],
            s_star: SupportMask::new(vec![1, 2, 3], 6).unwrap(),
            g_set: SupportMask::new(vec![4, 5], 6).unwrap(),
            model_id: ModelId::Model2,
        }
    }

    #[test]
    fn perfect_and_worst_selection() {
        let t = truth();
        let sigma = DMatrix::identity(6, 6);
        let s = SupportMask::new(vec![0, 1, 2, 3], 6).unwrap();
        let m = selection_metrics(&t.beta_star, &s, &t, &sigma, false).unwrap();
        assert_eq!((m.n_in_sstar, m.n_in_g), (3, 0));
        assert_eq!((m.l2_raw, m.l2_sigma), (0.0, 0.0));
        let all = SupportMask::full(6);
        let m = selection_metrics(&t.beta_star, &all, &t, &sigma, false).unwrap();
        assert_eq!((m.n_in_sstar, m.n_in_g), (3, 2));
    }

    #[test]
    fn intercept_is_excluded_by_default() {
        let t = truth();
        let sigma = DMatrix::identity(6, 6);
        let mut beta = t.beta_star.clone();
        beta[0] = 0.7;
        let s = SupportMask::full(6);
        assert_eq!(
            selection_metrics(&beta, &s, &t, &sigma, false)
                .unwrap()
                .l2_raw,
            0.0
        );
        let m = selection_metrics(&beta, &s, &t, &sigma, true).unwrap();
        assert!((m.l2_raw - 0.49).abs() < 1e-15);
    }

    #[test]
    fn covariance_examples() {
        let rows = [vec![1.0], vec![-2.0], vec![0.5]];
        let e = EnvironmentData::from_covariates(&rows, vec![0.0; 3]).unwrap();
        let single = MultiEnvDataset::uniform(vec![e.clone()]).unwrap();
        let s = pooled_covariance(&single);
        assert_eq!(s[(0, 0)], 1.0);
        assert!((s[(1, 1)] - (1.0 + 4.0 + 0.25) / 3.0).abs() < 1e-15);
        assert!((s[(0, 1)] - (-0.5 / 3.0)).abs() < 1e-15);
        let doubled = MultiEnvDataset::uniform(vec![e.clone(), e]).unwrap();
        assert!((pooled_covariance(&doubled) - s).abs().max() < 1e-15);
    }
}
