mod common;

use common::{linear_env, rng, two_env};
use ksfiqr_core::baselines::{
    eills_objective, fit_eills, fit_pooled_ls, fit_pooled_ls_result, fit_pooled_qr,
};
use ksfiqr_core::exhaustive::SolverKind;
use ksfiqr_core::scm::{gen_model1, gen_model2, Model1Variant};
use ksfiqr_core::{fit_support, FitConfig, MultiEnvDataset, SupportMask};
use ksfiqr_testkit::ols_oracle;

/// Stacks every environment with row weight `ω_e / n_e`.
fn stacked(ds: &MultiEnvDataset) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let (mut rows, mut y, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for (env, weight) in ds.iter() {
        for (x, &yi) in env.rows().zip(env.y()) {
            rows.push(x.to_vec());
            y.push(yi);
            w.push(weight / env.n() as f64);
        }
    }
    (rows, y, w)
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x - y).abs() <= tol * (1.0 + y.abs()))
}

#[test]
fn pooled_ls_matches_weighted_ols() {
    let ds = two_env(51, 300, 5);
    let (rows, y, w) = stacked(&ds);
    let want = ols_oracle(&rows, &y, &w);
    let got = fit_pooled_ls(&ds).unwrap();
    assert!(close(&got, &want, 1e-8), "{got:?} vs {want:?}");

    let mut r = rng(52);
    let single =
        MultiEnvDataset::uniform(vec![linear_env(&mut r, 200, &[1.0, -2.0, 0.5], 0.3)]).unwrap();
    let (rows, y, _) = stacked(&single);
    let want = ols_oracle(&rows, &y, &vec![1.0; y.len()]);
    assert!(close(&fit_pooled_ls(&single).unwrap(), &want, 1e-8));
}

#[test]
fn unpenalised_eills_is_pooled_least_squares() {
    let ds = two_env(53, 250, 4);
    let fit = fit_eills(&ds, 0.0).unwrap();
    assert_eq!(fit.support, SupportMask::full(4));
    assert_eq!(fit.solver, SolverKind::Eills);
    let (rows, y, w) = stacked(&ds);
    assert!(close(&fit.beta, &ols_oracle(&rows, &y, &w), 1e-8));
    assert!(close(&fit.beta, &fit_pooled_ls(&ds).unwrap(), 1e-8));
    assert_eq!(fit.per_support_table.as_ref().unwrap().len(), 8);
}

#[test]
fn eills_beats_the_truth_on_its_own_objective() {
    let (ds, truth) = gen_model2(800, 54).unwrap();
    let fit = fit_eills(&ds, 20.0).unwrap();
    let support = SupportMask::new(vec![0, 1, 2, 3], 5).unwrap();
    let at_truth = eills_objective(&ds, &truth.beta_star, &support, 20.0).unwrap();
    assert!(fit.objective <= at_truth + 1e-10);
    let direct = eills_objective(&ds, &fit.beta, &fit.support, 20.0).unwrap();
    assert!((direct - fit.objective).abs() <= 1e-10 * (1.0 + direct));
    for entry in fit.per_support_table.as_ref().unwrap() {
        assert!(fit.objective <= entry.objective + 1e-10);
    }
}

#[test]
fn eills_recovers_the_invariant_support_of_model1() {
    let (ds, truth) = gen_model1(2000, Model1Variant::I, 55).unwrap();
    let fit = fit_eills(&ds, 20.0).unwrap();
    let mut want = vec![0];
    want.extend(truth.s_star.indices());
    assert_eq!(fit.support.indices(), &want[..]);
}

#[test]
fn eills_objective_rejects_coefficients_off_the_support() {
    let ds = two_env(56, 40, 3);
    let support = SupportMask::new(vec![0, 1], 3).unwrap();
    assert!(eills_objective(&ds, &[0.0, 1.0, 0.5], &support, 1.0).is_err());
    assert!(eills_objective(&ds, &[0.0, 1.0], &support, 1.0).is_err());
    assert!(fit_eills(&ds, -1.0).is_err());
}

#[test]
fn pooled_least_squares_leans_on_children_of_the_response() {
    let (ds, _) = gen_model1(2000, Model1Variant::I, 57).unwrap();
    let beta = fit_pooled_ls(&ds).unwrap();
    assert!(beta[7].abs() > 0.1 && beta[8].abs() > 0.1, "{beta:?}");
    let result = fit_pooled_ls_result(&ds).unwrap();
    assert_eq!(result.beta, beta);
    assert_eq!(result.support, SupportMask::full(13));
}

#[test]
fn pooled_qr_is_the_unpenalised_full_support_fit() {
    let (ds, _) = gen_model2(500, 58).unwrap();
    let cfg = FitConfig::new(0.4, 20.0);
    let pooled = fit_pooled_qr(&ds, &cfg).unwrap();
    assert_eq!(pooled.solver, SolverKind::PooledQr);
    let resolved = cfg.resolved(&ds).unwrap();
    assert_eq!(pooled.bandwidth, resolved.h().ok());
    let direct = fit_support(&ds, &SupportMask::full(5), &resolved.with_gamma(0.0), None).unwrap();
    assert_eq!(pooled.beta, direct.beta);
}
