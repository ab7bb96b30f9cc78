use ksfiqr_core::rng::{domain, stream};
use ksfiqr_core::scm::{
    gen_model1, gen_model2, gen_model3, model1_noise_law, noise_term, normal_quantile,
    sample_student_t, Model1Variant, ModelId, NoiseLaw,
};
use ksfiqr_core::EnvironmentData;
use ksfiqr_testkit as oracle;

fn column(env: &EnvironmentData, j: usize) -> Vec<f64> {
    env.column(j).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    cov / (a.iter().map(|x| (x - ma).powi(2)).sum::<f64>()
        * b.iter().map(|y| (y - mb).powi(2)).sum::<f64>())
    .sqrt()
}

fn quantile(mut v: Vec<f64>, q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    v[((v.len() as f64 - 1.0) * q).round() as usize]
}

#[test]
fn truth_invariants() {
    for model in [
        ModelId::Model1 {
            variant: Model1Variant::I,
        },
        ModelId::Model1 {
            variant: Model1Variant::Ii,
        },
        ModelId::Model2,
        ModelId::Model3 { q: 0.8 },
    ] {
        let (ds, truth) = model.generate(20, 1).unwrap();
        assert_eq!(truth.beta_star.len(), ds.p());
        let nonzero: Vec<usize> = (0..ds.p()).filter(|&j| truth.beta_star[j] != 0.0).collect();
        assert_eq!(nonzero, truth.s_star.indices());
        assert_eq!(truth.s_star.intersection_len(&truth.g_set), 0);
        assert_eq!(ds.n_envs(), 2);
        for env in ds.envs() {
            assert!(env.column(0).all(|v| v == 1.0));
            assert_eq!(env.n(), 20);
        }
        assert_eq!(truth.model_id, model);
    }
}

#[test]
fn model1_marginal_moments() {
    let n = 200_000;
    let (ds, _) = gen_model1(n, Model1Variant::I, 3).unwrap();
    let root = (n as f64).sqrt();
    let x1 = column(&ds.envs()[0], 1);
    assert!(mean(&x1).abs() < 3.0 / root);
    // environment 2: x4 = u4² − 1 has mean 0 and variance 2
    let x4 = column(&ds.envs()[1], 4);
    assert!(mean(&x4).abs() < 5.0 / root);
    assert!(
        (variance(&x4) - 2.0).abs() < 0.05,
        "variance {}",
        variance(&x4)
    );
}

/// Rebuilds every Model 1 variable from its recorded parents and noise terms.
#[test]
fn model1_structural_equations_replay() {
    for variant in [Model1Variant::I, Model1Variant::Ii] {
        let (seed, n) = (17, 300);
        let (ds, _) = gen_model1(n, variant, seed).unwrap();
        for (e, env) in ds.envs().iter().enumerate() {
            let env_id = e as u64 + 1;
            let u: Vec<Vec<f64>> = (1..=13)
                .map(|k| noise_term(seed, env_id, k, n, model1_noise_law(variant, env_id)))
                .collect();
            let x = |j: usize, i: usize| env.row(i)[j];
            for i in 0..n {
                let y = env.y()[i];
                let x4 = if env_id == 1 {
                    u[3][i]
                } else {
                    u[3][i] * u[3][i] - 1.0
                };
                let x7 = if env_id == 1 {
                    0.5 * x(3, i) + y + u[6][i]
                } else {
                    4.0 * x(3, i) + y.tanh() + u[6][i]
                };
                let want = [
                    (1, u[0][i]),
                    (2, x(4, i).sin() + u[1][i]),
                    (3, x(4, i).cos() + u[2][i]),
                    (4, x4),
                    (5, (x(3, i) + u[4][i]).sin()),
                    (6, 0.8 * y * u[5][i]),
                    (7, x7),
                    (8, 0.5 * x(7, i) - y + x(10, i) + u[7][i]),
                    (9, x(7, i).tanh() + 0.1 * x(8, i).cos() + u[8][i]),
                    (10, 2.5 * x(1, i) + 1.5 * x(2, i) + u[9][i]),
                    (11, 0.4 * (x(7, i) + x(8, i)) * u[10][i]),
                    (12, u[11][i]),
                ];
                for (j, v) in want {
                    assert!(
                        (x(j, i) - v).abs() <= 1e-12 * (1.0 + v.abs()),
                        "env {env_id} x{j} row {i}"
                    );
                }
                let yy = 3.0 * x(1, i) + 2.0 * x(2, i) - 0.5 * x(3, i) + u[12][i];
                assert!((y - yy).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }
    }
}

#[test]
fn model1_heavy_tails_only_in_the_first_environment() {
    assert_eq!(
        model1_noise_law(Model1Variant::Ii, 1),
        NoiseLaw::StudentT(1.5)
    );
    assert_eq!(model1_noise_law(Model1Variant::Ii, 2), NoiseLaw::Normal);
    assert_eq!(model1_noise_law(Model1Variant::I, 1), NoiseLaw::Normal);
    let (ds, _) = gen_model1(20_000, Model1Variant::Ii, 4).unwrap();
    let x12_heavy = column(&ds.envs()[0], 12);
    let x12_normal = column(&ds.envs()[1], 12);
    let max = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    assert!(max(&x12_heavy) > 50.0);
    assert!(max(&x12_normal) < 6.0);
}

#[test]
fn model2_x4_is_pure_noise_in_the_second_environment() {
    let n = 50_000;
    let (ds, truth) = gen_model2(n, 5).unwrap();
    assert_eq!(truth.beta_star, vec![0.0, 3.0, 2.0, -0.5, 0.0]);
    assert_eq!(truth.g_set.indices(), &[4]);
    let env = &ds.envs()[1];
    let r = correlation(&column(env, 4), env.y());
    assert!(r.abs() < 4.0 / (n as f64).sqrt(), "correlation {r}");
    for i in 0..50 {
        let row = ds.envs()[0].row(i);
        let y = 3.0 * row[1] + 2.0 * row[2] - 0.5 * row[3];
        let noise = noise_term(5, 1, 5, n, NoiseLaw::Normal)[i];
        assert!((ds.envs()[0].y()[i] - y - noise).abs() < 1e-12);
    }
}

/// `x4 = 5y² + u4` in environment 1. With `ε` standard normal and independent
/// of the mean-zero signal `a`, `E[(1(ε ≤ z) − τ) x4] = 5 E[(1(ε ≤ z) − τ) ε²]`
/// `= −5 z φ(z)` for `z = Φ⁻¹(τ)`. At the median this is exactly zero, so the
/// moment separates from zero only away from `τ = 0.5`.
#[test]
fn model2_endogeneity_moment_matches_its_closed_form() {
    let n = 100_000;
    let (ds, _) = gen_model2(n, 6).unwrap();
    let env = &ds.envs()[0];
    let eps: Vec<f64> = env
        .rows()
        .zip(env.y())
        .map(|(x, y)| y - 3.0 * x[1] - 2.0 * x[2] + 0.5 * x[3])
        .collect();
    let x4 = column(env, 4);
    for tau in [0.5, 0.3, 0.7] {
        let z = oracle::normal_quantile_oracle(tau);
        let terms: Vec<f64> = eps
            .iter()
            .zip(&x4)
            .map(|(e, x)| (if *e <= z { 1.0 } else { 0.0 } - tau) * x)
            .collect();
        let m = mean(&terms);
        let se = (variance(&terms) / n as f64).sqrt();
        let want = -5.0 * z * oracle::gaussian_pdf(z);
        assert!(
            (m - want).abs() < 4.0 * se,
            "tau={tau}: {m} vs {want} (se {se})"
        );
        if tau != 0.5 {
            assert!(m.abs() > 0.2, "tau={tau}: {m}");
        }
    }
}

#[test]
fn model3_threshold_and_activation() {
    let z = normal_quantile(0.8).unwrap();
    assert!((z - 0.841_621_2).abs() < 1e-7);
    assert!((z - oracle::normal_quantile_oracle(0.8)).abs() < 1e-10);

    let (n, q) = (40_000, 0.8);
    let (ds, truth) = gen_model3(n, q, 8).unwrap();
    assert!(truth.g_set.is_empty());
    for (e, env) in ds.envs().iter().enumerate() {
        let u4 = noise_term(8, e as u64 + 1, 4, n, NoiseLaw::Normal);
        let active = u4.iter().filter(|&&u| u > z).count() as f64 / n as f64;
        assert!((active - (1.0 - q)).abs() < 3.0 * (q * (1.0 - q) / n as f64).sqrt());
        for i in 0..n {
            let x = env.row(i);
            let gate = if u4[i] > z { 1.0 } else { 0.0 };
            let y = 3.0 * x[1] + 2.0 * x[2] - 0.5 * x[3] * gate + u4[i];
            assert!((env.y()[i] - y).abs() < 1e-12);
        }
    }

    // as q → 0 the indicator is always on and the model is plain linear
    let (ds, _) = gen_model3(2000, 1e-12, 8).unwrap();
    for (e, env) in ds.envs().iter().enumerate() {
        let u4 = noise_term(8, e as u64 + 1, 4, 2000, NoiseLaw::Normal);
        for i in 0..2000 {
            let x = env.row(i);
            assert!((env.y()[i] - (3.0 * x[1] + 2.0 * x[2] - 0.5 * x[3] + u4[i])).abs() < 1e-12);
        }
    }
}

#[test]
fn normal_quantiles_match_the_root_finding_oracle() {
    for q in [0.001, 0.05, 0.3, 0.5, 0.77, 0.975, 0.999] {
        let got = normal_quantile(q).unwrap();
        assert!(
            (got - oracle::normal_quantile_oracle(q)).abs() < 1e-10,
            "q={q}"
        );
    }
}

fn t_draws(df: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut r = stream(seed, domain::SCM_NOISE, 999);
    (0..n).map(|_| sample_student_t(df, &mut r)).collect()
}

#[test]
fn student_t_draws() {
    let n = 1_000_000;
    let near_normal = t_draws(1e6, n, 1);
    assert!((variance(&near_normal) - 1.0).abs() < 0.01);

    let heavy = t_draws(1.5, n, 2);
    assert!(quantile(heavy.clone(), 0.5).abs() < 0.01);
    let q90 = quantile(heavy, 0.9);
    let want = oracle::student_t_quantile_oracle(1.5, 0.9);
    assert!((q90 - want).abs() < 0.05, "{q90} vs {want}");
}

#[test]
fn generators_are_deterministic() {
    for model in [
        ModelId::Model1 {
            variant: Model1Variant::Ii,
        },
        ModelId::Model2,
        ModelId::Model3 { q: 0.6 },
    ] {
        let a = model.generate(100, 42).unwrap();
        let b = model.generate(100, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0, model.generate(100, 43).unwrap().0);
    }
    // a larger sample extends the smaller one
    let (small, _) = gen_model2(50, 9).unwrap();
    let (large, _) = gen_model2(80, 9).unwrap();
    assert_eq!(small.envs()[0].row(49), large.envs()[0].row(49));
}
