#![allow(dead_code)]

use ksfiqr_core::{EnvironmentData, KernelFamily, KernelSpec, MultiEnvDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const FAMILIES: [KernelFamily; 3] = [
    KernelFamily::Gaussian,
    KernelFamily::Uniform,
    KernelFamily::Epanechnikov,
];

/// The kernel density written out independently of the library.
pub fn oracle_density(family: KernelFamily) -> (Box<dyn Fn(f64) -> f64>, bool) {
    match family {
        KernelFamily::Gaussian => (Box::new(ksfiqr_testkit::gaussian_pdf), false),
        KernelFamily::Uniform => (Box::new(ksfiqr_testkit::uniform_pdf), true),
        KernelFamily::Epanechnikov => {
            let c = ksfiqr_testkit::normalizer(ksfiqr_testkit::epanechnikov_shape, -1.0, 1.0);
            (
                Box::new(move |u| c * ksfiqr_testkit::epanechnikov_shape(u)),
                true,
            )
        }
    }
}

pub fn spec(family: KernelFamily) -> KernelSpec {
    KernelSpec::new(family)
}

/// Standard normal draw by Box–Muller.
pub fn normal(r: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - r.random::<f64>();
    let u2: f64 = r.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Linear data with Gaussian covariates and noise; `p` counts the intercept.
pub fn linear_env(r: &mut ChaCha8Rng, n: usize, beta: &[f64], noise: f64) -> EnvironmentData {
    let p = beta.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (1..p).map(|_| normal(r)).collect())
        .collect();
    let y = rows
        .iter()
        .map(|x| {
            beta[0] + x.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>() + noise * normal(r)
        })
        .collect();
    EnvironmentData::from_covariates(&rows, y).unwrap()
}

/// Two environments whose slopes differ, so no support is exactly invariant.
pub fn two_env(seed: u64, n: usize, p: usize) -> MultiEnvDataset {
    let mut r = rng(seed);
    let b1: Vec<f64> = (0..p)
        .map(|j| if j == 0 { 0.2 } else { 1.0 / j as f64 })
        .collect();
    let b2: Vec<f64> = b1
        .iter()
        .enumerate()
        .map(|(j, b)| if j == p - 1 { b + 0.8 } else { *b })
        .collect();
    let e1 = linear_env(&mut r, n, &b1, 1.0);
    let e2 = linear_env(&mut r, n + n / 3, &b2, 0.7);
    MultiEnvDataset::new(vec![e1, e2], vec![0.4, 0.6]).unwrap()
}

pub fn random_beta(r: &mut ChaCha8Rng, p: usize, scale: f64) -> Vec<f64> {
    (0..p)
        .map(|_| scale * (2.0 * r.random::<f64>() - 1.0))
        .collect()
}

pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    ksfiqr_testkit::rel_err(a, b, floor)
}
