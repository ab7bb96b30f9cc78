//! Numerical oracles for the test suites.
//!
//! Everything here is written from first principles (adaptive quadrature,
//! bisection, central differences, Gaussian elimination) and must never call
//! into `ksfiqr-core`. Tests compare the library against these routes.

/// 7-point Gauss nodes/weights embedded in the 15-point Kronrod rule on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for k in 0..7 {
        let dx = r * XGK[k];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[k] * s;
        if k % 2 == 1 {
            gauss += WG[k / 2] * s;
        }
    }
    (kron * r, ((kron - gauss) * r).abs())
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (val, err) = gk15(f, a, b);
    if err <= tol.max(1e-300) || depth >= 60 || (b - a).abs() < 1e-14 * (1.0 + a.abs()) {
        return val;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, 0.5 * tol, depth + 1) + adapt(f, m, b, 0.5 * tol, depth + 1)
}

/// Adaptive Gauss–Kronrod (G7/K15) quadrature of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    adapt(&f, a, b, tol, 0)
}

/// Quadrature over `[a, b]` split at the given interior breakpoints.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: f64,
) -> f64 {
    let mut pts = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&t| t > a && t < b).collect();
    inner.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.extend(inner);
    pts.push(b);
    let pieces = (pts.len() - 1) as f64;
    pts.windows(2)
        .map(|w| integrate(&f, w[0], w[1], tol / pieces))
        .sum()
}

pub fn check_loss(tau: f64, u: f64) -> f64 {
    u * (tau - if u < 0.0 { 1.0 } else { 0.0 })
}

pub fn gaussian_pdf(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn uniform_pdf(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.5
    } else {
        0.0
    }
}

/// Unnormalised Epanechnikov shape; normalise with [`normalizer`].
pub fn epanechnikov_shape(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        1.0 - u * u
    } else {
        0.0
    }
}

/// 1 / ∫ g over [lo, hi].
pub fn normalizer<F: Fn(f64) -> f64>(g: F, lo: f64, hi: f64) -> f64 {
    1.0 / integrate(g, lo, hi, 1e-14)
}

/// Reach of a kernel (beyond which it is treated as zero).
pub fn kernel_reach(compact: bool) -> f64 {
    if compact {
        1.0
    } else {
        40.0
    }
}

/// ∫ ρ_τ(u) K((u − v)/h)/h du by adaptive quadrature, split at the kink u = 0
/// and at the kernel support edges.
pub fn smoothed_loss_oracle<K: Fn(f64) -> f64>(
    kernel: K,
    compact: bool,
    tau: f64,
    h: f64,
    v: f64,
) -> f64 {
    let reach = kernel_reach(compact) * h;
    let breaks = [0.0, v - h, v + h, v - 8.0 * h, v + 8.0 * h];
    integrate_with_breaks(
        |u| check_loss(tau, u) * kernel((u - v) / h) / h,
        v - reach,
        v + reach,
        &breaks,
        1e-13,
    )
}

/// CDF of a kernel density by quadrature from its left reach.
pub fn kernel_cdf_oracle<K: Fn(f64) -> f64>(kernel: K, compact: bool, u: f64) -> f64 {
    let lo = -kernel_reach(compact);
    if u <= lo {
        return 0.0;
    }
    let hi = u.min(-lo);
    integrate_with_breaks(&kernel, lo, hi, &[0.0], 1e-14)
}

/// Standard normal CDF from quadrature of the density.
pub fn normal_cdf_oracle(x: f64) -> f64 {
    if x >= 0.0 {
        0.5 + integrate(gaussian_pdf, 0.0, x, 1e-15)
    } else {
        0.5 - integrate(gaussian_pdf, x, 0.0, 1e-15)
    }
}

/// Bisection root of an increasing function on `[lo, hi]`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    assert!(
        f(lo) <= 0.0 && f(hi) >= 0.0,
        "bracket does not straddle the root"
    );
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn normal_quantile_oracle(q: f64) -> f64 {
    bisect(|x| normal_cdf_oracle(x) - q, -10.0, 10.0, 1e-13)
}

/// Quantile of Student's t with `df` degrees of freedom via quadrature of the
/// unnormalised density and bisection. Valid for q ≥ 1/2.
pub fn student_t_quantile_oracle(df: f64, q: f64) -> f64 {
    assert!(q >= 0.5);
    let shape = move |t: f64| (1.0 + t * t / df).powf(-(df + 1.0) / 2.0);
    // ∫_0^∞ shape(t) dt via t = s / (1 − s).
    let half_mass = integrate(
        |s| {
            if s >= 1.0 {
                0.0
            } else {
                let t = s / (1.0 - s);
                shape(t) / ((1.0 - s) * (1.0 - s))
            }
        },
        0.0,
        1.0,
        1e-13,
    );
    let cdf = |x: f64| 0.5 + 0.5 * integrate(shape, 0.0, x, 1e-13) / half_mass;
    let mut hi = 1.0;
    while cdf(hi) < q {
        hi *= 2.0;
    }
    bisect(|x| cdf(x) - q, 0.0, hi, 1e-12)
}

/// Central difference derivative with step `eps`.
pub fn central_diff<F: Fn(f64) -> f64>(f: F, x: f64, eps: f64) -> f64 {
    (f(x + eps) - f(x - eps)) / (2.0 * eps)
}

/// Central difference gradient of a multivariate function.
pub fn fd_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], eps: f64) -> Vec<f64> {
    let mut work = x.to_vec();
    (0..x.len())
        .map(|j| {
            let orig = work[j];
            work[j] = orig + eps;
            let fp = f(&work);
            work[j] = orig - eps;
            let fm = f(&work);
            work[j] = orig;
            (fp - fm) / (2.0 * eps)
        })
        .collect()
}

/// Central difference Jacobian (rows = outputs) of a vector function.
pub fn fd_jacobian<F: Fn(&[f64]) -> Vec<f64>>(f: F, x: &[f64], eps: f64) -> Vec<Vec<f64>> {
    let mut work = x.to_vec();
    let cols: Vec<Vec<f64>> = (0..x.len())
        .map(|j| {
            let orig = work[j];
            work[j] = orig + eps;
            let fp = f(&work);
            work[j] = orig - eps;
            let fm = f(&work);
            work[j] = orig;
            fp.iter()
                .zip(&fm)
                .map(|(a, b)| (a - b) / (2.0 * eps))
                .collect()
        })
        .collect();
    let m = cols.first().map_or(0, Vec::len);
    (0..m)
        .map(|i| cols.iter().map(|c| c[i]).collect())
        .collect()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Ordinary least squares through the normal equations of the stacked rows.
pub fn ols_oracle(rows: &[Vec<f64>], y: &[f64], row_weights: &[f64]) -> Vec<f64> {
    let p = rows[0].len();
    let mut gram = vec![vec![0.0; p]; p];
    let mut rhs = vec![0.0; p];
    for ((x, &yi), &w) in rows.iter().zip(y).zip(row_weights) {
        for a in 0..p {
            rhs[a] += w * x[a] * yi;
            for b in 0..p {
                gram[a][b] += w * x[a] * x[b];
            }
        }
    }
    solve_dense(gram, rhs)
}

/// Relative error with an absolute floor.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}
