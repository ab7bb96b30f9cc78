//! Limited-memory quasi-Newton minimisation with box bounds.
//!
//! Projected L-BFGS: the two-loop recursion runs on the free variables (those
//! not pinned to a bound by their gradient), steps are capped at the box, and
//! a strong-Wolfe line search (bracketing + zoom with safeguarded cubic
//! interpolation) picks the step length. Convergence is declared when the
//! ∞-norm of the projected gradient drops below `gtol`.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{bail, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsbOptions {
    pub memory: usize,
    pub max_iter: usize,
    pub gtol: f64,
    pub lower: f64,
    pub upper: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsbOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iter: 500,
            gtol: 1e-8,
            lower: -1e6,
            upper: 1e6,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// No step satisfying the line-search conditions could be found; usually
    /// the iterate is already at rounding-level optimality.
    LineSearchStalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    /// ∞-norm of the projected gradient at `x`.
    pub pg_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

impl Minimum {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Problem<'f, F> {
    f: &'f mut F,
    evals: usize,
}

impl<F: FnMut(&[f64], &mut [f64]) -> f64> Problem<'_, F> {
    fn eval(&mut self, x: &[f64], g: &mut [f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x, g);
        if v.is_finite() && g.iter().all(|gi| gi.is_finite()) {
            v
        } else {
            f64::NAN
        }
    }
}

struct Trial {
    alpha: f64,
    f: f64,
    x: Vec<f64>,
    g: Vec<f64>,
}

/// Inverse of a symmetric positive definite metric `M`, used as the initial
/// inverse Hessian of the quasi-Newton recursion (scaled each iteration by
/// `sᵀy / yᵀM⁻¹y`).
#[derive(Debug, Clone)]
pub struct Preconditioner {
    chol: Option<Cholesky<f64, Dyn>>,
}

impl Preconditioner {
    pub fn identity() -> Self {
        Self { chol: None }
    }

    /// `M` given row-major as `n × n`. Falls back to the identity when `M`
    /// is not numerically positive definite.
    pub fn from_matrix(m: &[f64], n: usize) -> Self {
        let mat = DMatrix::from_row_slice(n, n, m);
        let ok = mat.iter().all(|v| v.is_finite());
        Self {
            chol: if ok { mat.cholesky() } else { None },
        }
    }

    fn apply(&self, v: &mut [f64]) {
        if let Some(ch) = &self.chol {
            let mut b = DVector::from_column_slice(v);
            ch.solve_mut(&mut b);
            v.copy_from_slice(b.as_slice());
        }
    }
}

/// Minimises `f` starting from `x0`. The closure writes the gradient into its
/// second argument and returns the objective value.
pub fn minimize<F>(f: F, x0: &[f64], opts: &LbfgsbOptions) -> Result<Minimum>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    minimize_preconditioned(f, x0, &Preconditioner::identity(), opts)
}

/// [`minimize`] with a metric `M` in place of the identity as the initial
/// inverse-Hessian model.
pub fn minimize_preconditioned<F>(
    mut f: F,
    x0: &[f64],
    precond: &Preconditioner,
    opts: &LbfgsbOptions,
) -> Result<Minimum>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    if let Some(ch) = &precond.chol {
        if ch.l_dirty().nrows() != n {
            bail!(
                Usage,
                "preconditioner has dimension {}, expected {n}",
                ch.l_dirty().nrows()
            );
        }
    }
    let mut prob = Problem {
        f: &mut f,
        evals: 0,
    };
    let bounds = Bounds {
        lower: opts.lower,
        upper: opts.upper,
    };
    let mut x: Vec<f64> = x0.iter().map(|v| v.clamp(opts.lower, opts.upper)).collect();
    let mut g = vec![0.0; n];
    let mut fx = prob.eval(&x, &mut g);
    if fx.is_nan() {
        bail!(Numerical, "objective is not finite at the starting point");
    }
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;

    let projected = |x: &[f64], g: &[f64]| -> Vec<f64> {
        x.iter()
            .zip(g)
            .map(|(&xi, &gi)| {
                if (xi <= opts.lower && gi > 0.0) || (xi >= opts.upper && gi < 0.0) {
                    0.0
                } else {
                    gi
                }
            })
            .collect()
    };
    let inf_norm = |v: &[f64]| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));

    let mut pg = projected(&x, &g);
    while iterations < opts.max_iter {
        if inf_norm(&pg) <= opts.gtol {
            termination = Termination::Converged;
            break;
        }
        let mut retried = false;
        loop {
            let pinned: Vec<bool> = pg
                .iter()
                .zip(&g)
                .map(|(p, g)| *p == 0.0 && *g != 0.0)
                .collect();
            let mut d = two_loop(&pg, &pinned, &hist, precond);
            let mut slope = dot(&d, &g);
            if !(slope < 0.0) {
                hist.clear();
                d = pg.iter().map(|v| -v).collect();
                slope = dot(&d, &g);
            }
            let alpha_max = max_feasible_step(&x, &d, &bounds);
            let alpha0 = if hist.is_empty() {
                (1.0 / inf_norm(&d).max(1e-300)).min(1.0)
            } else {
                1.0
            }
            .min(alpha_max);
            match line_search(
                &mut prob, &x, fx, slope, &d, alpha0, alpha_max, &bounds, opts,
            ) {
                Some(trial) => {
                    let s: Vec<f64> = trial.x.iter().zip(&x).map(|(a, b)| a - b).collect();
                    let y: Vec<f64> = trial.g.iter().zip(&g).map(|(a, b)| a - b).collect();
                    let sy = dot(&s, &y);
                    if sy > 1e-12 * libm::sqrt(dot(&y, &y) * dot(&s, &s)) {
                        if hist.len() == opts.memory {
                            hist.pop_front();
                        }
                        hist.push_back((s, y, 1.0 / sy));
                    }
                    x = trial.x;
                    g = trial.g;
                    fx = trial.f;
                    break;
                }
                None if !retried && !hist.is_empty() => {
                    hist.clear();
                    retried = true;
                }
                None => {
                    termination = Termination::LineSearchStalled;
                    break;
                }
            }
        }
        if termination == Termination::LineSearchStalled {
            break;
        }
        iterations += 1;
        pg = projected(&x, &g);
    }
    if termination == Termination::MaxIterations && inf_norm(&pg) <= opts.gtol {
        termination = Termination::Converged;
    }
    let pg_norm = inf_norm(&pg);
    Ok(Minimum {
        x,
        f: fx,
        grad: g,
        pg_norm,
        iterations,
        evaluations: prob.evals,
        termination,
    })
}

/// `−H g` by the two-loop recursion with `H₀ = (sᵀy / yᵀM⁻¹y) M⁻¹`.
fn two_loop(
    grad: &[f64],
    pinned: &[bool],
    hist: &VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    precond: &Preconditioner,
) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(hist.len());
    for (s, y, rho) in hist.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    precond.apply(&mut q);
    if let Some((s, y, _)) = hist.back() {
        let mut my = y.clone();
        precond.apply(&mut my);
        let scale = dot(s, y) / dot(y, &my);
        q.iter_mut().for_each(|qi| *qi *= scale);
    }
    for ((s, y, rho), a) in hist.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    // Coordinates pinned at a bound stay fixed.
    for (qi, &pin) in q.iter_mut().zip(pinned) {
        *qi = if pin { 0.0 } else { -*qi };
    }
    q
}

struct Bounds {
    lower: f64,
    upper: f64,
}

fn max_feasible_step(x: &[f64], d: &[f64], b: &Bounds) -> f64 {
    x.iter().zip(d).fold(f64::INFINITY, |amax, (&xi, &di)| {
        if di > 0.0 {
            amax.min((b.upper - xi) / di)
        } else if di < 0.0 {
            amax.min((b.lower - xi) / di)
        } else {
            amax
        }
    })
}

/// Safeguarded cubic minimiser of the Hermite interpolant on `[a, b]`.
fn cubic_step(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> f64 {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let mid = 0.5 * (a + b);
    if disc < 0.0 || !disc.is_finite() {
        return mid;
    }
    let d2 = (b - a).signum() * libm::sqrt(disc);
    let t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    let margin = 0.1 * (hi - lo);
    if t.is_finite() && t > lo + margin && t < hi - margin {
        t
    } else {
        mid
    }
}

#[allow(clippy::too_many_arguments)]
fn line_search<F: FnMut(&[f64], &mut [f64]) -> f64>(
    prob: &mut Problem<'_, F>,
    x: &[f64],
    f0: f64,
    d0: f64,
    dir: &[f64],
    alpha0: f64,
    alpha_max: f64,
    bounds: &Bounds,
    opts: &LbfgsbOptions,
) -> Option<Trial> {
    // Armijo slack at the rounding level of f so that steps taken right at
    // the optimum are not rejected for noise.
    let slack = 1e-13 * (1.0 + f0.abs());
    let mut eval = |alpha: f64| -> (Trial, f64) {
        let xn: Vec<f64> = (0..x.len())
            .map(|j| (x[j] + alpha * dir[j]).clamp(bounds.lower, bounds.upper))
            .collect();
        let mut gn = vec![0.0; x.len()];
        let fval = prob.eval(&xn, &mut gn);
        let dphi = dot(&gn, dir);
        (
            Trial {
                alpha,
                f: fval,
                x: xn,
                g: gn,
            },
            dphi,
        )
    };
    let armijo = |t: &Trial| t.f <= f0 + opts.c1 * t.alpha * d0 + slack;
    let curvature = |dphi: f64| dphi.abs() <= -opts.c2 * d0;

    let mut best: Option<Trial> = None;
    let keep_best = |t: &Trial, best: &mut Option<Trial>| {
        if t.f < f0 && best.as_ref().map_or(true, |b| t.f < b.f) {
            *best = Some(Trial {
                alpha: t.alpha,
                f: t.f,
                x: t.x.clone(),
                g: t.g.clone(),
            });
        }
    };

    let (mut lo_a, mut lo_f, mut lo_d) = (0.0, f0, d0);
    let mut alpha = alpha0;
    let mut budget = opts.max_line_search;
    let mut bracket: Option<(f64, f64, f64)> = None;
    let mut first = true;
    while budget > 0 {
        budget -= 1;
        let (t, dphi) = eval(alpha);
        if t.f.is_nan() {
            // Non-finite trial: reject the step and shrink toward the last good point.
            alpha = lo_a + 0.5 * (alpha - lo_a);
            first = false;
            continue;
        }
        keep_best(&t, &mut best);
        if !armijo(&t) || (!first && t.f >= lo_f) {
            bracket = Some((alpha, t.f, dphi));
            break;
        }
        if curvature(dphi) {
            return Some(t);
        }
        if dphi >= 0.0 {
            bracket = Some((lo_a, lo_f, lo_d));
            lo_a = alpha;
            lo_f = t.f;
            lo_d = dphi;
            break;
        }
        if alpha >= alpha_max {
            return Some(t);
        }
        lo_a = alpha;
        lo_f = t.f;
        lo_d = dphi;
        alpha = (2.0 * alpha).min(alpha_max);
        first = false;
    }

    // Zoom between lo (satisfies Armijo, lowest f) and hi.
    if let Some((mut hi_a, mut hi_f, mut hi_d)) = bracket {
        while budget > 0 {
            budget -= 1;
            let a = cubic_step(lo_a, lo_f, lo_d, hi_a, hi_f, hi_d);
            if (hi_a - lo_a).abs() < 1e-16 * lo_a.abs().max(1e-300) {
                break;
            }
            let (t, dphi) = eval(a);
            if t.f.is_nan() {
                hi_a = a;
                hi_f = f64::INFINITY;
                hi_d = f64::NAN;
                continue;
            }
            keep_best(&t, &mut best);
            if !armijo(&t) || t.f >= lo_f {
                hi_a = a;
                hi_f = t.f;
                hi_d = dphi;
            } else {
                if curvature(dphi) {
                    return Some(t);
                }
                if dphi * (hi_a - lo_a) >= 0.0 {
                    hi_a = lo_a;
                    hi_f = lo_f;
                    hi_d = lo_d;
                }
                lo_a = a;
                lo_f = t.f;
                lo_d = dphi;
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64], g: &mut [f64]) -> f64 {
        let (a, b) = (x[0], x[1]);
        g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        g[1] = 200.0 * (b - a * a);
        (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
    }

    #[test]
    fn solves_rosenbrock() {
        let m = minimize(rosenbrock, &[-1.2, 1.0], &LbfgsbOptions::default()).unwrap();
        assert!(m.converged(), "{:?}", m.termination);
        assert!((m.x[0] - 1.0).abs() < 1e-7 && (m.x[1] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn respects_active_bounds() {
        // min (x - 3)^2 + (y + 1)^2 on [-2, 2]^2 → (2, -1)
        let opts = LbfgsbOptions {
            lower: -2.0,
            upper: 2.0,
            ..Default::default()
        };
        let m = minimize(
            |x, g| {
                g[0] = 2.0 * (x[0] - 3.0);
                g[1] = 2.0 * (x[1] + 1.0);
                (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2)
            },
            &[0.0, 0.0],
            &opts,
        )
        .unwrap();
        assert!(m.converged());
        assert_eq!(m.x[0], 2.0);
        assert!((m.x[1] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn starting_at_the_optimum_takes_no_steps() {
        let m = minimize(
            |x, g| {
                g[0] = 2.0 * x[0];
                x[0] * x[0]
            },
            &[0.0],
            &LbfgsbOptions::default(),
        )
        .unwrap();
        assert_eq!(m.iterations, 0);
        assert!(m.converged());
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let r = minimize(
            |_, g| {
                g[0] = 0.0;
                f64::NAN
            },
            &[0.0],
            &LbfgsbOptions::default(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn non_finite_trials_are_rejected_not_fatal() {
        // f = x² − log(1 − x) for x < 1, infinite beyond: steps past 1 must shrink.
        let m = minimize(
            |x, g| {
                if x[0] >= 1.0 {
                    g[0] = 0.0;
                    return f64::INFINITY;
                }
                g[0] = 2.0 * x[0] + 1.0 / (1.0 - x[0]);
                x[0] * x[0] - libm::log(1.0 - x[0])
            },
            &[-5.0],
            &LbfgsbOptions::default(),
        )
        .unwrap();
        assert!(m.converged());
        // 2x + 1/(1-x) = 0  →  2x² − 2x − 1 = 0  →  x = (1 − √3)/2
        assert!((m.x[0] - (1.0 - libm::sqrt(3.0)) / 2.0).abs() < 1e-8);
    }
}
