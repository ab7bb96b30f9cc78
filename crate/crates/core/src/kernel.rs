//! Smoothing kernels and the convolution-smoothed check loss.
//!
//! For a symmetric density `K` with CDF `K̄` and bandwidth `h`, the smoothed
//! check loss is `ℓ_{h,τ} = ρ_τ * K_h` with `K_h(u) = K(u/h)/h`. It is convex,
//! twice differentiable, and satisfies
//!
//! ```text
//! ℓ'_{h,τ}(v)  = τ − K̄(−v/h)
//! ℓ''_{h,τ}(v) = K_h(v)
//! ρ_τ(v) ≤ ℓ_{h,τ}(v) ≤ ρ_τ(v) + max(τ, 1 − τ)·k1·h
//! ```

use core::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
    Uniform,
    Epanechnikov,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Uniform => "uniform",
            Self::Epanechnikov => "epanechnikov",
        }
    }
}

impl core::str::FromStr for KernelFamily {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Self::Gaussian),
            "uniform" => Ok(Self::Uniform),
            "epanechnikov" => Ok(Self::Epanechnikov),
            other => bail!(Config, "unknown kernel '{other}'"),
        }
    }
}

/// A kernel together with its moment constants.
///
/// `k1 = ∫|u|K(u)du`, `k2 = ∫u²K(u)du`, `k_u = sup K`, `k_l = min_{|u|≤1} K(u)`.
/// `k_l` is informational only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub k1: f64,
    pub k2: f64,
    pub k_u: f64,
    pub k_l: f64,
}

/// Value and first two derivatives of `ℓ_{h,τ}` at one residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothedTerms {
    pub loss: f64,
    /// `ℓ'(v) = τ − K̄(−v/h)`
    pub slope: f64,
    /// `ℓ''(v) = K_h(v)`
    pub curvature: f64,
}

/// The check (pinball) loss `ρ_τ(u) = u(τ − 1(u < 0))`.
#[inline]
pub fn check_loss(tau: f64, u: f64) -> f64 {
    if u < 0.0 {
        u * (tau - 1.0)
    } else {
        u * tau
    }
}

pub(crate) fn validate_tau_h(tau: f64, h: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        bail!(Config, "quantile level must lie in (0, 1), got {tau}");
    }
    if !(h > 0.0 && h.is_finite()) {
        bail!(Config, "bandwidth must be positive and finite, got {h}");
    }
    Ok(())
}

#[inline]
fn std_normal_pdf(u: f64) -> f64 {
    FRAC_1_SQRT_2PI * libm::exp(-0.5 * u * u)
}

#[inline]
fn std_normal_cdf(u: f64) -> f64 {
    0.5 * libm::erfc(-u * FRAC_1_SQRT_2)
}

// 3-point Gauss–Legendre rule; exact for the cubic pieces of the
// Epanechnikov convolution once the integral is split at the kink.
const GL3_NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GL3_WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

const GAUSSIAN_TAIL: f64 = 10.0;

impl KernelSpec {
    pub fn gaussian() -> Self {
        Self {
            family: KernelFamily::Gaussian,
            k1: libm::sqrt(2.0 / PI),
            k2: 1.0,
            k_u: FRAC_1_SQRT_2PI,
            k_l: std_normal_pdf(1.0),
        }
    }

    pub fn uniform() -> Self {
        Self {
            family: KernelFamily::Uniform,
            k1: 0.5,
            k2: 1.0 / 3.0,
            k_u: 0.5,
            k_l: 0.5,
        }
    }

    pub fn epanechnikov() -> Self {
        Self {
            family: KernelFamily::Epanechnikov,
            k1: 0.375,
            k2: 0.2,
            k_u: 0.75,
            k_l: 0.0,
        }
    }

    pub fn new(family: KernelFamily) -> Self {
        match family {
            KernelFamily::Gaussian => Self::gaussian(),
            KernelFamily::Uniform => Self::uniform(),
            KernelFamily::Epanechnikov => Self::epanechnikov(),
        }
    }

    /// Kernel density `K(u)`.
    pub fn density(&self, u: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => std_normal_pdf(u),
            KernelFamily::Uniform => {
                if u.abs() <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
            KernelFamily::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
        }
    }

    /// Kernel CDF `K̄(u)`.
    pub fn cdf(&self, u: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => std_normal_cdf(u),
            KernelFamily::Uniform => (0.5 * (u + 1.0)).clamp(0.0, 1.0),
            KernelFamily::Epanechnikov => {
                if u <= -1.0 {
                    0.0
                } else if u >= 1.0 {
                    1.0
                } else {
                    0.5 + 0.75 * (u - u * u * u / 3.0)
                }
            }
        }
    }

    /// `ℓ_{h,τ}(v)`; validates `τ ∈ (0,1)` and `h > 0`.
    pub fn smoothed_check_loss(&self, tau: f64, h: f64, v: f64) -> Result<f64> {
        validate_tau_h(tau, h)?;
        Ok(self.smoothed_loss_unchecked(tau, h, v))
    }

    /// `ℓ'_{h,τ}(v) = τ − K̄(−v/h)`; bounded in `[τ − 1, τ]`.
    pub fn smoothed_check_grad(&self, tau: f64, h: f64, v: f64) -> Result<f64> {
        validate_tau_h(tau, h)?;
        Ok(tau - self.cdf(-v / h))
    }

    pub(crate) fn smoothed_loss_unchecked(&self, tau: f64, h: f64, v: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => {
                let z = v / h;
                h * std_normal_pdf(z) + v * (tau - std_normal_cdf(-z))
            }
            KernelFamily::Uniform => {
                if v.abs() >= h {
                    check_loss(tau, v)
                } else {
                    tau * v + (v - h) * (v - h) / (4.0 * h)
                }
            }
            KernelFamily::Epanechnikov => self.epanechnikov_loss(tau, h, v),
        }
    }

    /// `∫_{-1}^{1} ρ_τ(v + h s) K(s) ds`, split at the kink `s = −v/h`.
    fn epanechnikov_loss(&self, tau: f64, h: f64, v: f64) -> f64 {
        if v.abs() >= h {
            return check_loss(tau, v);
        }
        let kink = -v / h;
        let piece = |a: f64, b: f64| {
            let c = 0.5 * (a + b);
            let r = 0.5 * (b - a);
            GL3_NODES
                .iter()
                .zip(GL3_WEIGHTS)
                .map(|(&x, w)| {
                    let s = c + r * x;
                    w * check_loss(tau, v + h * s) * 0.75 * (1.0 - s * s)
                })
                .sum::<f64>()
                * r
        };
        piece(-1.0, kink) + piece(kink, 1.0)
    }

    /// Loss, slope and curvature of `ℓ_{h,τ}` at `v` in one pass.
    ///
    /// Callers are responsible for having validated `τ` and `h`.
    #[inline]
    pub fn smoothed_terms(&self, tau: f64, h: f64, v: f64) -> SmoothedTerms {
        match self.family {
            KernelFamily::Gaussian => {
                let z = v / h;
                // φ(10) ≈ 8e-23: beyond this the smoothing is below double
                // precision relative to the check loss itself.
                if z > GAUSSIAN_TAIL {
                    return SmoothedTerms {
                        loss: tau * v,
                        slope: tau,
                        curvature: 0.0,
                    };
                }
                if z < -GAUSSIAN_TAIL {
                    return SmoothedTerms {
                        loss: (tau - 1.0) * v,
                        slope: tau - 1.0,
                        curvature: 0.0,
                    };
                }
                let pdf = std_normal_pdf(z);
                let slope = tau - std_normal_cdf(-z);
                SmoothedTerms {
                    loss: h * pdf + v * slope,
                    slope,
                    curvature: pdf / h,
                }
            }
            _ => SmoothedTerms {
                loss: self.smoothed_loss_unchecked(tau, h, v),
                slope: tau - self.cdf(-v / h),
                curvature: self.density(v / h) / h,
            },
        }
    }

    /// Slope and curvature only (skips the loss value).
    #[inline]
    pub fn slope_curvature(&self, tau: f64, h: f64, v: f64) -> (f64, f64) {
        let z = v / h;
        (tau - self.cdf(-z), self.density(z) / h)
    }
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self::gaussian()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_examples() {
        assert!((KernelSpec::gaussian().density(0.0) - 0.398_942_280_4).abs() < 1e-10);
        assert_eq!(KernelSpec::uniform().density(0.5), 0.5);
        assert_eq!(KernelSpec::uniform().density(1.5), 0.0);
        assert!((KernelSpec::epanechnikov().density(0.0) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(KernelSpec::gaussian().cdf(0.0), 0.5);
        assert_eq!(KernelSpec::uniform().cdf(1.0), 1.0);
        assert!((KernelSpec::gaussian().cdf(1.959_964) - 0.975).abs() < 1e-7);
        for k in [
            KernelSpec::gaussian(),
            KernelSpec::uniform(),
            KernelSpec::epanechnikov(),
        ] {
            assert!((k.cdf(0.0) - 0.5).abs() < 1e-15);
            assert_eq!(k.cdf(-50.0), 0.0);
            assert_eq!(k.cdf(50.0), 1.0);
        }
    }

    #[test]
    fn gaussian_loss_at_zero_is_h_phi0() {
        let l = KernelSpec::gaussian()
            .smoothed_check_loss(0.5, 0.1, 0.0)
            .unwrap();
        assert!((l - 0.039_894_23).abs() < 1e-8);
    }

    #[test]
    fn gradient_examples() {
        let k = KernelSpec::gaussian();
        assert_eq!(k.smoothed_check_grad(0.5, 1.0, 0.0).unwrap(), 0.0);
        assert!((k.smoothed_check_grad(0.9, 1.0, 10.0).unwrap() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_tau_or_bandwidth() {
        let k = KernelSpec::gaussian();
        assert!(k.smoothed_check_loss(0.0, 0.1, 0.0).is_err());
        assert!(k.smoothed_check_loss(1.0, 0.1, 0.0).is_err());
        assert!(k.smoothed_check_loss(0.5, 0.0, 0.0).is_err());
        assert!(k.smoothed_check_grad(0.5, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn uniform_closed_form_joins_check_loss_at_the_edges() {
        let k = KernelSpec::uniform();
        for tau in [0.1, 0.5, 0.9] {
            let h = 0.3;
            let inside = k.smoothed_loss_unchecked(tau, h, h * (1.0 - 1e-12));
            assert!((inside - check_loss(tau, h)).abs() < 1e-12);
            let inside = k.smoothed_loss_unchecked(tau, h, -h * (1.0 - 1e-12));
            assert!((inside - check_loss(tau, -h)).abs() < 1e-12);
        }
    }

    #[test]
    fn terms_agree_with_scalar_entry_points() {
        for k in [
            KernelSpec::gaussian(),
            KernelSpec::uniform(),
            KernelSpec::epanechnikov(),
        ] {
            for v in [-2.0, -0.05, 0.0, 0.07, 3.0] {
                let t = k.smoothed_terms(0.3, 0.2, v);
                assert_eq!(t.loss, k.smoothed_check_loss(0.3, 0.2, v).unwrap());
                assert_eq!(t.slope, k.smoothed_check_grad(0.3, 0.2, v).unwrap());
                assert!((t.curvature - k.density(v / 0.2) / 0.2).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn family_names_parse() {
        for f in [
            KernelFamily::Gaussian,
            KernelFamily::Uniform,
            KernelFamily::Epanechnikov,
        ] {
            assert_eq!(f.name().parse::<KernelFamily>().unwrap(), f);
        }
        assert!("cosine".parse::<KernelFamily>().is_err());
    }
}
