//! Kernel-smoothed focused invariance quantile regression (KSFIQR).
//!
//! Multi-environment quantile regression where the support of the
//! coefficient vector is chosen so that the smoothed quantile-loss gradient
//! vanishes on the active coordinates in *every* environment. The crate
//! provides:
//!
//! * [`kernel`]: smoothing kernels and the convolution-smoothed check loss,
//! * [`loss`]: per-environment losses, gradients, Hessians, the focused
//!   invariance penalty and the full objective,
//! * [`exhaustive`]: support enumeration with a bounded quasi-Newton inner solver,
//! * [`gumbel`]: the Gumbel-gate relaxation for larger supports,
//! * [`scm`]: the structural causal model benchmarks,
//! * [`baselines`]: EILLS, pooled least squares and pooled quantile regression,
//! * [`metrics`]: selection and estimation error metrics.
//!
//! The crate is `no_std` (with `alloc`). Enable `std` for `std::error::Error`
//! integration and `parallel` to fan support enumeration out over rayon.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod baselines;
pub mod data;
mod error;
pub mod exhaustive;
pub mod gumbel;
pub mod kernel;
pub mod loss;
pub mod metrics;
pub mod optim;
pub mod rng;
pub mod scm;

pub use data::{EnvironmentData, MultiEnvDataset, SupportMask};
pub use error::{Error, Result};
pub use exhaustive::{
    fit_exhaustive, fit_exhaustive_with, fit_support, ExhaustiveOptions, FitResult, RestrictedFit,
    SolverKind, SupportEntry,
};
pub use gumbel::{fit_gumbel, gumbel_gate, GumbelConfig};
pub use kernel::{KernelFamily, KernelSpec};
pub use loss::{Bandwidth, FitConfig, PenaltyExtension};
