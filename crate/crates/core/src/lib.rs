//! Stationary MMD point sets.
//!
//! Particles are driven by (noisy) gradient descent on the squared maximum mean
//! discrepancy to a target distribution until every particle's MMD gradient
//! vanishes. Such point sets integrate every function in the span of
//! `{d/dx_l k(x_i, .)}` exactly, which gives integration error decaying faster
//! than the MMD itself for integrands in the RKHS.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below are what most callers want.
//!
//! ```
//! use mmdpoints_core::{Embedding64, GaussianMixture, Kernel, PointSet, Target64, mmd};
//!
//! let target: Target64 = GaussianMixture::isotropic(2, 1.0).unwrap().into();
//! let emb = Embedding64::new(Kernel::gaussian(1.0).unwrap(), &target).unwrap();
//! let x = PointSet::zeros(1, 2).unwrap();
//! let report = mmd::mmd_squared(&emb, &x).unwrap();
//! assert!((report.mmd_squared - 1.0 / 3.0).abs() < 1e-15);
//! ```

// `!(x > 0.0)` is used on purpose so NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod centered;
pub mod descent;
pub mod embedding;
pub mod error;
pub mod integrand;
pub mod kernel;
pub mod linalg;
pub mod mmd;
pub mod points;
pub mod scalar;
pub mod target;

pub use centered::CenteredKernel;
pub use descent::{
    check_assumption5, check_step_size, descent_step, initial_points, run_descent, DescentConfig, NoiseCheck,
    NoiseSchedule, RunOutput, StepSchedule, StepSizeCheck, TrajectoryEntry,
};
pub use embedding::Embedding;
pub use error::{Error, Result};
pub use integrand::Integrand;
pub use kernel::{Kernel, KernelFamily, KernelSpec};
pub use mmd::{grad_particles, mmd_squared, phi, stationarity_bracket, stationarity_residual, MmdReport};
pub use points::PointSet;
pub use scalar::Scalar;
pub use target::{EmpiricalTarget, GaussianMixture, Target};

pub type Kernel64 = Kernel<f64>;
pub type Kernel32 = Kernel<f32>;
pub type PointSet64 = PointSet<f64>;
pub type PointSet32 = PointSet<f32>;
pub type Target64 = Target<f64>;
pub type Target32 = Target<f32>;
pub type GaussianMixture64 = GaussianMixture<f64>;
pub type Embedding64<'a> = Embedding<'a, f64>;
pub type Embedding32<'a> = Embedding<'a, f32>;
pub type Integrand64 = Integrand<f64>;
pub type MmdReport64 = MmdReport<f64>;
