//! Nonparametric regression by the global mode of a kernel-estimated
//! conditional density.
//!
//! A joint Gaussian product-kernel estimate `p(x, y)` is conditioned on a
//! query `x`, which yields a Gaussian mixture over `y`. The prediction is
//! that mixture's global maximum, found by sampling candidates from the
//! mixture itself and polishing the best one with gradient ascent. The
//! Nadaraya-Watson conditional mean is provided as the baseline.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the `*64` and
//! `*32` aliases below name the concrete types.

// `!(a < b)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conditioning;
pub mod density;
pub mod error;
pub mod experiments;
pub mod regression;
pub mod rng;
pub mod scalar;
pub mod search;

pub use conditioning::{condition, conditional_density, ConditionalMixture, PruneConfig};
pub use density::{
    gaussian_kernel, log_gaussian_kernel, Bandwidth, JointKernelModel, Mixture, Point,
};
pub use error::{Error, Result};
pub use regression::{
    fit_kde, loo_log_likelihood, loo_scores, predict_mode, predict_mode_batch, predict_nw,
    predict_nw_batch, select_bandwidth_loo, Dataset, Regressor, RegressorConfig,
};
pub use rng::Seed;
pub use scalar::Scalar;
pub use search::{
    categorical_draw, find_mode, gradient_ascent, sample_mixture, Ascent, AscentConfig, ModeResult,
    SearchConfig,
};

pub type Point64 = Point<f64>;
pub type Bandwidth64 = Bandwidth<f64>;
pub type Mixture64 = Mixture<f64>;
pub type JointKernelModel64 = JointKernelModel<f64>;
pub type Dataset64 = Dataset<f64>;
pub type SearchConfig64 = SearchConfig<f64>;
pub type ModeResult64 = ModeResult<f64>;

pub type Point32 = Point<f32>;
pub type Bandwidth32 = Bandwidth<f32>;
pub type Mixture32 = Mixture<f32>;
pub type JointKernelModel32 = JointKernelModel<f32>;
pub type Dataset32 = Dataset<f32>;
pub type SearchConfig32 = SearchConfig<f32>;
pub type ModeResult32 = ModeResult<f32>;
