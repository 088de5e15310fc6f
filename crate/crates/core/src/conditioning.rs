//! Conditioning a joint kernel model on an input query.
//!
//! Fixing `x` turns the joint estimate into a mixture over `y` whose
//! component weights are `a_i phi_i(x - x_i) / sum_j a_j phi_j(x - x_j)`.
//! Weights are formed in the log domain and then pruned relative to the
//! largest one.

use crate::density::{JointKernelModel, Mixture, Point};
use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;

/// Relative pruning rule for conditional weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PruneConfig<T> {
    relative_threshold: T,
}

impl<T: Scalar> PruneConfig<T> {
    /// Kernels with weight below `relative_threshold * max_weight` are dropped.
    pub fn new(relative_threshold: T) -> Result<Self> {
        if !(relative_threshold >= T::zero() && relative_threshold < T::one()) {
            return Err(Error::invalid(
                "relative pruning threshold must lie in [0, 1)",
            ));
        }
        Ok(PruneConfig { relative_threshold })
    }

    /// Keeps every kernel.
    pub fn off() -> Self {
        PruneConfig {
            relative_threshold: T::zero(),
        }
    }

    pub fn relative_threshold(&self) -> T {
        self.relative_threshold
    }
}

impl<T: Scalar> Default for PruneConfig<T> {
    fn default() -> Self {
        PruneConfig {
            relative_threshold: T::lit(1e-12),
        }
    }
}

/// The output density `h(y)` for one fixed input query.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalMixture<T> {
    mixture: Mixture<T>,
    source_indices: Vec<usize>,
    query: Point<T>,
}

impl<T: Scalar> ConditionalMixture<T> {
    pub fn mixture(&self) -> &Mixture<T> {
        &self.mixture
    }

    pub fn into_mixture(self) -> Mixture<T> {
        self.mixture
    }

    /// Indices into the joint model of the kernels that survived pruning,
    /// strictly increasing.
    pub fn source_indices(&self) -> &[usize] {
        &self.source_indices
    }

    pub fn query(&self) -> &Point<T> {
        &self.query
    }

    /// Conditional expectation `sum_i b_i y_i`.
    pub fn mean(&self) -> Vec<T> {
        let mix = &self.mixture;
        let mut out = vec![T::zero(); mix.dim()];
        for (i, &w) in mix.weights().iter().enumerate() {
            for (o, &c) in out.iter_mut().zip(mix.center(i)) {
                *o = *o + w * c;
            }
        }
        out
    }
}

/// Conditions `model` on input `x`, dropping negligible kernels.
pub fn condition<T: Scalar>(
    model: &JointKernelModel<T>,
    x: &[T],
    prune: &PruneConfig<T>,
) -> Result<ConditionalMixture<T>> {
    check_dim(model.dx(), x.len())?;
    let query = Point::new(x.to_vec())?;
    let log_terms = model.log_input_terms(x)?;
    let max = log_terms
        .iter()
        .copied()
        .fold(T::neg_infinity(), |acc, v| acc.max(v));
    if !max.is_finite() {
        return Err(Error::OutsideSupport);
    }

    // relative weights in (0, 1]; the largest is exactly 1
    let threshold = prune.relative_threshold();
    let mut kept = Vec::new();
    let mut rel = Vec::new();
    for (i, &l) in log_terms.iter().enumerate() {
        let w = (l - max).exp();
        if !(w < threshold) {
            kept.push(i);
            rel.push(w);
        }
    }
    let total: T = rel.iter().copied().sum();
    let weights = rel.into_iter().map(|w| w / total).collect();
    let mixture = Mixture::from_bank(weights, model.y_kernels().subset(&kept))?;
    Ok(ConditionalMixture {
        mixture,
        source_indices: kept,
        query,
    })
}

/// `p(y | x)` with no pruning.
pub fn conditional_density<T: Scalar>(model: &JointKernelModel<T>, x: &[T], y: &[T]) -> Result<T> {
    check_dim(model.dy(), y.len())?;
    condition(model, x, &PruneConfig::off())?.mixture.density(y)
}
