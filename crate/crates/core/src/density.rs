//! Axis-aligned Gaussian product kernels and the finite mixtures built from
//! them.
//!
//! Bandwidth components are standard deviations. Every density has a direct
//! evaluation path and a log-domain path; the log path never underflows and
//! backs the conditioning code, where queries far from all kernel centers
//! are common.

use std::ops::Deref;

use crate::error::{check_dim, Error, Result};
use crate::scalar::{log_sum_exp, weight_tolerance, Scalar};

/// A point in `R^d` with finite coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Point<T>(Vec<T>);

impl<T: Scalar> Point<T> {
    pub fn new(coords: Vec<T>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("point must have at least one coordinate"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("point coordinates must be finite"));
        }
        Ok(Point(coords))
    }

    pub fn origin(dim: usize) -> Result<Self> {
        Self::new(vec![T::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    /// Euclidean distance to `other`.
    pub fn distance(&self, other: &[T]) -> T {
        self.0
            .iter()
            .zip(other)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt()
    }
}

impl<T> Deref for Point<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

/// Per-dimension kernel standard deviations.
#[derive(Clone, Debug, PartialEq)]
pub struct Bandwidth<T>(Vec<T>);

impl<T: Scalar> Bandwidth<T> {
    pub fn new(scales: Vec<T>) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::invalid("bandwidth must have at least one component"));
        }
        if scales.iter().any(|s| !(s.is_finite() && *s > T::zero())) {
            return Err(Error::invalid(
                "bandwidth components must be positive and finite",
            ));
        }
        Ok(Bandwidth(scales))
    }

    /// The same scale in every one of `dim` dimensions.
    pub fn isotropic(dim: usize, scale: T) -> Result<Self> {
        Self::new(vec![scale; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn scales(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    /// Splits a joint bandwidth into its leading `at` components and the rest.
    pub fn split_at(&self, at: usize) -> Result<(Bandwidth<T>, Bandwidth<T>)> {
        if at == 0 || at >= self.0.len() {
            return Err(Error::invalid(format!(
                "cannot split a {}-dimensional bandwidth at {at}",
                self.0.len()
            )));
        }
        let (a, b) = self.0.split_at(at);
        Ok((Bandwidth(a.to_vec()), Bandwidth(b.to_vec())))
    }
}

impl<T> Deref for Bandwidth<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

fn log_sqrt_two_pi<T: Scalar>() -> T {
    (T::lit(2.0) * T::PI()).sqrt().ln()
}

/// `-sum ln(sqrt(2 pi) s_k)`, the log of the kernel peak value.
fn log_normalizer<T: Scalar>(scales: &[T]) -> T {
    let c = log_sqrt_two_pi::<T>();
    -scales.iter().map(|s| c + s.ln()).sum::<T>()
}

/// `prod 1 / (sqrt(2 pi) s_k)`, the kernel peak value.
fn normalizer<T: Scalar>(scales: &[T]) -> T {
    let c = (T::lit(2.0) * T::PI()).sqrt();
    scales.iter().fold(T::one(), |acc, &s| acc / (c * s))
}

fn scaled_sq_norm<T: Scalar>(offset: impl Iterator<Item = T>, scales: &[T]) -> T {
    offset
        .zip(scales)
        .map(|(o, &s)| {
            let z = o / s;
            z * z
        })
        .sum()
}

/// Gaussian product kernel `prod_k exp(-o_k^2 / (2 s_k^2)) / (sqrt(2 pi) s_k)`.
pub fn gaussian_kernel<T: Scalar>(offset: &[T], bandwidth: &Bandwidth<T>) -> Result<T> {
    check_dim(bandwidth.dim(), offset.len())?;
    let q = scaled_sq_norm(offset.iter().copied(), bandwidth);
    Ok(normalizer(bandwidth) * (-q / T::lit(2.0)).exp())
}

/// Natural log of [`gaussian_kernel`]; finite wherever the offset is.
pub fn log_gaussian_kernel<T: Scalar>(offset: &[T], bandwidth: &Bandwidth<T>) -> Result<T> {
    check_dim(bandwidth.dim(), offset.len())?;
    let q = scaled_sq_norm(offset.iter().copied(), bandwidth);
    Ok(log_normalizer(bandwidth) - q / T::lit(2.0))
}

/// Centers and scales of `len` kernels of a common dimension, stored flat,
/// with their normalizers cached.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct KernelBank<T> {
    dim: usize,
    centers: Vec<T>,
    scales: Vec<T>,
    norms: Vec<T>,
    log_norms: Vec<T>,
}

impl<T: Scalar> KernelBank<T> {
    /// `centers` and `scales` are `len * dim` long and already validated.
    pub(crate) fn from_flat(dim: usize, centers: Vec<T>, scales: Vec<T>) -> Self {
        debug_assert_eq!(centers.len(), scales.len());
        debug_assert!(dim > 0 && centers.len().is_multiple_of(dim));
        let norms = scales.chunks_exact(dim).map(normalizer).collect();
        let log_norms = scales.chunks_exact(dim).map(log_normalizer).collect();
        KernelBank {
            dim,
            centers,
            scales,
            norms,
            log_norms,
        }
    }

    pub(crate) fn from_points(
        centers: &[Point<T>],
        bandwidths: &[Bandwidth<T>],
        what: &str,
    ) -> Result<Self> {
        if centers.len() != bandwidths.len() {
            return Err(Error::invalid(format!(
                "{what}: {} centers but {} bandwidths",
                centers.len(),
                bandwidths.len()
            )));
        }
        let dim = centers
            .first()
            .map(|c| c.dim())
            .ok_or_else(|| Error::invalid(format!("{what}: at least one kernel is required")))?;
        let mut flat_c = Vec::with_capacity(dim * centers.len());
        let mut flat_s = Vec::with_capacity(dim * centers.len());
        for (c, s) in centers.iter().zip(bandwidths) {
            check_dim(dim, c.dim())?;
            check_dim(dim, s.dim())?;
            flat_c.extend_from_slice(c);
            flat_s.extend_from_slice(s);
        }
        Ok(Self::from_flat(dim, flat_c, flat_s))
    }

    pub(crate) fn dim(&self) -> usize {
        self.dim
    }

    pub(crate) fn len(&self) -> usize {
        self.norms.len()
    }

    pub(crate) fn center(&self, i: usize) -> &[T] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn scale(&self, i: usize) -> &[T] {
        &self.scales[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn peak(&self, i: usize) -> T {
        self.norms[i]
    }

    fn sq_dist(&self, i: usize, p: &[T]) -> T {
        let c = self.center(i);
        scaled_sq_norm(p.iter().zip(c).map(|(&a, &b)| a - b), self.scale(i))
    }

    pub(crate) fn eval(&self, i: usize, p: &[T]) -> T {
        self.norms[i] * (-self.sq_dist(i, p) / T::lit(2.0)).exp()
    }

    pub(crate) fn log_eval(&self, i: usize, p: &[T]) -> T {
        self.log_norms[i] - self.sq_dist(i, p) / T::lit(2.0)
    }

    pub(crate) fn subset(&self, indices: &[usize]) -> Self {
        let mut centers = Vec::with_capacity(indices.len() * self.dim);
        let mut scales = Vec::with_capacity(indices.len() * self.dim);
        let mut norms = Vec::with_capacity(indices.len());
        let mut log_norms = Vec::with_capacity(indices.len());
        for &i in indices {
            centers.extend_from_slice(self.center(i));
            scales.extend_from_slice(self.scale(i));
            norms.push(self.norms[i]);
            log_norms.push(self.log_norms[i]);
        }
        KernelBank {
            dim: self.dim,
            centers,
            scales,
            norms,
            log_norms,
        }
    }

    pub(crate) fn min_scale(&self) -> T {
        self.scales
            .iter()
            .copied()
            .fold(T::infinity(), |acc, s| acc.min(s))
    }
}

fn validate_weights<T: Scalar>(weights: &[T], expected: usize) -> Result<()> {
    if weights.len() != expected {
        return Err(Error::invalid(format!(
            "expected {expected} weights, found {}",
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= T::zero())) {
        return Err(Error::invalid("weights must be finite and nonnegative"));
    }
    let total: T = weights.iter().copied().sum();
    if (total - T::one()).abs() > weight_tolerance() {
        return Err(Error::invalid(format!(
            "weights must sum to 1, got {total}"
        )));
    }
    Ok(())
}

/// Finite mixture `h(y) = sum_i b_i psi_i(y - y_i)` of Gaussian product
/// kernels.
#[derive(Clone, Debug, PartialEq)]
pub struct Mixture<T> {
    weights: Vec<T>,
    kernels: KernelBank<T>,
}

impl<T: Scalar> Mixture<T> {
    pub fn new(
        weights: Vec<T>,
        centers: Vec<Point<T>>,
        bandwidths: Vec<Bandwidth<T>>,
    ) -> Result<Self> {
        let kernels = KernelBank::from_points(&centers, &bandwidths, "mixture")?;
        validate_weights(&weights, kernels.len())?;
        Ok(Mixture { weights, kernels })
    }

    /// Mixture with one shared bandwidth for every component.
    pub fn with_shared_bandwidth(
        weights: Vec<T>,
        centers: Vec<Point<T>>,
        bandwidth: Bandwidth<T>,
    ) -> Result<Self> {
        let bandwidths = vec![bandwidth; centers.len()];
        Self::new(weights, centers, bandwidths)
    }

    pub(crate) fn from_bank(weights: Vec<T>, kernels: KernelBank<T>) -> Result<Self> {
        validate_weights(&weights, kernels.len())?;
        Ok(Mixture { weights, kernels })
    }

    pub fn dim(&self) -> usize {
        self.kernels.dim()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn center(&self, i: usize) -> &[T] {
        self.kernels.center(i)
    }

    pub fn bandwidth(&self, i: usize) -> &[T] {
        self.kernels.scale(i)
    }

    /// Smallest bandwidth component over all kernels.
    pub fn min_bandwidth(&self) -> T {
        self.kernels.min_scale()
    }

    /// Largest single-kernel peak value; no mixture value exceeds it.
    pub fn peak_bound(&self) -> T {
        (0..self.len())
            .map(|i| self.kernels.peak(i))
            .fold(T::zero(), |acc, p| acc.max(p))
    }

    pub fn density(&self, y: &[T]) -> Result<T> {
        check_dim(self.dim(), y.len())?;
        Ok(self.density_unchecked(y))
    }

    pub(crate) fn density_unchecked(&self, y: &[T]) -> T {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > T::zero())
            .map(|(i, &w)| w * self.kernels.eval(i, y))
            .sum()
    }

    /// `ln h(y)` via log-sum-exp; stays finite far outside the support.
    pub fn log_density(&self, y: &[T]) -> Result<T> {
        check_dim(self.dim(), y.len())?;
        let terms: Vec<T> = self
            .weights
            .iter()
            .enumerate()
            .map(|(i, &w)| w.ln() + self.kernels.log_eval(i, y))
            .collect();
        Ok(log_sum_exp(&terms))
    }

    /// Analytic gradient `sum_i b_i psi_i(y - y_i) (-(y - y_i) / s_i^2)`.
    pub fn gradient(&self, y: &[T]) -> Result<Vec<T>> {
        check_dim(self.dim(), y.len())?;
        Ok(self.gradient_unchecked(y))
    }

    pub(crate) fn gradient_unchecked(&self, y: &[T]) -> Vec<T> {
        let mut grad = vec![T::zero(); self.dim()];
        for (i, &w) in self.weights.iter().enumerate() {
            if w <= T::zero() {
                continue;
            }
            let k = w * self.kernels.eval(i, y);
            let c = self.kernels.center(i);
            let s = self.kernels.scale(i);
            for (((g, &yk), &ck), &sk) in grad.iter_mut().zip(y).zip(c).zip(s) {
                *g = *g - k * (yk - ck) / (sk * sk);
            }
        }
        grad
    }
}

/// Weighted joint product-kernel estimate
/// `p(x, y) = sum_i a_i phi_i(x - x_i) psi_i(y - y_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointKernelModel<T> {
    weights: Vec<T>,
    x_kernels: KernelBank<T>,
    y_kernels: KernelBank<T>,
}

impl<T: Scalar> JointKernelModel<T> {
    pub fn new(
        weights: Vec<T>,
        x_centers: Vec<Point<T>>,
        y_centers: Vec<Point<T>>,
        x_bandwidths: Vec<Bandwidth<T>>,
        y_bandwidths: Vec<Bandwidth<T>>,
    ) -> Result<Self> {
        let x_kernels = KernelBank::from_points(&x_centers, &x_bandwidths, "x kernels")?;
        let y_kernels = KernelBank::from_points(&y_centers, &y_bandwidths, "y kernels")?;
        if x_kernels.len() != y_kernels.len() {
            return Err(Error::invalid(format!(
                "{} x kernels but {} y kernels",
                x_kernels.len(),
                y_kernels.len()
            )));
        }
        validate_weights(&weights, x_kernels.len())?;
        Ok(JointKernelModel {
            weights,
            x_kernels,
            y_kernels,
        })
    }

    pub(crate) fn from_banks(
        weights: Vec<T>,
        x_kernels: KernelBank<T>,
        y_kernels: KernelBank<T>,
    ) -> Result<Self> {
        if x_kernels.len() != y_kernels.len() {
            return Err(Error::invalid("x and y kernel counts differ"));
        }
        validate_weights(&weights, x_kernels.len())?;
        Ok(JointKernelModel {
            weights,
            x_kernels,
            y_kernels,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dx(&self) -> usize {
        self.x_kernels.dim()
    }

    pub fn dy(&self) -> usize {
        self.y_kernels.dim()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn x_center(&self, i: usize) -> &[T] {
        self.x_kernels.center(i)
    }

    pub fn y_center(&self, i: usize) -> &[T] {
        self.y_kernels.center(i)
    }

    pub fn x_bandwidth(&self, i: usize) -> &[T] {
        self.x_kernels.scale(i)
    }

    pub fn y_bandwidth(&self, i: usize) -> &[T] {
        self.y_kernels.scale(i)
    }

    pub(crate) fn y_kernels(&self) -> &KernelBank<T> {
        &self.y_kernels
    }

    pub fn density(&self, x: &[T], y: &[T]) -> Result<T> {
        check_dim(self.dx(), x.len())?;
        check_dim(self.dy(), y.len())?;
        Ok(self
            .weights
            .iter()
            .enumerate()
            .map(|(i, &a)| a * self.x_kernels.eval(i, x) * self.y_kernels.eval(i, y))
            .sum())
    }

    /// Marginal density of the inputs, `sum_i a_i phi_i(x - x_i)`.
    pub fn marginal_x(&self, x: &[T]) -> Result<T> {
        check_dim(self.dx(), x.len())?;
        Ok(self
            .weights
            .iter()
            .enumerate()
            .map(|(i, &a)| a * self.x_kernels.eval(i, x))
            .sum())
    }

    /// `ln a_i + ln phi_i(x - x_i)` for every kernel.
    pub fn log_input_terms(&self, x: &[T]) -> Result<Vec<T>> {
        check_dim(self.dx(), x.len())?;
        Ok(self
            .weights
            .iter()
            .enumerate()
            .map(|(i, &a)| a.ln() + self.x_kernels.log_eval(i, x))
            .collect())
    }
}
