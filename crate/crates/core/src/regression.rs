//! Kernel density fit of paired data and the two predictors built on it:
//! the conditional mode and the Nadaraya-Watson conditional mean.

use rayon::prelude::*;

use crate::conditioning::{condition, PruneConfig};
use crate::density::{Bandwidth, JointKernelModel, KernelBank, Point};
use crate::error::{check_dim, Error, Result};
use crate::rng::Seed;
use crate::scalar::{log_sum_exp, Scalar};
use crate::search::{find_mode, ModeResult, SearchConfig};

/// `n` paired samples `(x_i, y_i)`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    dx: usize,
    dy: usize,
    xs: Vec<T>,
    ys: Vec<T>,
}

impl<T: Scalar> Dataset<T> {
    /// `xs` holds `n * dx` values and `ys` holds `n * dy`.
    pub fn from_flat(dx: usize, dy: usize, xs: Vec<T>, ys: Vec<T>) -> Result<Self> {
        if dx == 0 || dy == 0 {
            return Err(Error::invalid("dimensions must be positive"));
        }
        if xs.is_empty()
            || !xs.len().is_multiple_of(dx)
            || !ys.len().is_multiple_of(dy)
            || xs.len() / dx != ys.len() / dy
        {
            return Err(Error::invalid(format!(
                "inconsistent dataset shape: {} x-values with dx={dx}, {} y-values with dy={dy}",
                xs.len(),
                ys.len()
            )));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::invalid("dataset values must be finite"));
        }
        Ok(Dataset { dx, dy, xs, ys })
    }

    pub fn from_rows(dx: usize, dy: usize, rows: &[(Vec<T>, Vec<T>)]) -> Result<Self> {
        let mut xs = Vec::with_capacity(rows.len() * dx);
        let mut ys = Vec::with_capacity(rows.len() * dy);
        for (x, y) in rows {
            check_dim(dx, x.len())?;
            check_dim(dy, y.len())?;
            xs.extend_from_slice(x);
            ys.extend_from_slice(y);
        }
        Self::from_flat(dx, dy, xs, ys)
    }

    pub fn len(&self) -> usize {
        self.xs.len() / self.dx
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn dx(&self) -> usize {
        self.dx
    }

    pub fn dy(&self) -> usize {
        self.dy
    }

    pub fn x(&self, i: usize) -> &[T] {
        &self.xs[i * self.dx..(i + 1) * self.dx]
    }

    pub fn y(&self, i: usize) -> &[T] {
        &self.ys[i * self.dy..(i + 1) * self.dy]
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[T], &[T])> + '_ {
        self.xs
            .chunks_exact(self.dx)
            .zip(self.ys.chunks_exact(self.dy))
    }
}

/// Bandwidth plus predictor settings.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressorConfig<T> {
    /// Joint smoothing scales, `dx + dy` components.
    pub bandwidth: Bandwidth<T>,
    pub search: SearchConfig<T>,
    pub prune: PruneConfig<T>,
}

impl<T: Scalar> RegressorConfig<T> {
    pub fn new(bandwidth: Bandwidth<T>) -> Self {
        RegressorConfig {
            bandwidth,
            search: SearchConfig::default(),
            prune: PruneConfig::default(),
        }
    }
}

/// Product-kernel density estimate with one kernel per sample, weights
/// `1/n` and a shared bandwidth.
pub fn fit_kde<T: Scalar>(
    data: &Dataset<T>,
    bandwidth: &Bandwidth<T>,
) -> Result<JointKernelModel<T>> {
    check_dim(data.dx + data.dy, bandwidth.dim())?;
    let n = data.len();
    let (sx, sy) = bandwidth.split_at(data.dx)?;
    let x_scales: Vec<T> = sx.iter().copied().cycle().take(n * data.dx).collect();
    let y_scales: Vec<T> = sy.iter().copied().cycle().take(n * data.dy).collect();
    let x_kernels = KernelBank::from_flat(data.dx, data.xs.clone(), x_scales);
    let y_kernels = KernelBank::from_flat(data.dy, data.ys.clone(), y_scales);
    let w = T::one() / T::from_usize(n).expect("sample count fits the scalar type");
    JointKernelModel::from_banks(vec![w; n], x_kernels, y_kernels)
}

/// Leave-one-out log-likelihood `sum_i ln p_{-i}(x_i, y_i)`, where `p_{-i}`
/// is the joint estimate fit without row `i`.
pub fn loo_log_likelihood<T: Scalar>(data: &Dataset<T>, bandwidth: &Bandwidth<T>) -> Result<T> {
    check_dim(data.dx + data.dy, bandwidth.dim())?;
    let n = data.len();
    if n < 2 {
        return Err(Error::invalid("leave-one-out needs at least two rows"));
    }
    let scales = bandwidth.scales();
    let half = T::lit(0.5);
    let log_norm = -scales
        .iter()
        .map(|&s| (T::lit(2.0) * T::PI()).sqrt().ln() + s.ln())
        .sum::<T>();
    let log_rest = T::from_usize(n - 1).expect("count fits").ln();
    let rows: Vec<(&[T], &[T])> = data.rows().collect();

    let terms: Vec<T> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (xi, yi) = rows[i];
            let logs: Vec<T> = rows
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, (xj, yj))| {
                    let q: T = xi
                        .iter()
                        .chain(yi.iter())
                        .zip(xj.iter().chain(yj.iter()))
                        .zip(scales)
                        .map(|((&a, &b), &s)| {
                            let z = (a - b) / s;
                            z * z
                        })
                        .sum();
                    log_norm - half * q
                })
                .collect();
            log_sum_exp(&logs) - log_rest
        })
        .collect();
    Ok(terms.into_iter().sum())
}

fn lex_less<T: Scalar>(a: &[T], b: &[T]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    a.len() < b.len()
}

fn has_duplicate_rows<T: Scalar>(data: &Dataset<T>) -> bool {
    let mut keys: Vec<Vec<u64>> = data
        .rows()
        .map(|(x, y)| {
            x.iter()
                .chain(y)
                .map(|v| v.to_f64_lossy().to_bits())
                .collect()
        })
        .collect();
    keys.sort_unstable();
    keys.windows(2).any(|w| w[0] == w[1])
}

/// Leave-one-out scores for every candidate in `grid`.
pub fn loo_scores<T: Scalar>(data: &Dataset<T>, grid: &[Bandwidth<T>]) -> Result<Vec<T>> {
    grid.iter().map(|b| loo_log_likelihood(data, b)).collect()
}

/// Grid candidate with the largest leave-one-out log-likelihood. Ties go
/// to the lexicographically smaller bandwidth.
///
/// Exact duplicate rows make the criterion grow without bound as the
/// bandwidth shrinks, so the smallest candidate wins; a warning is logged.
pub fn select_bandwidth_loo<T: Scalar>(
    data: &Dataset<T>,
    grid: &[Bandwidth<T>],
) -> Result<Bandwidth<T>> {
    if grid.is_empty() {
        return Err(Error::invalid("bandwidth grid is empty"));
    }
    if data.len() < 2 {
        return Err(Error::invalid("leave-one-out needs at least two rows"));
    }
    let scores = loo_scores(data, grid)?;
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_nan() || s == T::neg_infinity() {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) if s > scores[b] || (s == scores[b] && lex_less(&grid[i], &grid[b])) => Some(i),
            keep => keep,
        };
    }
    let best = best.ok_or_else(|| {
        Error::Degenerate("every candidate has zero leave-one-out likelihood".into())
    })?;
    if has_duplicate_rows(data) {
        log::warn!(
            "dataset contains duplicate rows; leave-one-out likelihood is unbounded as the bandwidth shrinks, selection is bounded by the grid"
        );
    }
    Ok(grid[best].clone())
}

/// Conditional mode of `y` given `x`: global maximum of the conditioned
/// mixture.
pub fn predict_mode<T: Scalar>(
    model: &JointKernelModel<T>,
    x: &[T],
    search: &SearchConfig<T>,
    prune: &PruneConfig<T>,
    seed: Seed,
) -> Result<ModeResult<T>> {
    let cond = condition(model, x, prune)?;
    find_mode(cond.mixture(), search, seed)
}

/// Nadaraya-Watson estimate: the conditional mean `sum_i b_i y_i`.
pub fn predict_nw<T: Scalar>(
    model: &JointKernelModel<T>,
    x: &[T],
    prune: &PruneConfig<T>,
) -> Result<Point<T>> {
    Point::new(condition(model, x, prune)?.mean())
}

/// [`predict_mode`] over many queries in parallel. Query `i` uses
/// `seed.derive(i)`, so results do not depend on scheduling.
pub fn predict_mode_batch<T: Scalar>(
    model: &JointKernelModel<T>,
    queries: &[Point<T>],
    search: &SearchConfig<T>,
    prune: &PruneConfig<T>,
    seed: Seed,
) -> Vec<Result<ModeResult<T>>> {
    queries
        .par_iter()
        .enumerate()
        .map(|(i, x)| predict_mode(model, x, search, prune, seed.derive(i as u64)))
        .collect()
}

pub fn predict_nw_batch<T: Scalar>(
    model: &JointKernelModel<T>,
    queries: &[Point<T>],
    prune: &PruneConfig<T>,
) -> Vec<Result<Point<T>>> {
    queries
        .par_iter()
        .map(|x| predict_nw(model, x, prune))
        .collect()
}

/// A fitted model together with its predictor settings.
#[derive(Clone, Debug)]
pub struct Regressor<T> {
    model: JointKernelModel<T>,
    config: RegressorConfig<T>,
}

impl<T: Scalar> Regressor<T> {
    pub fn fit(data: &Dataset<T>, config: RegressorConfig<T>) -> Result<Self> {
        config.search.validate()?;
        let model = fit_kde(data, &config.bandwidth)?;
        Ok(Regressor { model, config })
    }

    pub fn model(&self) -> &JointKernelModel<T> {
        &self.model
    }

    pub fn config(&self) -> &RegressorConfig<T> {
        &self.config
    }

    pub fn predict_mode(&self, x: &[T], seed: Seed) -> Result<Point<T>> {
        predict_mode(
            &self.model,
            x,
            &self.config.search,
            &self.config.prune,
            seed,
        )
        .map(|r| r.argmax)
    }

    pub fn predict_nw(&self, x: &[T]) -> Result<Point<T>> {
        predict_nw(&self.model, x, &self.config.prune)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditioning::conditional_density;

    fn bw(v: &[f64]) -> Bandwidth<f64> {
        Bandwidth::new(v.to_vec()).unwrap()
    }

    #[test]
    fn dataset_shape_checks() {
        assert!(Dataset::from_flat(1, 1, vec![1.0, 2.0], vec![1.0]).is_err());
        assert!(Dataset::<f64>::from_flat(1, 1, vec![], vec![]).is_err());
        assert!(Dataset::from_flat(0, 1, vec![1.0], vec![1.0]).is_err());
        assert!(Dataset::from_flat(1, 1, vec![f64::NAN], vec![1.0]).is_err());
        let d = Dataset::from_rows(2, 1, &[(vec![1.0, 2.0], vec![3.0])]).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.x(0), &[1.0, 2.0]);
        assert_eq!(d.y(0), &[3.0]);
    }

    #[test]
    fn fit_single_row() {
        let d = Dataset::from_rows(1, 1, &[(vec![2.0], vec![-1.0])]).unwrap();
        let m = fit_kde(&d, &bw(&[0.3, 0.4])).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.weights(), &[1.0]);
        assert_eq!(m.x_center(0), &[2.0]);
        assert_eq!(m.y_center(0), &[-1.0]);
        assert_eq!(m.x_bandwidth(0), &[0.3]);
        assert_eq!(m.y_bandwidth(0), &[0.4]);
        assert!(fit_kde(&d, &bw(&[0.3])).is_err());
    }

    #[test]
    fn fit_three_rows_has_uniform_weights() {
        let d = Dataset::from_flat(1, 1, vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 2.0]).unwrap();
        let m = fit_kde(&d, &bw(&[1.0, 1.0])).unwrap();
        assert_eq!(m.weights(), &[1.0 / 3.0; 3]);
    }

    #[test]
    fn fit_two_rows_joint_density() {
        let d = Dataset::from_flat(1, 1, vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
        let m = fit_kde(&d, &bw(&[1.0, 1.0])).unwrap();
        let two_pi = 2.0 * std::f64::consts::PI;
        let oracle = 0.5 / two_pi + 0.5 * (-0.5f64).exp() / two_pi;
        let got = m.density(&[0.0], &[0.0]).unwrap();
        assert!((got - oracle).abs() < 1e-15);
        assert!((got - 0.1278).abs() < 1e-4);
    }

    #[test]
    fn loo_single_candidate_and_errors() {
        let d = Dataset::from_flat(1, 1, vec![0.0, 1.0, 2.5], vec![0.0, 0.5, 0.1]).unwrap();
        assert_eq!(
            select_bandwidth_loo(&d, &[bw(&[0.7, 0.2])]).unwrap(),
            bw(&[0.7, 0.2])
        );
        assert!(select_bandwidth_loo(&d, &[]).is_err());
        let one = Dataset::from_flat(1, 1, vec![0.0], vec![0.0]).unwrap();
        assert!(select_bandwidth_loo(&one, &[bw(&[1.0, 1.0])]).is_err());
        assert!(select_bandwidth_loo(&d, &[bw(&[1.0])]).is_err());
    }

    #[test]
    fn loo_matches_direct_evaluation() {
        let d = Dataset::from_flat(1, 1, vec![0.0, 1.0, 2.5], vec![0.0, 0.5, 0.1]).unwrap();
        let s = bw(&[0.8, 0.6]);
        let mut oracle = 0.0;
        for i in 0..3 {
            let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..3)
                .filter(|&j| j != i)
                .map(|j| (d.x(j).to_vec(), d.y(j).to_vec()))
                .collect();
            let sub = Dataset::from_rows(1, 1, &rows).unwrap();
            let m = fit_kde(&sub, &s).unwrap();
            oracle += m.density(d.x(i), d.y(i)).unwrap().ln();
        }
        let got = loo_log_likelihood(&d, &s).unwrap();
        assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
    }

    #[test]
    fn loo_ties_prefer_smaller_bandwidth() {
        // symmetric offsets: swapping the components gives an identical score
        let d = Dataset::from_flat(1, 1, vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let grid = [bw(&[0.7, 0.3]), bw(&[0.3, 0.7])];
        let scores = loo_scores(&d, &grid).unwrap();
        assert_eq!(scores[0], scores[1]);
        assert_eq!(select_bandwidth_loo(&d, &grid).unwrap(), bw(&[0.3, 0.7]));
        assert!(lex_less(&[0.1, 0.9], &[0.2, 0.0]));
        assert!(!lex_less(&[0.2, 0.0], &[0.1, 0.9]));
    }

    #[test]
    fn loo_duplicates_pick_smallest() {
        let d = Dataset::from_flat(1, 1, vec![1.0; 5], vec![2.0; 5]).unwrap();
        let grid = [bw(&[1.0, 1.0]), bw(&[0.01, 0.01]), bw(&[0.1, 0.1])];
        assert_eq!(select_bandwidth_loo(&d, &grid).unwrap(), bw(&[0.01, 0.01]));
        assert!(has_duplicate_rows(&d));
    }

    fn two_branch_model(sy: f64) -> JointKernelModel<f64> {
        let d = Dataset::from_flat(1, 1, vec![0.0, 0.0], vec![1.0, -1.0]).unwrap();
        fit_kde(&d, &bw(&[0.5, sy])).unwrap()
    }

    #[test]
    fn single_kernel_predictions() {
        let d = Dataset::from_rows(1, 2, &[(vec![0.3], vec![1.5, -2.0])]).unwrap();
        let m = fit_kde(&d, &bw(&[0.5, 0.2, 0.4])).unwrap();
        let prune = PruneConfig::default();
        let nw = predict_nw(&m, &[4.0], &prune).unwrap();
        assert_eq!(nw.coords(), &[1.5, -2.0]);
        let mode = predict_mode(&m, &[4.0], &SearchConfig::default(), &prune, Seed(1)).unwrap();
        assert!(mode.argmax.distance(&[1.5, -2.0]) < 1e-6);
        assert!(mode.argmax.distance(&nw) < 1e-6);
    }

    #[test]
    fn bimodal_conditional_mode_vs_mean() {
        let m = two_branch_model(0.3);
        let prune = PruneConfig::default();
        let nw = predict_nw(&m, &[0.0], &prune).unwrap();
        assert!(nw[0].abs() < 1e-15);
        // grid oracle for the exact mode positions
        let mut best = (0.0, 0.0);
        for i in 0..=40_000 {
            let y = -2.0 + i as f64 * 1e-4;
            let v = conditional_density(&m, &[0.0], &[y]).unwrap();
            if v > best.1 {
                best = (y, v);
            }
        }
        let mode_abs = best.0.abs();
        assert!((mode_abs - 1.0).abs() < 0.01);
        for s in 0..20 {
            let r = predict_mode(&m, &[0.0], &SearchConfig::default(), &prune, Seed(s)).unwrap();
            let y = r.argmax[0];
            assert!((y.abs() - mode_abs).abs() < 1e-4, "seed {s}: {y}");
            assert!((y.abs() - 1.0).abs() < 0.05);
            assert!(r.density >= conditional_density(&m, &[0.0], &nw).unwrap());
        }
    }

    #[test]
    fn nw_weighted_sum() {
        let d = Dataset::from_flat(1, 1, vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let m = fit_kde(&d, &bw(&[1.0, 1.0])).unwrap();
        let nw = predict_nw(&m, &[0.0], &PruneConfig::default()).unwrap();
        assert!((nw[0] - 0.3775).abs() < 1e-4);
        assert!((nw[0] - 1.0 / (1.0 + 0.5f64.exp())).abs() < 1e-15);
    }

    #[test]
    fn batch_is_order_independent() {
        let m = two_branch_model(0.3);
        let qs: Vec<Point<f64>> = (0..8)
            .map(|i| Point::new(vec![i as f64 * 0.1]).unwrap())
            .collect();
        let cfg = SearchConfig::with_q(200);
        let prune = PruneConfig::default();
        let all = predict_mode_batch(&m, &qs, &cfg, &prune, Seed(4));
        for (i, r) in all.iter().enumerate() {
            let single = predict_mode(&m, &qs[i], &cfg, &prune, Seed(4).derive(i as u64)).unwrap();
            assert_eq!(r.as_ref().unwrap(), &single);
        }
        let nws = predict_nw_batch(&m, &qs, &prune);
        assert_eq!(nws.len(), 8);
    }

    #[test]
    fn regressor_round_trip() {
        let d = Dataset::from_flat(1, 1, vec![0.0, 0.1, 0.2], vec![1.0, 1.1, 0.9]).unwrap();
        let r = Regressor::fit(&d, RegressorConfig::new(bw(&[0.2, 0.2]))).unwrap();
        let y = r.predict_mode(&[0.1], Seed(3)).unwrap();
        assert!((y[0] - 1.0).abs() < 0.1);
        assert!((r.predict_nw(&[0.1]).unwrap()[0] - 1.0).abs() < 0.1);
        assert_eq!(r.model().len(), 3);
        assert!(r.predict_nw(&[0.1, 0.2]).is_err());
    }
}
