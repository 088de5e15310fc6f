//! Synthetic datasets, a brute-force grid oracle, error metrics and the two
//! regression comparisons (noisy sine curve, two-branch data).

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditioning::PruneConfig;
use crate::density::{Bandwidth, Mixture, Point};
use crate::error::{check_dim, Error, Result};
use crate::regression::{fit_kde, predict_mode_batch, predict_nw_batch, Dataset};
use crate::rng::Seed;
use crate::scalar::Scalar;
use crate::search::SearchConfig;

/// Probability that a two-branch sample lies on the upper branch.
pub const AMBIGUOUS_UPPER_PROBABILITY: f64 = 0.65;
/// Noise standard deviation of the two-branch generator.
pub const AMBIGUOUS_NOISE_SIGMA: f64 = 0.1;
/// Lower clip of the branch half-separation `b(x)`.
pub const AMBIGUOUS_BRANCH_FLOOR: f64 = 0.3;
/// Predictions with `|y| < DEAD_ZONE_FRACTION * b(x)` fall between the
/// branches.
pub const DEAD_ZONE_FRACTION: f64 = 0.5;
/// Queries keep this distance from both ends of `[0, 2 pi]`.
pub const QUERY_MARGIN: f64 = 0.25;

/// Noiseless sine target `sin(x^(8/5))`.
pub fn sine_target(x: f64) -> f64 {
    x.powf(1.6).sin()
}

/// Half-separation of the two branches: `max(sin(x / 2), 0.3)`.
pub fn branch_offset(x: f64) -> f64 {
    (x / 2.0).sin().max(AMBIGUOUS_BRANCH_FLOOR)
}

/// `n` rows with `x ~ U[0, 2 pi)` and `y = sin(x^(8/5)) + N(0, noise_sigma^2)`.
pub fn gen_sine_dataset(n: usize, noise_sigma: f64, seed: Seed) -> Result<Dataset<f64>> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::invalid("noise sigma must be finite and nonnegative"));
    }
    let mut rng = seed.rng();
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rng.random::<f64>() * TAU;
        let z: f64 = rng.sample(StandardNormal);
        xs.push(x);
        ys.push(sine_target(x) + noise_sigma * z);
    }
    Dataset::from_flat(1, 1, xs, ys)
}

/// Two-branch data with the branch each row was drawn from.
#[derive(Clone, Debug, PartialEq)]
pub struct AmbiguousDataset {
    pub data: Dataset<f64>,
    /// `true` for rows on the upper branch `+b(x)`.
    pub upper: Vec<bool>,
}

/// `n` rows with `x ~ U[0, 2 pi)`; with probability 0.65 `y = +b(x) + e`,
/// otherwise `y = -b(x) + e`, `e ~ N(0, 0.1^2)`.
pub fn gen_ambiguous_dataset(n: usize, seed: Seed) -> Result<AmbiguousDataset> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let mut rng = seed.rng();
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rng.random::<f64>() * TAU;
        let on_upper = rng.random::<f64>() < AMBIGUOUS_UPPER_PROBABILITY;
        let z: f64 = rng.sample(StandardNormal);
        let b = branch_offset(x);
        xs.push(x);
        ys.push(if on_upper { b } else { -b } + AMBIGUOUS_NOISE_SIGMA * z);
        upper.push(on_upper);
    }
    Ok(AmbiguousDataset {
        data: Dataset::from_flat(1, 1, xs, ys)?,
        upper,
    })
}

/// True conditional density of the sine data: `N(y; sin(x^(8/5)), sigma^2)`.
pub fn true_sine_conditional(x: f64, y: f64, noise_sigma: f64) -> Result<f64> {
    if !(noise_sigma.is_finite() && noise_sigma > 0.0) {
        return Err(Error::invalid("noise sigma must be positive"));
    }
    let z = (y - sine_target(x)) / noise_sigma;
    Ok((-0.5 * z * z).exp() / (TAU.sqrt() * noise_sigma))
}

/// One axis of a regular grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridAxis<T> {
    pub lo: T,
    pub hi: T,
    pub points: usize,
}

/// Regular grid over a box, at most `MAX_POINTS` nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec<T> {
    axes: Vec<GridAxis<T>>,
}

impl<T: Scalar> GridSpec<T> {
    pub const MAX_POINTS: usize = 10_000_000;

    pub fn new(axes: Vec<GridAxis<T>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::invalid("grid needs at least one axis"));
        }
        let mut total: usize = 1;
        for a in &axes {
            if !(a.lo.is_finite() && a.hi.is_finite() && a.lo < a.hi) {
                return Err(Error::invalid("grid axis needs finite lo < hi"));
            }
            if a.points < 2 {
                return Err(Error::invalid("grid axis needs at least 2 points"));
            }
            total = total
                .checked_mul(a.points)
                .filter(|&t| t <= Self::MAX_POINTS)
                .ok_or_else(|| Error::invalid("grid exceeds 10^7 points"))?;
        }
        Ok(GridSpec { axes })
    }

    /// The same axis repeated `dim` times.
    pub fn uniform(dim: usize, lo: T, hi: T, points: usize) -> Result<Self> {
        Self::new(vec![GridAxis { lo, hi, points }; dim])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Largest spacing over all axes.
    pub fn max_step(&self) -> T {
        self.axes
            .iter()
            .map(|a| (a.hi - a.lo) / T::from_usize(a.points - 1).expect("fits"))
            .fold(T::zero(), |m, s| m.max(s))
    }

    /// Writes node `flat` into `out`; the first axis varies slowest, so flat
    /// order is lexicographic order.
    fn node(&self, mut flat: usize, out: &mut [T]) {
        for (k, a) in self.axes.iter().enumerate().rev() {
            let i = flat % a.points;
            flat /= a.points;
            let t = T::from_usize(i).expect("fits") / T::from_usize(a.points - 1).expect("fits");
            out[k] = a.lo + (a.hi - a.lo) * t;
        }
    }
}

/// Best grid node and its density.
#[derive(Clone, Debug, PartialEq)]
pub struct GridMode<T> {
    pub point: Point<T>,
    pub density: T,
}

/// Exhaustive grid maximization of `mix`. Ties resolve to the
/// lexicographically smallest node.
pub fn brute_force_mode<T: Scalar>(mix: &Mixture<T>, grid: &GridSpec<T>) -> Result<GridMode<T>> {
    check_dim(mix.dim(), grid.dim())?;
    let d = grid.dim();
    let (best, density) = (0..grid.len())
        .into_par_iter()
        .map_init(
            || vec![T::zero(); d],
            |buf, k| {
                grid.node(k, buf);
                (k, mix.density_unchecked(buf))
            },
        )
        .reduce(
            || (usize::MAX, T::neg_infinity()),
            |a, b| {
                if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                    b
                } else {
                    a
                }
            },
        );
    let mut coords = vec![T::zero(); d];
    grid.node(best, &mut coords);
    Ok(GridMode {
        point: Point::new(coords)?,
        density,
    })
}

/// Root mean squared Euclidean distance between paired points.
pub fn rmse<T: Scalar>(predictions: &[Point<T>], truth: &[Point<T>]) -> Result<T> {
    if predictions.is_empty() || predictions.len() != truth.len() {
        return Err(Error::invalid(
            "rmse needs two nonempty lists of equal length",
        ));
    }
    let mut acc = T::zero();
    for (p, t) in predictions.iter().zip(truth) {
        check_dim(t.dim(), p.dim())?;
        let d = p.distance(t);
        acc = acc + d * d;
    }
    let n = T::from_usize(predictions.len()).expect("fits");
    Ok((acc / n).sqrt())
}

fn rms(errors: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = errors.fold((0.0, 0usize), |(s, c), e| (s + e * e, c + 1));
    (count > 0).then(|| (sum / count as f64).sqrt())
}

/// `count` evenly spaced query inputs in `[margin, 2 pi - margin]`.
pub fn query_grid(count: usize) -> Vec<f64> {
    let (lo, hi) = (QUERY_MARGIN, TAU - QUERY_MARGIN);
    match count {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Sine,
    Ambiguous,
}

/// Settings of one regression comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    /// Joint bandwidth `(s_x, s_y)`.
    pub bandwidth: [f64; 2],
    pub q: usize,
    /// Noise level of the sine data; the two-branch generator uses its own
    /// fixed constant.
    pub noise_sigma: f64,
    pub data_seed: u64,
    pub search_seed: u64,
    pub queries: usize,
    pub refine: bool,
}

impl ExperimentConfig {
    /// `n = 1000`, `s = (0.1, 0.1)`, `sigma = 0.2`, `q = 1000`, 200 queries.
    pub fn sine_default() -> Self {
        ExperimentConfig {
            n: 1000,
            bandwidth: [0.1, 0.1],
            q: 1000,
            noise_sigma: 0.2,
            data_seed: 1,
            search_seed: 2,
            queries: 200,
            refine: true,
        }
    }

    pub fn ambiguous_default() -> Self {
        ExperimentConfig {
            noise_sigma: AMBIGUOUS_NOISE_SIGMA,
            ..Self::sine_default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.q == 0 || self.queries == 0 {
            return Err(Error::invalid("n, q and queries must be positive"));
        }
        Ok(())
    }
}

/// Constants of the two-branch generator, echoed into its report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub upper_probability: f64,
    pub noise_sigma: f64,
    pub branch_floor: f64,
    pub branch_function: String,
    pub dead_zone_fraction: f64,
}

impl GeneratorParams {
    pub fn ambiguous() -> Self {
        GeneratorParams {
            upper_probability: AMBIGUOUS_UPPER_PROBABILITY,
            noise_sigma: AMBIGUOUS_NOISE_SIGMA,
            branch_floor: AMBIGUOUS_BRANCH_FLOOR,
            branch_function: "max(sin(x/2), 0.3)".into(),
            dead_zone_fraction: DEAD_ZONE_FRACTION,
        }
    }
}

/// Outcome for one query input. Missing predictions (query outside the
/// model support) are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub x: f64,
    /// Noiseless sine target (sine experiment only).
    pub y_true: Option<f64>,
    /// Branch half-separation `b(x)` (two-branch experiment only).
    pub branch: Option<f64>,
    pub y_mode: Option<f64>,
    pub mode_density: Option<f64>,
    pub y_nw: Option<f64>,
    /// Distance to the target, or to the nearer noiseless branch.
    pub mode_error: Option<f64>,
    pub nw_error: Option<f64>,
    pub mode_in_dead_zone: Option<bool>,
    pub nw_in_dead_zone: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub query_count: usize,
    pub mode_missing: usize,
    pub nw_missing: usize,
    pub mode_rmse: Option<f64>,
    pub nw_rmse: Option<f64>,
    pub mode_dead_zone_count: Option<usize>,
    pub nw_dead_zone_count: Option<usize>,
    pub mode_dead_zone_rate: Option<f64>,
    pub nw_dead_zone_rate: Option<f64>,
}

impl Summary {
    pub fn from_records(records: &[QueryRecord]) -> Summary {
        let dead = |flags: Vec<Option<bool>>| -> (Option<usize>, Option<f64>) {
            let known: Vec<bool> = flags.into_iter().flatten().collect();
            if known.is_empty() {
                return (None, None);
            }
            let hits = known.iter().filter(|&&b| b).count();
            (Some(hits), Some(hits as f64 / known.len() as f64))
        };
        let (mode_dead_zone_count, mode_dead_zone_rate) =
            dead(records.iter().map(|r| r.mode_in_dead_zone).collect());
        let (nw_dead_zone_count, nw_dead_zone_rate) =
            dead(records.iter().map(|r| r.nw_in_dead_zone).collect());
        Summary {
            query_count: records.len(),
            mode_missing: records.iter().filter(|r| r.y_mode.is_none()).count(),
            nw_missing: records.iter().filter(|r| r.y_nw.is_none()).count(),
            mode_rmse: rms(records.iter().filter_map(|r| r.mode_error)),
            nw_rmse: rms(records.iter().filter_map(|r| r.nw_error)),
            mode_dead_zone_count,
            nw_dead_zone_count,
            mode_dead_zone_rate,
            nw_dead_zone_rate,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub config: ExperimentConfig,
    pub generator: Option<GeneratorParams>,
    pub records: Vec<QueryRecord>,
    pub summary: Summary,
}

fn keep_missing<V>(e: Error) -> Result<Option<V>> {
    match e {
        Error::OutsideSupport => Ok(None),
        other => Err(other),
    }
}

struct Predictions {
    mode: Vec<Option<(f64, f64)>>,
    nw: Vec<Option<f64>>,
}

fn predict_all(data: &Dataset<f64>, cfg: &ExperimentConfig, xs: &[f64]) -> Result<Predictions> {
    let bandwidth = Bandwidth::new(cfg.bandwidth.to_vec())?;
    let model = fit_kde(data, &bandwidth)?;
    let queries: Vec<Point<f64>> = xs
        .iter()
        .map(|&x| Point::new(vec![x]))
        .collect::<Result<_>>()?;
    let search = SearchConfig {
        q: cfg.q,
        refine: cfg.refine,
        ..SearchConfig::default()
    };
    let prune = PruneConfig::default();

    let mode = predict_mode_batch(&model, &queries, &search, &prune, Seed(cfg.search_seed))
        .into_iter()
        .map(|r| {
            r.map(|m| Some((m.argmax[0], m.density)))
                .or_else(keep_missing)
        })
        .collect::<Result<_>>()?;
    let nw = predict_nw_batch(&model, &queries, &prune)
        .into_iter()
        .map(|r| r.map(|p| Some(p[0])).or_else(keep_missing))
        .collect::<Result<_>>()?;
    Ok(Predictions { mode, nw })
}

/// Mode vs. Nadaraya-Watson on noisy `sin(x^(8/5))` data; errors are
/// measured against the noiseless curve.
pub fn run_sine_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let data = gen_sine_dataset(cfg.n, cfg.noise_sigma, Seed(cfg.data_seed))?;
    let xs = query_grid(cfg.queries);
    let preds = predict_all(&data, cfg, &xs)?;
    let records: Vec<QueryRecord> = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let truth = sine_target(x);
            let mode = preds.mode[i];
            let nw = preds.nw[i];
            QueryRecord {
                x,
                y_true: Some(truth),
                branch: None,
                y_mode: mode.map(|m| m.0),
                mode_density: mode.map(|m| m.1),
                y_nw: nw,
                mode_error: mode.map(|m| (m.0 - truth).abs()),
                nw_error: nw.map(|y| (y - truth).abs()),
                mode_in_dead_zone: None,
                nw_in_dead_zone: None,
            }
        })
        .collect();
    let summary = Summary::from_records(&records);
    Ok(ExperimentReport {
        experiment: ExperimentKind::Sine,
        config: cfg.clone(),
        generator: None,
        records,
        summary,
    })
}

/// Mode vs. Nadaraya-Watson on two-branch data. Errors are distances to the
/// nearer noiseless branch; predictions with `|y| < 0.5 b(x)` count as
/// dead-zone hits.
pub fn run_ambiguous_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let generated = gen_ambiguous_dataset(cfg.n, Seed(cfg.data_seed))?;
    let xs = query_grid(cfg.queries);
    let preds = predict_all(&generated.data, cfg, &xs)?;
    let records: Vec<QueryRecord> = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let b = branch_offset(x);
            let branch_error = |y: f64| (y - b).abs().min((y + b).abs());
            let dead = |y: f64| y.abs() < DEAD_ZONE_FRACTION * b;
            let mode = preds.mode[i];
            let nw = preds.nw[i];
            QueryRecord {
                x,
                y_true: None,
                branch: Some(b),
                y_mode: mode.map(|m| m.0),
                mode_density: mode.map(|m| m.1),
                y_nw: nw,
                mode_error: mode.map(|m| branch_error(m.0)),
                nw_error: nw.map(branch_error),
                mode_in_dead_zone: mode.map(|m| dead(m.0)),
                nw_in_dead_zone: nw.map(dead),
            }
        })
        .collect();
    let summary = Summary::from_records(&records);
    Ok(ExperimentReport {
        experiment: ExperimentKind::Ambiguous,
        config: cfg.clone(),
        generator: Some(GeneratorParams::ambiguous()),
        records,
        summary,
    })
}
