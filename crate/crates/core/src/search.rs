//! Global maximization of a Gaussian mixture density.
//!
//! Candidates are drawn from the mixture itself: pick a kernel by weight,
//! draw a kernel-shaped deviate, shift it by the kernel center. With `q`
//! such samples, the chance that none of them lies above the `alpha`
//! density-quantile is `alpha^q`, so the best candidate sits close to the
//! global maximum with overwhelming probability. A monotone gradient ascent
//! then polishes the best candidate.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::density::{Mixture, Point};
use crate::error::{check_dim, Error, Result};
use crate::rng::Seed;
use crate::scalar::Scalar;

/// Parameters of the backtracking gradient ascent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AscentConfig<T> {
    /// Length of the first trial step. `None` uses a tenth of the smallest
    /// bandwidth component of the mixture being climbed.
    pub initial_step: Option<T>,
    pub max_iterations: usize,
    /// Stop once the gradient norm drops below this.
    pub gradient_tolerance: T,
    /// Step shrink factor on a rejected trial, in (0, 1).
    pub backtrack_factor: T,
}

impl<T: Scalar> Default for AscentConfig<T> {
    fn default() -> Self {
        AscentConfig {
            initial_step: None,
            max_iterations: 200,
            gradient_tolerance: T::lit(1e-8),
            backtrack_factor: T::lit(0.5),
        }
    }
}

impl<T: Scalar> AscentConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if let Some(step) = self.initial_step {
            if !(step.is_finite() && step > T::zero()) {
                return Err(Error::invalid("initial step must be positive"));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be positive"));
        }
        if !(self.gradient_tolerance.is_finite() && self.gradient_tolerance > T::zero()) {
            return Err(Error::invalid("gradient tolerance must be positive"));
        }
        if !(self.backtrack_factor > T::zero() && self.backtrack_factor < T::one()) {
            return Err(Error::invalid("backtrack factor must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Parameters of [`find_mode`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchConfig<T> {
    /// Number of mixture-distributed candidates.
    pub q: usize,
    /// Polish the best candidate with gradient ascent.
    pub refine: bool,
    pub ascent: AscentConfig<T>,
}

impl<T: Scalar> Default for SearchConfig<T> {
    fn default() -> Self {
        SearchConfig {
            q: 1000,
            refine: true,
            ascent: AscentConfig::default(),
        }
    }
}

impl<T: Scalar> SearchConfig<T> {
    pub fn with_q(q: usize) -> Self {
        SearchConfig {
            q,
            ..Self::default()
        }
    }

    /// Best sampled candidate only, no gradient ascent.
    pub fn unrefined(q: usize) -> Self {
        SearchConfig {
            q,
            refine: false,
            ascent: AscentConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::invalid("q must be at least 1"));
        }
        self.ascent.validate()
    }
}

/// Outcome of one mode search.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeResult<T> {
    pub argmax: Point<T>,
    pub density: T,
    pub best_sample: Point<T>,
    pub best_sample_density: T,
    pub ascent_iterations: usize,
    pub candidates_evaluated: usize,
}

/// Outcome of [`gradient_ascent`].
#[derive(Clone, Debug, PartialEq)]
pub struct Ascent<T> {
    pub point: Point<T>,
    pub density: T,
    /// Accepted steps.
    pub iterations: usize,
    /// Whether the gradient tolerance was reached.
    pub converged: bool,
}

/// Cumulative weights for inverse-CDF categorical draws.
struct Cumulative<T> {
    cdf: Vec<T>,
    last_positive: usize,
}

impl<T: Scalar> Cumulative<T> {
    fn new(weights: &[T]) -> Self {
        let mut acc = T::zero();
        let cdf = weights
            .iter()
            .map(|&w| {
                acc = acc + w;
                acc
            })
            .collect();
        let last_positive = weights.iter().rposition(|&w| w > T::zero()).unwrap_or(0);
        Cumulative { cdf, last_positive }
    }

    /// First index whose cumulative weight exceeds `u`. Rounding can leave
    /// the total just below one; such `u` map to the last positive weight.
    fn draw(&self, u: T) -> usize {
        let i = self.cdf.partition_point(|&c| c <= u);
        if i < self.cdf.len() {
            i
        } else {
            self.last_positive
        }
    }
}

/// Index `i` with `cumsum[i-1] <= u < cumsum[i]` for a probability vector.
pub fn categorical_draw<T: Scalar>(weights: &[T], u: T) -> Result<usize> {
    if weights.is_empty() {
        return Err(Error::invalid("empty weight vector"));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= T::zero())) {
        return Err(Error::invalid("weights must be finite and nonnegative"));
    }
    let total: T = weights.iter().copied().sum();
    if (total - T::one()).abs() > T::lit(1e-9).max(T::epsilon() * T::lit(16.0)) {
        return Err(Error::invalid(format!("weights sum to {total}, not 1")));
    }
    if !(u >= T::zero() && u < T::one()) {
        return Err(Error::invalid("u must lie in [0, 1)"));
    }
    Ok(Cumulative::new(weights).draw(u))
}

/// Appends `q` mixture samples, flattened, to a new vector.
fn draw_samples<T: Scalar, R: Rng + ?Sized>(mix: &Mixture<T>, q: usize, rng: &mut R) -> Vec<T> {
    let d = mix.dim();
    let cdf = Cumulative::new(mix.weights());
    let mut out = Vec::with_capacity(q * d);
    for _ in 0..q {
        let u: f64 = rng.random();
        let j = cdf.draw(T::lit(u));
        let center = mix.center(j);
        let scale = mix.bandwidth(j);
        for k in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            out.push(center[k] + scale[k] * T::lit(z));
        }
    }
    out
}

/// Draws `q` independent samples from `mix`.
pub fn sample_mixture<T: Scalar>(mix: &Mixture<T>, q: usize, seed: Seed) -> Result<Vec<Point<T>>> {
    if q == 0 {
        return Err(Error::invalid("q must be at least 1"));
    }
    let flat = draw_samples(mix, q, &mut seed.rng());
    flat.chunks_exact(mix.dim())
        .map(|c| Point::new(c.to_vec()))
        .collect()
}

/// Backtracking (Armijo) gradient ascent. The line search runs on
/// `ln h` with the gradient scaled per axis by the mixture's mean squared
/// bandwidth, so a unit step is a Newton step for a lone kernel. The density
/// never decreases; running out of iterations returns the best point reached.
pub fn gradient_ascent<T: Scalar>(
    mix: &Mixture<T>,
    start: &[T],
    cfg: &AscentConfig<T>,
) -> Result<Ascent<T>> {
    check_dim(mix.dim(), start.len())?;
    cfg.validate()?;
    let start = Point::new(start.to_vec())?;
    Ok(ascend(mix, start.into_vec(), cfg))
}

fn ascend<T: Scalar>(mix: &Mixture<T>, mut y: Vec<T>, cfg: &AscentConfig<T>) -> Ascent<T> {
    let sufficient = T::lit(1e-4);
    let grow = T::one() / cfg.backtrack_factor;
    let initial_step = cfg
        .initial_step
        .unwrap_or_else(|| T::lit(0.1) * mix.min_bandwidth());
    let precond = axis_preconditioner(mix);

    let mut h = mix.density_unchecked(&y);
    let mut cand = y.clone();
    let mut dir = vec![T::zero(); y.len()];
    // multiplier on the search direction, carried between iterations
    let mut alpha: Option<T> = None;
    let mut iterations = 0;
    let mut converged = false;

    'outer: while iterations < cfg.max_iterations {
        let g = mix.gradient_unchecked(&y);
        let g_norm = g.iter().map(|&v| v * v).sum::<T>().sqrt();
        if !(g_norm >= cfg.gradient_tolerance) {
            converged = g_norm.is_finite();
            break;
        }
        if !(h > T::zero()) {
            break;
        }
        for ((d, &gk), &pk) in dir.iter_mut().zip(&g).zip(&precond) {
            *d = pk * gk / h;
        }
        let slope: T = dir.iter().zip(&g).map(|(&d, &gk)| d * gk / h).sum();
        let dir_norm = dir.iter().map(|&v| v * v).sum::<T>().sqrt();
        let log_h = h.ln();
        let mut a = alpha.unwrap_or(initial_step / dir_norm);
        loop {
            for ((c, &yk), &dk) in cand.iter_mut().zip(&y).zip(&dir) {
                *c = yk + a * dk;
            }
            let hc = mix.density_unchecked(&cand);
            if hc > h && hc.ln() - log_h >= sufficient * a * slope {
                std::mem::swap(&mut y, &mut cand);
                h = hc;
                // past the unit step the ascent overshoots and oscillates
                alpha = Some((a * grow).min(T::one()));
                break;
            }
            a = a * cfg.backtrack_factor;
            let scale = y.iter().fold(T::one(), |m, v| m.max(v.abs()));
            if a * dir_norm <= T::epsilon() * scale {
                break 'outer;
            }
        }
        iterations += 1;
    }

    Ascent {
        point: Point::new(y).expect("ascent stays finite"),
        density: h,
        iterations,
        converged,
    }
}

/// Per-axis mean squared bandwidth.
fn axis_preconditioner<T: Scalar>(mix: &Mixture<T>) -> Vec<T> {
    let n = T::from_usize(mix.len()).expect("kernel count fits the scalar type");
    let mut p = vec![T::zero(); mix.dim()];
    for i in 0..mix.len() {
        for (pk, &s) in p.iter_mut().zip(mix.bandwidth(i)) {
            *pk = *pk + s * s / n;
        }
    }
    p
}

/// Approximate global maximizer of `mix`: best of `cfg.q` mixture samples,
/// optionally refined by gradient ascent. Ties keep the earliest sample.
pub fn find_mode<T: Scalar>(
    mix: &Mixture<T>,
    cfg: &SearchConfig<T>,
    seed: Seed,
) -> Result<ModeResult<T>> {
    cfg.validate()?;
    let d = mix.dim();
    let samples = draw_samples(mix, cfg.q, &mut seed.rng());

    let mut best = 0;
    let mut best_density = T::neg_infinity();
    for (k, s) in samples.chunks_exact(d).enumerate() {
        let v = mix.density_unchecked(s);
        if v > best_density {
            best = k;
            best_density = v;
        }
    }
    let best_sample = samples[best * d..(best + 1) * d].to_vec();

    let (argmax, density, ascent_iterations) = if cfg.refine {
        let a = ascend(mix, best_sample.clone(), &cfg.ascent);
        (a.point, a.density, a.iterations)
    } else {
        (Point::new(best_sample.clone())?, best_density, 0)
    };

    Ok(ModeResult {
        argmax,
        density,
        best_sample: Point::new(best_sample)?,
        best_sample_density: best_density,
        ascent_iterations,
        candidates_evaluated: cfg.q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Bandwidth;

    fn p(v: &[f64]) -> Point<f64> {
        Point::new(v.to_vec()).unwrap()
    }

    fn bw(v: &[f64]) -> Bandwidth<f64> {
        Bandwidth::new(v.to_vec()).unwrap()
    }

    fn test_mixture() -> Mixture<f64> {
        Mixture::new(
            vec![0.45, 0.45, 0.1],
            vec![p(&[1.0, 1.0]), p(&[-1.0, -1.0]), p(&[-1.5, 1.5])],
            vec![bw(&[1.0, 1.0]), bw(&[1.0, 1.0]), bw(&[0.5, 0.5])],
        )
        .unwrap()
    }

    #[test]
    fn categorical_examples() {
        assert_eq!(categorical_draw(&[1.0], 0.0).unwrap(), 0);
        assert_eq!(categorical_draw(&[1.0], 0.999).unwrap(), 0);
        assert_eq!(categorical_draw(&[0.45, 0.45, 0.1], 0.5).unwrap(), 1);
        assert_eq!(categorical_draw(&[0.45, 0.45, 0.1], 0.95).unwrap(), 2);
        assert_eq!(categorical_draw(&[0.45, 0.45, 0.1], 0.0).unwrap(), 0);
        assert_eq!(categorical_draw(&[0.45, 0.45, 0.1], 0.45).unwrap(), 1);
        assert_eq!(categorical_draw(&[0.5, 0.0, 0.5], 0.5).unwrap(), 2);
    }

    #[test]
    fn categorical_rejects_bad_input() {
        assert!(categorical_draw(&[0.5, 0.4], 0.1).is_err());
        assert!(categorical_draw::<f64>(&[], 0.1).is_err());
        assert!(categorical_draw(&[1.0], 1.0).is_err());
        assert!(categorical_draw(&[1.0], -0.1).is_err());
    }

    #[test]
    fn categorical_rounding_fallback_skips_zero_tail() {
        let c = Cumulative::new(&[0.3, 0.7 - 1e-12, 0.0]);
        assert_eq!(c.draw(1.0 - 1e-13), 1);
    }

    #[test]
    fn degenerate_weights_sample_one_kernel() {
        let mix = Mixture::new(
            vec![1.0, 0.0],
            vec![p(&[0.0]), p(&[100.0])],
            vec![bw(&[1.0]); 2],
        )
        .unwrap();
        let pts = sample_mixture(&mix, 5, Seed(3)).unwrap();
        assert_eq!(pts.len(), 5);
        assert!(pts.iter().all(|v| v[0].abs() < 10.0));
    }

    #[test]
    fn vanishing_bandwidth_samples_hit_center() {
        let mix = Mixture::new(vec![1.0], vec![p(&[2.0, -3.0])], vec![bw(&[1e-9, 1e-9])]).unwrap();
        for v in sample_mixture(&mix, 100, Seed(11)).unwrap() {
            assert!(v.distance(&[2.0, -3.0]) < 1e-7);
        }
        assert!(sample_mixture(&mix, 0, Seed(1)).is_err());
    }

    #[test]
    fn ascent_at_center_stays_put() {
        let mix = Mixture::new(vec![1.0], vec![p(&[0.5, -0.5])], vec![bw(&[1.0, 2.0])]).unwrap();
        let a = gradient_ascent(&mix, &[0.5, -0.5], &AscentConfig::default()).unwrap();
        assert_eq!(a.point.coords(), &[0.5, -0.5]);
        assert_eq!(a.iterations, 0);
        assert!(a.converged);
    }

    #[test]
    fn ascent_unimodal_converges() {
        let mix = Mixture::new(vec![1.0], vec![p(&[0.0])], vec![bw(&[1.0])]).unwrap();
        let a = gradient_ascent(&mix, &[0.5], &AscentConfig::default()).unwrap();
        assert!(a.point[0].abs() < 1e-6, "{:?}", a);
        assert!(a.converged);
    }

    #[test]
    fn ascent_is_monotone_and_bounded() {
        let mix = test_mixture();
        let cfg = AscentConfig {
            max_iterations: 3,
            ..AscentConfig::default()
        };
        let start = [2.5, -0.7];
        let a = gradient_ascent(&mix, &start, &cfg).unwrap();
        assert!(a.density >= mix.density(&start).unwrap());
        assert!(a.iterations <= 3);
    }

    #[test]
    fn ascent_reaches_local_max_near_one_one() {
        let mix = test_mixture();
        let a = gradient_ascent(&mix, &[0.9, 0.9], &AscentConfig::default()).unwrap();
        // oracle: nested dense grids around (1, 1)
        let (mut cx, mut cy, mut half) = (1.0, 1.0, 0.5);
        let mut best = (cx, cy, 0.0);
        for _ in 0..6 {
            let n = 200;
            for i in 0..=n {
                for j in 0..=n {
                    let x = cx - half + 2.0 * half * i as f64 / n as f64;
                    let y = cy - half + 2.0 * half * j as f64 / n as f64;
                    let v = mix.density(&[x, y]).unwrap();
                    if v > best.2 {
                        best = (x, y, v);
                    }
                }
            }
            cx = best.0;
            cy = best.1;
            half /= 20.0;
        }
        assert!((a.density - best.2).abs() < 1e-6);
        assert!(
            a.point.distance(&[best.0, best.1]) < 1e-4,
            "{:?} vs {:?}",
            a.point,
            best
        );
    }

    #[test]
    fn ascent_rejects_bad_config() {
        let mix = test_mixture();
        let cfg = AscentConfig {
            backtrack_factor: 1.0,
            ..AscentConfig::default()
        };
        assert!(gradient_ascent(&mix, &[0.0, 0.0], &cfg).is_err());
        assert!(gradient_ascent(&mix, &[0.0], &AscentConfig::default()).is_err());
    }

    #[test]
    fn find_mode_single_kernel() {
        let mix = Mixture::new(vec![1.0], vec![p(&[3.0, -2.0])], vec![bw(&[0.5, 1.5])]).unwrap();
        let r = find_mode(&mix, &SearchConfig::default(), Seed(5)).unwrap();
        assert!(r.argmax.distance(&[3.0, -2.0]) < 1e-6);
        assert_eq!(r.candidates_evaluated, 1000);
        assert!(r.density >= r.best_sample_density);
        assert_eq!(r.density, mix.density(&r.argmax).unwrap());
    }

    #[test]
    fn find_mode_test_mixture_hits_a_global_max() {
        let mix = test_mixture();
        let r = find_mode(&mix, &SearchConfig::with_q(1000), Seed(2024)).unwrap();
        let d = r
            .argmax
            .distance(&[1.0, 1.0])
            .min(r.argmax.distance(&[-1.0, -1.0]));
        assert!(d < 0.15, "{:?}", r.argmax);
    }

    #[test]
    fn find_mode_asymmetric_1d() {
        let mix = Mixture::new(
            vec![0.7, 0.3],
            vec![p(&[0.0]), p(&[3.0])],
            vec![bw(&[1.0]); 2],
        )
        .unwrap();
        // grid oracle with spacing 1e-4 on [-2, 5]
        let mut best = (0.0, f64::NEG_INFINITY);
        for i in 0..=70_000 {
            let y = -2.0 + i as f64 * 1e-4;
            let v = mix.density(&[y]).unwrap();
            if v > best.1 {
                best = (y, v);
            }
        }
        assert!((best.0 - 0.01486).abs() < 1e-4, "grid argmax {}", best.0);
        let r = find_mode(&mix, &SearchConfig::default(), Seed(9)).unwrap();
        assert!((r.argmax[0] - best.0).abs() < 1e-3);
    }

    #[test]
    fn find_mode_is_deterministic() {
        let mix = test_mixture();
        let cfg = SearchConfig::default();
        assert_eq!(
            find_mode(&mix, &cfg, Seed(77)).unwrap(),
            find_mode(&mix, &cfg, Seed(77)).unwrap()
        );
        let unrefined = find_mode(&mix, &SearchConfig::unrefined(100), Seed(77)).unwrap();
        assert_eq!(unrefined.argmax, unrefined.best_sample);
        assert_eq!(unrefined.ascent_iterations, 0);
        assert!(find_mode(&mix, &SearchConfig::unrefined(0), Seed(1)).is_err());
    }
}
