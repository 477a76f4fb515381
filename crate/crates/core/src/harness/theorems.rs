//! Monte-Carlo checks of the endpoint-error bounds for anchored and
//! per-step supervision.

use rayon::prelude::*;

use super::noise::{measured_norm_kurtosis, NoiseModel, VarianceLaw, TRIAL_STREAM_BASE};
use crate::error::{Error, Result};
use crate::grid::ValidityMask;
use crate::synth::{SceneModel, SceneSpec, Shape, Sprite};

/// Smallest trial count accepted by the verifiers.
pub const MIN_TRIALS: usize = 100;

/// Start of the log-log fit window for the anchored-error slope.
pub const SLOPE_FIT_START: usize = 16;

/// Per-`t` error statistics of one Monte-Carlo run.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorSeries {
    pub t: Vec<usize>,
    /// px
    pub mean_epe: Vec<f64>,
    /// px²
    pub mean_sq_epe: Vec<f64>,
    pub valid_fraction: Vec<f64>,
    /// Bound implied at each `t`, px.
    pub bound_value: Vec<f64>,
    /// Sample norm kurtosis of the injected errors at each `t`.
    pub kurtosis_hat: Vec<f64>,
    pub seeds_used: usize,
}

impl ErrorSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn max_mean_epe(&self) -> f64 {
        self.mean_epe.iter().copied().fold(0.0, f64::max)
    }

    /// Least-squares slope of `mean_epe` against `t`, px/step.
    pub fn linear_slope(&self) -> f64 {
        let xs: Vec<f64> = self.t.iter().map(|&t| t as f64).collect();
        fit_slope(&xs, &self.mean_epe)
    }

    /// Least-squares slope of `ln mean_epe` against `ln t` over `t >= from`.
    pub fn loglog_slope(&self, from: usize) -> f64 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .t
            .iter()
            .zip(&self.mean_epe)
            .filter(|(&t, &e)| t >= from && t > 0 && e > 0.0)
            .map(|(&t, &e)| ((t as f64).ln(), e.ln()))
            .unzip();
        fit_slope(&xs, &ys)
    }

    /// `mean_epe² <= mean_sq_epe` at every `t`, up to rounding.
    pub fn jensen_holds(&self) -> bool {
        self.mean_epe
            .iter()
            .zip(&self.mean_sq_epe)
            .all(|(m, s)| m * m <= s * (1.0 + 1e-12))
    }
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return f64::NAN;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq)]
pub struct Theorem1Report {
    pub series: ErrorSeries,
    pub sigma: f64,
    /// Log-log slope of mean error over `t >= SLOPE_FIT_START`.
    pub loglog_slope: f64,
    /// `mean_epe(t) >= sigma sqrt(t) / (4 sqrt(2) kappa_hat(t))` at every `t`.
    pub bound_holds: bool,
    /// `min_t mean_epe(t) / (sigma sqrt(t))`: how the measurement compares
    /// with the unscaled `sigma sqrt(t)` bound.
    pub stated_ratio: f64,
}

impl Theorem1Report {
    pub fn slope_in_range(&self) -> bool {
        (0.4..=0.6).contains(&self.loglog_slope)
    }

    pub fn passed(&self) -> bool {
        self.bound_holds && self.slope_in_range()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Theorem2Report {
    pub series: ErrorSeries,
    /// `sigma (1 + 3 / sqrt(trials))`.
    pub bound: f64,
    pub max_mean_epe: f64,
    /// px/step.
    pub slope: f64,
}

impl Theorem2Report {
    pub fn passed(&self) -> bool {
        self.max_mean_epe <= self.bound && self.slope.abs() <= 0.02
    }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(Error::invalid(format!(
            "need at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    Ok(())
}

/// Anchored (reference-frame) supervision: at every `t in 1..=horizon` each
/// trial draws one fresh error vector with `E|e|² = sigma² * s(t)`, where `s`
/// is the model's variance law (use [`VarianceLaw::LinearInT`] for the
/// growing-baseline setting).
pub fn verify_theorem1(noise: &NoiseModel, horizon: usize, trials: usize) -> Result<Theorem1Report> {
    check_trials(trials)?;
    if horizon < 2 {
        return Err(Error::invalid("horizon must be >= 2"));
    }
    let noise = noise.clone().validated()?;
    let sampler = noise.sampler();
    let draws: Vec<Vec<(f64, f64)>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = noise.rng(TRIAL_STREAM_BASE + trial as u64);
            (1..=horizon)
                .map(|t| {
                    let scale = noise.sigma * noise.variance_scale(t).sqrt();
                    let (a, b) = sampler.vector(&mut rng);
                    (a * scale, b * scale)
                })
                .collect()
        })
        .collect();

    let mut series = empty_series(trials);
    let mut at_t = Vec::with_capacity(trials);
    for t in 1..=horizon {
        at_t.clear();
        at_t.extend(draws.iter().map(|d| d[t - 1]));
        let (mean, mean_sq) = moments(&at_t);
        let kappa = measured_norm_kurtosis(&at_t);
        let bound = noise.sigma * (t as f64).sqrt() / (4.0 * std::f64::consts::SQRT_2 * kappa);
        series.t.push(t);
        series.mean_epe.push(mean);
        series.mean_sq_epe.push(mean_sq);
        series.valid_fraction.push(1.0);
        series.bound_value.push(if kappa.is_finite() { bound } else { 0.0 });
        series.kurtosis_hat.push(kappa);
    }
    let bound_holds = series.mean_epe.iter().zip(&series.bound_value).all(|(m, b)| m >= b);
    let stated_ratio = series
        .t
        .iter()
        .zip(&series.mean_epe)
        .map(|(&t, &m)| m / (noise.sigma * (t as f64).sqrt()))
        .fold(f64::INFINITY, f64::min);
    Ok(Theorem1Report {
        loglog_slope: series.loglog_slope(SLOPE_FIT_START.min(horizon)),
        sigma: noise.sigma,
        bound_holds,
        stated_ratio,
        series,
    })
}

/// Small scene whose adjacent-frame valid sets supply the per-step domains.
pub fn theorem_scene() -> SceneSpec {
    SceneSpec::new(
        16,
        16,
        71,
        vec![Sprite {
            shape: Shape::Rectangle {
                half_width: 3.0,
                half_height: 3.0,
            },
            texture_seed: 72,
            center: (7.5, 7.5),
            velocity: (0.0, 0.0),
            angular_velocity: 0.1,
            depth: 0,
        }],
    )
}

/// Per-step supervision: at every `t in 1..=horizon` each valid pixel of the
/// adjacent-frame domain `Ω_valid(t)` carries an i.i.d. error with
/// `E|e|² = sigma²` (baseline 1 regardless of the variance law). The per-trial
/// error is averaged over `Ω_valid(t)`.
pub fn verify_theorem2(noise: &NoiseModel, horizon: usize, trials: usize, scene: &SceneSpec) -> Result<Theorem2Report> {
    check_trials(trials)?;
    if horizon < 2 {
        return Err(Error::invalid("horizon must be >= 2"));
    }
    let noise = noise.clone().validated()?;
    let model = SceneModel::new(scene)?;
    let masks: Vec<ValidityMask> = (1..=horizon).map(|t| model.validity(t - 1, t)).collect::<Result<_>>()?;
    let counts: Vec<usize> = masks.iter().map(|m| m.valid_count()).collect();
    if counts.contains(&0) {
        return Err(Error::invalid("scene has a frame with no valid pixels"));
    }
    let scale = noise.sigma * noise.variance_scale(1).sqrt();
    let sampler = noise.sampler();
    // per trial, per t: (mean |e|, mean |e|²) over the valid pixels
    let per_trial: Vec<Vec<(f64, f64)>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = noise.rng(TRIAL_STREAM_BASE + trial as u64);
            counts
                .iter()
                .map(|&n| {
                    let (mut s1, mut s2) = (0.0, 0.0);
                    for _ in 0..n {
                        let (a, b) = sampler.vector(&mut rng);
                        let sq = (a * a + b * b) * scale * scale;
                        s1 += sq.sqrt();
                        s2 += sq;
                    }
                    (s1 / n as f64, s2 / n as f64)
                })
                .collect()
        })
        .collect();

    let mut series = empty_series(trials);
    let bound = noise.sigma * (1.0 + 3.0 / (trials as f64).sqrt());
    for t in 1..=horizon {
        let (mut m1, mut m2) = (0.0, 0.0);
        for trial in &per_trial {
            m1 += trial[t - 1].0;
            m2 += trial[t - 1].1;
        }
        series.t.push(t);
        series.mean_epe.push(m1 / trials as f64);
        series.mean_sq_epe.push(m2 / trials as f64);
        series.valid_fraction.push(masks[t - 1].valid_fraction());
        series.bound_value.push(bound);
        series.kurtosis_hat.push(noise.norm_kurtosis());
    }
    Ok(Theorem2Report {
        bound,
        max_mean_epe: series.max_mean_epe(),
        slope: series.linear_slope(),
        series,
    })
}

fn empty_series(seeds_used: usize) -> ErrorSeries {
    ErrorSeries {
        t: Vec::new(),
        mean_epe: Vec::new(),
        mean_sq_epe: Vec::new(),
        valid_fraction: Vec::new(),
        bound_value: Vec::new(),
        kurtosis_hat: Vec::new(),
        seeds_used,
    }
}

fn moments(errors: &[(f64, f64)]) -> (f64, f64) {
    let (mut s1, mut s2) = (0.0, 0.0);
    for (a, b) in errors {
        let sq = a * a + b * b;
        s1 += sq.sqrt();
        s2 += sq;
    }
    let n = errors.len() as f64;
    (s1 / n, s2 / n)
}

/// Growing-baseline model used by the anchored verifier.
pub fn anchored_noise(sigma: f64, seed: u64) -> NoiseModel {
    NoiseModel::gaussian(sigma, VarianceLaw::LinearInT, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::noise::NoiseKind;

    #[test]
    fn anchored_gaussian_matches_rayleigh_mean() {
        let r = verify_theorem1(&anchored_noise(1.0, 5), 100, 4000).unwrap();
        // Rayleigh mean sqrt(pi)/2 * sigma sqrt(t) at t = 100
        let expected = std::f64::consts::PI.sqrt() / 2.0 * 10.0;
        let got = r.series.mean_epe[99];
        assert!((got - expected).abs() / expected < 0.03, "{got}");
        assert!(r.series.jensen_holds());
    }

    #[test]
    fn zero_baseline_draws_nothing() {
        let m = anchored_noise(1.0, 0);
        assert_eq!(m.variance_scale(0), 0.0);
    }

    #[test]
    fn constant_law_has_flat_slope() {
        let m = NoiseModel::gaussian(1.0, VarianceLaw::Constant, 2);
        let r = verify_theorem1(&m, 64, 500).unwrap();
        assert!(r.loglog_slope.abs() < 0.1, "{}", r.loglog_slope);
        assert!(!r.passed());
    }

    #[test]
    fn student_anchored_slope_and_bound() {
        let m = NoiseModel::student_t(1.0, 3.0, VarianceLaw::LinearInT, 9);
        let r = verify_theorem1(&m, 128, 1000).unwrap();
        assert!(r.passed(), "{} {}", r.loglog_slope, r.bound_holds);
    }

    #[test]
    fn too_few_trials_is_an_argument_error() {
        assert!(verify_theorem1(&anchored_noise(1.0, 0), 10, 99).is_err());
        let m = NoiseModel::default();
        assert!(verify_theorem2(&m, 10, 5, &theorem_scene()).is_err());
    }

    #[test]
    fn per_step_zero_noise_is_zero() {
        let m = NoiseModel::gaussian(0.0, VarianceLaw::Constant, 1);
        let r = verify_theorem2(&m, 8, 100, &theorem_scene()).unwrap();
        assert!(r.series.mean_epe.iter().all(|&e| e == 0.0));
        assert!(r.passed());
    }

    #[test]
    fn per_step_disk_moments() {
        // radius r = sqrt(2) sigma: mean 2r/3, mean square r²/2
        let sigma = 0.75;
        let r = std::f64::consts::SQRT_2 * sigma;
        let m = NoiseModel {
            kind: NoiseKind::UniformDisk,
            sigma,
            seed: 4,
            ..NoiseModel::default()
        };
        let rep = verify_theorem2(&m, 16, 200, &theorem_scene()).unwrap();
        for (m1, m2) in rep.series.mean_epe.iter().zip(&rep.series.mean_sq_epe) {
            assert!((m1 - 2.0 * r / 3.0).abs() < 0.01, "{m1}");
            assert!((m2 - r * r / 2.0).abs() < 0.01, "{m2}");
        }
        assert!(rep.passed());
    }

    #[test]
    fn runs_are_bitwise_reproducible() {
        let m = anchored_noise(1.0, 77);
        assert_eq!(
            verify_theorem1(&m, 20, 100).unwrap(),
            verify_theorem1(&m, 20, 100).unwrap()
        );
        let g = NoiseModel::gaussian(1.0, VarianceLaw::Constant, 3);
        let s = theorem_scene();
        assert_eq!(
            verify_theorem2(&g, 12, 100, &s).unwrap(),
            verify_theorem2(&g, 12, 100, &s).unwrap()
        );
    }
}
