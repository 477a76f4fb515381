//! Seeded error models for flow estimates.
//!
//! Every model draws 2-D errors normalised so that `E[|e|²] = sigma² * s(b)`,
//! where `b` is the temporal baseline of the estimate (frames between the two
//! images it relates) and `s` the configured [`VarianceLaw`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

use crate::error::{Error, Result};
use crate::motion::Refresh;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseKind {
    Gaussian,
    /// Independent Student-t components, degrees of freedom picked to hit the
    /// configured kurtosis.
    StudentT,
    /// Uniform on a disk.
    UniformDisk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarianceLaw {
    Constant,
    LinearInT,
}

/// rng stream ids; trial streams start at `TRIAL_STREAM_BASE`.
pub(crate) const FLOW_STREAM: u64 = 1;
pub(crate) const PIXEL_STREAM: u64 = 2;
pub(crate) const TRIAL_STREAM_BASE: u64 = 1 << 20;

const DEFAULT_STUDENT_KURTOSIS: f64 = 2.5;

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// Base error scale in px (or relative gain for chain flow perturbation).
    pub sigma: f64,
    pub variance_law: VarianceLaw,
    /// Target of `E|e|⁴ / (E|e|²)²`; only used by [`NoiseKind::StudentT`].
    pub kurtosis_target: Option<f64>,
    pub seed: u64,
    /// Std-dev of additive i.i.d. Gaussian noise on grid values (proxy
    /// generator noise); 0 disables it.
    pub pixel_sigma: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            kind: NoiseKind::Gaussian,
            sigma: 1.0,
            variance_law: VarianceLaw::Constant,
            kurtosis_target: None,
            seed: 0,
            pixel_sigma: 0.0,
        }
    }
}

impl NoiseModel {
    pub fn gaussian(sigma: f64, variance_law: VarianceLaw, seed: u64) -> Self {
        Self {
            sigma,
            variance_law,
            seed,
            ..Self::default()
        }
    }

    pub fn student_t(sigma: f64, kurtosis: f64, variance_law: VarianceLaw, seed: u64) -> Self {
        Self {
            kind: NoiseKind::StudentT,
            kurtosis_target: Some(kurtosis),
            ..Self::gaussian(sigma, variance_law, seed)
        }
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::invalid(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.pixel_sigma.is_finite() && self.pixel_sigma >= 0.0) {
            return Err(Error::invalid("pixel_sigma must be >= 0"));
        }
        if let Some(k) = self.kurtosis_target {
            if k.is_nan() || k < 1.0 {
                return Err(Error::invalid(format!("kurtosis must be >= 1, got {k}")));
            }
            if self.kind == NoiseKind::StudentT && k <= 2.0 {
                return Err(Error::invalid(format!(
                    "student-t errors have kurtosis > 2 (the gaussian limit); got {k}"
                )));
            }
        }
        Ok(self)
    }

    /// Degrees of freedom of the Student-t components.
    ///
    /// For independent unit-variance t components with 1-D kurtosis
    /// `3 + 6/(nu-4)`, the 2-D norm kurtosis is `2 + 3/(nu-4)`.
    pub fn student_dof(&self) -> f64 {
        let k = self.kurtosis_target.unwrap_or(DEFAULT_STUDENT_KURTOSIS);
        4.0 + 3.0 / (k - 2.0)
    }

    /// Theoretical `E|e|⁴ / (E|e|²)²` of the configured kind.
    pub fn norm_kurtosis(&self) -> f64 {
        match self.kind {
            NoiseKind::Gaussian => 2.0,
            NoiseKind::StudentT => 2.0 + 3.0 / (self.student_dof() - 4.0),
            NoiseKind::UniformDisk => 4.0 / 3.0,
        }
    }

    pub fn variance_scale(&self, baseline: usize) -> f64 {
        match self.variance_law {
            VarianceLaw::Constant => 1.0,
            VarianceLaw::LinearInT => baseline as f64,
        }
    }

    pub(crate) fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    pub(crate) fn sampler(&self) -> UnitSampler {
        UnitSampler::new(self)
    }

    /// Multiplicative flow-noise gains `eta_1..=eta_horizon` for the chain.
    ///
    /// Eulerian steps always relate adjacent frames (baseline 1); an anchored
    /// estimate at step `t` has baseline `t`.
    pub fn flow_gains(&self, refresh: Refresh, horizon: usize) -> Vec<f64> {
        let sampler = self.sampler();
        let mut rng = self.rng(FLOW_STREAM);
        (1..=horizon)
            .map(|t| {
                let baseline = match refresh {
                    Refresh::EulerianStep => 1,
                    Refresh::LagrangianAnchor => t,
                };
                let unit = sampler.scalar(&mut rng);
                self.sigma * self.variance_scale(baseline).sqrt() * unit
            })
            .collect()
    }
}

/// Draws unit-second-moment 2-D errors of one [`NoiseKind`].
#[derive(Clone, Copy, Debug)]
pub(crate) struct UnitSampler {
    kind: NoiseKind,
    student: Option<(StudentT<f64>, f64)>,
}

impl UnitSampler {
    fn new(model: &NoiseModel) -> Self {
        let student = (model.kind == NoiseKind::StudentT).then(|| {
            let nu = model.student_dof();
            let dist = StudentT::new(nu).expect("dof > 4");
            (dist, ((nu - 2.0) / nu).sqrt())
        });
        Self {
            kind: model.kind,
            student,
        }
    }

    /// 2-D sample with `E|e|² = 1`.
    pub fn vector<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let half = std::f64::consts::FRAC_1_SQRT_2;
        match self.kind {
            NoiseKind::Gaussian => {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                (a * half, b * half)
            }
            NoiseKind::StudentT => {
                let (dist, scale) = self.student.expect("student sampler");
                (dist.sample(rng) * scale * half, dist.sample(rng) * scale * half)
            }
            NoiseKind::UniformDisk => {
                // radius sqrt(2) gives E r² = 1
                let r = (2.0 * rng.random::<f64>()).sqrt();
                let theta = std::f64::consts::TAU * rng.random::<f64>();
                (r * theta.cos(), r * theta.sin())
            }
        }
    }

    /// Scalar sample with `E[e²] = 1` (a rescaled vector component).
    pub fn scalar<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.vector(rng).0 * std::f64::consts::SQRT_2
    }
}

/// Sample `E|e|⁴ / (E|e|²)²` of 2-D vectors.
pub fn measured_norm_kurtosis(samples: &[(f64, f64)]) -> f64 {
    let mut m2 = 0.0;
    let mut m4 = 0.0;
    for (a, b) in samples {
        let z2 = a * a + b * b;
        m2 += z2;
        m4 += z2 * z2;
    }
    let n = samples.len() as f64;
    (m4 / n) / (m2 / n).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draw(model: &NoiseModel, n: usize) -> Vec<(f64, f64)> {
        let s = model.sampler();
        let mut rng = model.rng(7);
        (0..n).map(|_| s.vector(&mut rng)).collect()
    }

    #[test]
    fn unit_second_moment_for_every_kind() {
        for kind in [NoiseKind::Gaussian, NoiseKind::StudentT, NoiseKind::UniformDisk] {
            let m = NoiseModel {
                kind,
                ..NoiseModel::default()
            };
            let xs = draw(&m, 200_000);
            let m2 = xs.iter().map(|(a, b)| a * a + b * b).sum::<f64>() / xs.len() as f64;
            assert!((m2 - 1.0).abs() < 0.03, "{kind:?}: {m2}");
        }
    }

    #[test]
    fn student_kurtosis_hits_target() {
        let m = NoiseModel::student_t(1.0, 2.5, VarianceLaw::Constant, 11);
        let k = measured_norm_kurtosis(&draw(&m, 10_000));
        assert!((k - 2.5).abs() / 2.5 <= 0.15, "{k}");
    }

    #[test]
    fn gaussian_and_disk_kurtosis() {
        let g = measured_norm_kurtosis(&draw(&NoiseModel::default(), 100_000));
        assert!((g - 2.0).abs() < 0.05, "{g}");
        let d = NoiseModel {
            kind: NoiseKind::UniformDisk,
            ..NoiseModel::default()
        };
        let k = measured_norm_kurtosis(&draw(&d, 100_000));
        assert!((k - 4.0 / 3.0).abs() < 0.02, "{k}");
    }

    #[test]
    fn validation() {
        assert!(NoiseModel::gaussian(-1.0, VarianceLaw::Constant, 0)
            .validated()
            .is_err());
        assert!(NoiseModel::student_t(1.0, 1.5, VarianceLaw::Constant, 0)
            .validated()
            .is_err());
        assert!(NoiseModel::student_t(1.0, 3.0, VarianceLaw::Constant, 0)
            .validated()
            .is_ok());
        assert!(NoiseModel {
            kurtosis_target: Some(0.5),
            ..NoiseModel::default()
        }
        .validated()
        .is_err());
    }

    #[test]
    fn gains_follow_the_baseline() {
        let m = NoiseModel::gaussian(0.1, VarianceLaw::LinearInT, 3);
        let eul = m.flow_gains(Refresh::EulerianStep, 4);
        let lag = m.flow_gains(Refresh::LagrangianAnchor, 4);
        // same draws, scaled by sqrt(t)
        for (t, (e, l)) in eul.iter().zip(&lag).enumerate() {
            assert!((l - e * ((t + 1) as f64).sqrt()).abs() < 1e-15);
        }
        assert_eq!(m.flow_gains(Refresh::EulerianStep, 4), eul);
    }
}
