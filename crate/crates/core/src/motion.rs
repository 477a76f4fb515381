//! Lagrangian and Eulerian motion sequences, trajectory integration, sparse
//! hint densification and the warp-and-noise proxy generator.

use std::ops::Range;

use rand_distr::{Distribution, Normal};

use crate::error::{ensure_dims, Error, Result};
use crate::grid::{compose_flows, warp_backward, Direction, FrameGrid, MotionField};
use crate::harness::noise::{NoiseModel, PIXEL_STREAM};

/// One sparse user hint: a point, its per-frame velocity and the frames it is
/// active in.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub position: (f64, f64),
    pub velocity: (f64, f64),
    pub active: Range<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySet {
    width: usize,
    height: usize,
    horizon: usize,
    points: Vec<Trajectory>,
}

impl TrajectorySet {
    pub fn new(width: usize, height: usize, horizon: usize, points: Vec<Trajectory>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("empty canvas"));
        }
        if points.is_empty() {
            return Err(Error::invalid("at least one hint is required"));
        }
        for (i, p) in points.iter().enumerate() {
            let (x, y) = p.position;
            if !crate::grid::in_domain(width, height, x, y) {
                return Err(Error::invalid(format!("hint {i} at ({x}, {y}) is outside the canvas")));
            }
            if p.active.is_empty() || p.active.end > horizon {
                return Err(Error::invalid(format!(
                    "hint {i} active span {:?} not a non-empty part of [0, {horizon})",
                    p.active
                )));
            }
            if !p.velocity.0.is_finite() || !p.velocity.1.is_finite() {
                return Err(Error::invalid(format!("hint {i} has a non-finite velocity")));
            }
        }
        Ok(Self {
            width,
            height,
            horizon,
            points,
        })
    }

    pub fn points(&self) -> &[Trajectory] {
        &self.points
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

/// `0.1 * min(width, height)`.
pub fn default_bandwidth(width: usize, height: usize) -> f64 {
    0.1 * width.min(height) as f64
}

/// Normalised Gaussian-kernel interpolation of the hints active at `frame`.
///
/// `f(x) = Σ w_i v_i / Σ w_i` with `w_i = exp(-|x - p_i|² / (2 h²))`. Weights
/// are computed relative to the nearest hint so far-away pixels do not
/// underflow to `0/0`. A frame with no active hint yields a zero field.
pub fn densify_hints(hints: &TrajectorySet, frame: usize, bandwidth: f64) -> Result<MotionField> {
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(Error::invalid(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let active: Vec<&Trajectory> = hints.points.iter().filter(|p| p.active.contains(&frame)).collect();
    let (w, h) = (hints.width, hints.height);
    if active.is_empty() {
        return MotionField::zeros(w, h, Direction::Forward, frame, frame + 1);
    }
    let inv = 1.0 / (2.0 * bandwidth * bandwidth);
    let mut d2 = vec![0.0; active.len()];
    MotionField::from_fn(w, h, Direction::Forward, frame, frame + 1, |x, y| {
        for (d, p) in d2.iter_mut().zip(&active) {
            *d = (x as f64 - p.position.0).powi(2) + (y as f64 - p.position.1).powi(2);
        }
        let nearest = d2.iter().copied().fold(f64::INFINITY, f64::min);
        let (mut sw, mut su, mut sv) = (0.0, 0.0, 0.0);
        for (d, p) in d2.iter().zip(&active) {
            let wgt = (-(d - nearest) * inv).exp();
            sw += wgt;
            su += wgt * p.velocity.0;
            sv += wgt * p.velocity.1;
        }
        (su / sw, sv / sw)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MotionMode {
    /// Field `k` spans `0 -> k+1` (or `k+1 -> 0` for backward fields).
    Lagrangian,
    /// Field `k` spans `k -> k+1` (or `k+1 -> k` for backward fields).
    Eulerian,
}

/// Ordered list of fields with a fixed frame-index layout.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionSequence {
    mode: MotionMode,
    fields: Vec<MotionField>,
}

impl MotionSequence {
    pub fn new(mode: MotionMode, fields: Vec<MotionField>) -> Result<Self> {
        let first = fields
            .first()
            .ok_or_else(|| Error::invalid("a motion sequence needs at least one field"))?;
        let direction = first.direction();
        for (k, f) in fields.iter().enumerate() {
            ensure_dims(first.dims(), f.dims())?;
            if f.direction() != direction {
                return Err(Error::invalid("mixed field directions in sequence"));
            }
            let (src, dst) = match (mode, direction) {
                (MotionMode::Eulerian, Direction::Forward) => (k, k + 1),
                (MotionMode::Eulerian, Direction::Backward) => (k + 1, k),
                (MotionMode::Lagrangian, Direction::Forward) => (0, k + 1),
                (MotionMode::Lagrangian, Direction::Backward) => (k + 1, 0),
            };
            if (f.src_frame(), f.dst_frame()) != (src, dst) {
                return Err(Error::invalid(format!(
                    "{mode:?} field {k} spans {}->{}, expected {src}->{dst}",
                    f.src_frame(),
                    f.dst_frame()
                )));
            }
        }
        Ok(Self { mode, fields })
    }

    pub fn mode(&self) -> MotionMode {
        self.mode
    }

    pub fn direction(&self) -> Direction {
        self.fields[0].direction()
    }

    pub fn fields(&self) -> &[MotionField] {
        &self.fields
    }

    pub fn horizon(&self) -> usize {
        self.fields.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.fields[0].dims()
    }
}

/// Chains Eulerian steps into reference-anchored displacements.
///
/// Forward: `u_{0->t+1} = compose(u_{0->t}, f_{t->t+1})`, which is the explicit
/// Euler update `x_{t+1} = x_t + f(x_t)` applied per pixel. Backward fields
/// chain the other way round, `u_{t+1->0} = compose(b_{t+1->t}, u_{t->0})`.
pub fn eulerian_to_lagrangian(seq: &MotionSequence) -> Result<MotionSequence> {
    if seq.mode != MotionMode::Eulerian {
        return Err(Error::invalid("expected an Eulerian sequence"));
    }
    let mut out: Vec<MotionField> = Vec::with_capacity(seq.horizon());
    for step in &seq.fields {
        let next = match out.last() {
            None => step.clone(),
            Some(acc) => match seq.direction() {
                Direction::Forward => compose_flows(acc, step)?,
                Direction::Backward => compose_flows(step, acc)?,
            },
        };
        out.push(next);
    }
    MotionSequence::new(MotionMode::Lagrangian, out)
}

/// Explicit Euler integration of one point through a forward Eulerian
/// sequence. Returns `horizon + 1` positions starting with `start`.
pub fn integrate_point(seq: &MotionSequence, start: (f64, f64)) -> Result<Vec<(f64, f64)>> {
    if seq.mode != MotionMode::Eulerian || seq.direction() != Direction::Forward {
        return Err(Error::invalid("expected a forward Eulerian sequence"));
    }
    let mut p = start;
    let mut path = vec![p];
    for f in &seq.fields {
        let (u, v) = f.sample(p.0, p.1);
        p = (p.0 + u, p.1 + v);
        path.push(p);
    }
    Ok(path)
}

/// How the proxy generator obtains frame `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Refresh {
    /// Re-warp the reference frame with the anchored displacement.
    LagrangianAnchor,
    /// Warp the previous output with the current step field.
    EulerianStep,
}

/// Warp-and-noise stand-in for an autoregressive generator.
///
/// `seq` is an Eulerian sequence whose field `k` is applied with
/// [`warp_backward`] to produce frame `k+1`; pass backward (`k+1 -> k`) fields
/// so each output pixel pulls from its source in the previous frame.
///
/// * `EulerianStep`: `z_t = W(z_{t-1}, (1 + eta_t) * seq[t-1]) + n_t`
/// * `LagrangianAnchor`: `z_t = W(z_0, (1 + eta_t) * U[t-1]) + n_t` where `U` is
///   [`eulerian_to_lagrangian`] of `seq`
///
/// `eta_t` come from [`NoiseModel::flow_gains`], `n_t` is i.i.d. Gaussian with
/// std-dev `noise.pixel_sigma`. Outputs are clamped to `[0, 1]`. Returns
/// `z_0..=z_T`.
pub fn autoregressive_chain(
    z0: &FrameGrid,
    seq: &MotionSequence,
    noise: &NoiseModel,
    refresh: Refresh,
) -> Result<Vec<FrameGrid>> {
    if seq.mode != MotionMode::Eulerian {
        return Err(Error::invalid("the chain consumes an Eulerian sequence"));
    }
    ensure_dims(z0.dims(), seq.dims())?;
    let noise = noise.clone().validated()?;
    let horizon = seq.horizon();
    let gains = noise.flow_gains(refresh, horizon);
    let anchored = match refresh {
        Refresh::LagrangianAnchor => Some(eulerian_to_lagrangian(seq)?),
        Refresh::EulerianStep => None,
    };
    let mut rng = noise.rng(PIXEL_STREAM);
    let pixel = (noise.pixel_sigma > 0.0).then(|| Normal::new(0.0, noise.pixel_sigma).expect("finite sigma"));

    let mut frames = Vec::with_capacity(horizon + 1);
    frames.push(z0.clone());
    for t in 1..=horizon {
        let (base, field) = match &anchored {
            Some(lag) => (z0, &lag.fields[t - 1]),
            None => (&frames[t - 1], &seq.fields[t - 1]),
        };
        let field = field.scaled(1.0 + gains[t - 1]);
        let (warped, _) = warp_backward(base, &field)?;
        let next = match &pixel {
            Some(dist) => warped.map(|v| (v as f64 + dist.sample(&mut rng)) as f32)?,
            None => warped,
        };
        frames.push(next);
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::noise::VarianceLaw;

    fn hint(p: (f64, f64), v: (f64, f64)) -> Trajectory {
        Trajectory {
            position: p,
            velocity: v,
            active: 0..4,
        }
    }

    fn translations(n: usize, d: (f32, f32), direction: Direction) -> MotionSequence {
        let fields = (0..n)
            .map(|k| {
                let (s, t) = match direction {
                    Direction::Forward => (k, k + 1),
                    Direction::Backward => (k + 1, k),
                };
                MotionField::uniform(12, 10, d, direction, s, t).unwrap()
            })
            .collect();
        MotionSequence::new(MotionMode::Eulerian, fields).unwrap()
    }

    #[test]
    fn single_hint_is_uniform() {
        let set = TrajectorySet::new(16, 12, 4, vec![hint((3.0, 4.0), (1.5, -0.5))]).unwrap();
        let f = densify_hints(&set, 0, 2.0).unwrap();
        assert!(f.u().iter().all(|&u| (u - 1.5).abs() < 1e-6));
        assert!(f.v().iter().all(|&v| (v + 0.5).abs() < 1e-6));
    }

    #[test]
    fn equal_hints_give_their_velocity() {
        let set = TrajectorySet::new(
            16,
            12,
            4,
            vec![hint((1.0, 1.0), (0.25, 2.0)), hint((14.0, 10.0), (0.25, 2.0))],
        )
        .unwrap();
        let f = densify_hints(&set, 1, 3.0).unwrap();
        assert!(f.u().iter().all(|&u| (u - 0.25).abs() < 1e-6));
        assert!(f.v().iter().all(|&v| (v - 2.0).abs() < 1e-6));
    }

    #[test]
    fn opposite_hints_cancel_at_the_midpoint() {
        let set = TrajectorySet::new(
            11,
            3,
            4,
            vec![hint((0.0, 0.0), (1.0, 0.0)), hint((10.0, 0.0), (-1.0, 0.0))],
        )
        .unwrap();
        let f = densify_hints(&set, 0, 2.0).unwrap();
        assert_eq!(f.get(5, 0), (0.0, 0.0));
    }

    #[test]
    fn far_pixels_do_not_underflow() {
        let set = TrajectorySet::new(
            200,
            4,
            4,
            vec![hint((0.0, 0.0), (2.0, 0.0)), hint((1.0, 0.0), (4.0, 0.0))],
        )
        .unwrap();
        let f = densify_hints(&set, 0, 0.5).unwrap();
        assert!(f.u().iter().all(|u| u.is_finite() && *u >= 2.0 && *u <= 4.0));
    }

    #[test]
    fn inactive_frame_is_zero_and_bad_bandwidth_fails() {
        let mut h = hint((2.0, 2.0), (1.0, 1.0));
        h.active = 1..2;
        let set = TrajectorySet::new(8, 8, 4, vec![h]).unwrap();
        let f = densify_hints(&set, 3, 1.0).unwrap();
        assert!(f.u().iter().chain(f.v()).all(|&c| c == 0.0));
        assert!(densify_hints(&set, 0, 0.0).is_err());
        assert!(densify_hints(&set, 0, -1.0).is_err());
    }

    #[test]
    fn hint_validation() {
        assert!(TrajectorySet::new(8, 8, 4, vec![]).is_err());
        assert!(TrajectorySet::new(8, 8, 4, vec![hint((9.0, 0.0), (0.0, 0.0))]).is_err());
        let mut h = hint((1.0, 1.0), (0.0, 0.0));
        h.active = 2..6;
        assert!(TrajectorySet::new(8, 8, 4, vec![h]).is_err());
    }

    #[test]
    fn sequence_layout_is_checked() {
        let anchored = vec![
            MotionField::zeros(4, 4, Direction::Forward, 0, 1).unwrap(),
            MotionField::zeros(4, 4, Direction::Forward, 0, 2).unwrap(),
        ];
        assert!(MotionSequence::new(MotionMode::Eulerian, anchored.clone()).is_err());
        assert!(MotionSequence::new(MotionMode::Lagrangian, anchored).is_ok());
    }

    #[test]
    fn chaining_translations() {
        let seq = translations(1, (0.5, 1.25), Direction::Forward);
        let lag = eulerian_to_lagrangian(&seq).unwrap();
        assert_eq!(lag.fields()[0], seq.fields()[0]);

        let seq = translations(7, (0.5, -1.25), Direction::Forward);
        let lag = eulerian_to_lagrangian(&seq).unwrap();
        let last = &lag.fields()[6];
        assert_eq!((last.src_frame(), last.dst_frame()), (0, 7));
        assert!(last.u().iter().all(|&u| u == 3.5));
        assert!(last.v().iter().all(|&v| v == -8.75));

        let back = translations(3, (-1.0, 0.0), Direction::Backward);
        let lag = eulerian_to_lagrangian(&back).unwrap();
        assert_eq!((lag.fields()[2].src_frame(), lag.fields()[2].dst_frame()), (3, 0));
        assert!(lag.fields()[2].u().iter().all(|&u| u == -3.0));
        assert!(eulerian_to_lagrangian(&lag).is_err());
    }

    #[test]
    fn lagrangian_field_matches_euler_integration() {
        let fields = (0..6)
            .map(|k| {
                MotionField::from_fn(20, 20, Direction::Forward, k, k + 1, |x, y| {
                    let (xf, yf) = (x as f64, y as f64);
                    (
                        0.05 * (yf - 10.0) + 0.1 * k as f64,
                        -0.04 * (xf - 10.0) + 0.02 * xf.sin(),
                    )
                })
                .unwrap()
            })
            .collect();
        let seq = MotionSequence::new(MotionMode::Eulerian, fields).unwrap();
        let lag = eulerian_to_lagrangian(&seq).unwrap();
        for &(x, y) in &[(10usize, 10usize), (7, 12), (13, 6)] {
            let path = integrate_point(&seq, (x as f64, y as f64)).unwrap();
            for (t, p) in path.iter().enumerate().skip(1) {
                let (u, v) = lag.fields()[t - 1].get(x, y);
                assert!((x as f64 + u as f64 - p.0).abs() < 1e-4);
                assert!((y as f64 + v as f64 - p.1).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn compose_then_warp_equals_iterated_warp() {
        let g = FrameGrid::from_fn(12, 10, 1, |x, y, _| ((x * 5 + y * 3) % 7) as f64 / 6.0).unwrap();
        let seq = translations(3, (-1.0, 0.0), Direction::Backward);
        let lag = eulerian_to_lagrangian(&seq).unwrap();
        let (once, _) = warp_backward(&g, &lag.fields()[2]).unwrap();
        let mut iter = g.clone();
        for f in seq.fields() {
            iter = warp_backward(&iter, f).unwrap().0;
        }
        for y in 0..10 {
            for x in 3..12 {
                assert_eq!(once.get(x, y, 0), iter.get(x, y, 0));
            }
        }
    }

    #[test]
    fn zero_motion_zero_noise_is_static() {
        let z0 = FrameGrid::from_fn(12, 10, 2, |x, y, c| ((x + 2 * y + c) % 5) as f64 / 4.0).unwrap();
        let seq = translations(5, (0.0, 0.0), Direction::Backward);
        let noise = NoiseModel::gaussian(0.0, VarianceLaw::Constant, 1);
        for refresh in [Refresh::EulerianStep, Refresh::LagrangianAnchor] {
            let frames = autoregressive_chain(&z0, &seq, &noise, refresh).unwrap();
            assert_eq!(frames.len(), 6);
            assert!(frames.iter().all(|f| *f == z0));
        }
    }

    #[test]
    fn pixel_noise_random_walk() {
        // zero flow: z_t - z_0 is a sum of t i.i.d. N(0, s²) draws
        let s = 0.004;
        let z0 = FrameGrid::filled(64, 64, 1, 0.5).unwrap();
        let seq = translations(64, (0.0, 0.0), Direction::Backward);
        let seq = MotionSequence::new(
            MotionMode::Eulerian,
            seq.fields()
                .iter()
                .map(|f| MotionField::zeros(64, 64, f.direction(), f.src_frame(), f.dst_frame()).unwrap())
                .collect(),
        )
        .unwrap();
        let noise = NoiseModel {
            sigma: 0.0,
            pixel_sigma: s,
            seed: 5,
            ..NoiseModel::default()
        };
        let frames = autoregressive_chain(&z0, &seq, &noise, Refresh::EulerianStep).unwrap();
        for t in [1usize, 4, 16, 64] {
            let rms = (frames[t].data().iter().map(|&v| (v as f64 - 0.5).powi(2)).sum::<f64>() / 4096.0).sqrt();
            let expected = s * (t as f64).sqrt();
            assert!((rms / expected - 1.0).abs() < 0.05, "t={t}: {rms} vs {expected}");
        }
        let again = autoregressive_chain(&z0, &seq, &noise, Refresh::EulerianStep).unwrap();
        assert_eq!(frames, again);
    }
}
