//! Drift of the warp-and-noise chain under anchored and per-step refresh.

use rayon::prelude::*;

use super::noise::NoiseModel;
use crate::error::{Error, Result};
use crate::grid::{FrameGrid, MotionField};
use crate::motion::{autoregressive_chain, eulerian_to_lagrangian, MotionMode, MotionSequence, Refresh};
use crate::synth::{render, GroundTruthBundle, SceneModel, SceneSpec, Shape};

/// Inset of tracked points from the sprite outline, px.
const TRACK_INSET: f64 = 3.0;

/// Errors of one chain run.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainErrors {
    /// Mean endpoint error of the tracked points at `t = 1..=horizon`, px.
    pub endpoint: Vec<f64>,
    /// RMSE of the final frame against the rendered frame over pixels whose
    /// source in frame 0 is visible.
    pub final_photometric: f64,
}

impl ChainErrors {
    pub fn final_endpoint(&self) -> f64 {
        *self.endpoint.last().expect("non-empty horizon")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub eulerian: ChainErrors,
    pub lagrangian: ChainErrors,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriftReport {
    pub frames: usize,
    pub tracked_points: usize,
    pub outcomes: Vec<SeedOutcome>,
    /// Seeds whose final endpoint errors agree to 1e-9 px; every seed ties
    /// when the flow noise is zero, since the modes then differ only by
    /// integration error.
    pub ties: usize,
    /// Share of non-tied seeds where the per-step chain ends closer to the
    /// truth; `None` when every seed ties.
    pub eulerian_win_fraction: Option<f64>,
}

impl DriftReport {
    /// Per-`t` endpoint error averaged over seeds, `(eulerian, lagrangian)`.
    pub fn mean_endpoint_series(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.outcomes.len() as f64;
        let len = self.frames - 1;
        let mut e = vec![0.0; len];
        let mut l = vec![0.0; len];
        for o in &self.outcomes {
            for t in 0..len {
                e[t] += o.eulerian.endpoint[t] / n;
                l[t] += o.lagrangian.endpoint[t] / n;
            }
        }
        (e, l)
    }
}

/// Points inside each sprite near its outline, in frame-0 coordinates,
/// kept only if they stay visible and in-domain through `frames`.
pub fn tracked_points(spec: &SceneSpec, frames: usize) -> Result<Vec<(f64, f64)>> {
    let model = SceneModel::new(spec)?;
    let mut points = Vec::new();
    for s in &spec.sprites {
        let local: Vec<(f64, f64)> = match s.shape {
            Shape::Rectangle {
                half_width,
                half_height,
            } => {
                let (a, b) = (
                    (half_width - TRACK_INSET).max(0.0),
                    (half_height - TRACK_INSET).max(0.0),
                );
                vec![(-a, -b), (a, -b), (a, b), (-a, b)]
            }
            Shape::Disk { radius } => {
                let r = (radius - TRACK_INSET).max(0.0) * std::f64::consts::FRAC_1_SQRT_2;
                vec![(-r, -r), (r, -r), (r, r), (-r, r)]
            }
        };
        points.extend(local.into_iter().map(|(px, py)| (s.center.0 + px, s.center.1 + py)));
    }
    points.retain(|&p| (1..frames).all(|t| model.correspondence_valid(p, 0.0, t as f64)));
    if points.is_empty() {
        return Err(Error::invalid("scene has no sprite point that stays visible"));
    }
    Ok(points)
}

/// Runs both chain modes on the scene's analytic backward flows with the
/// same noise draws, for seeds `noise.seed .. noise.seed + seeds`.
pub fn drift_experiment(spec: &SceneSpec, noise: &NoiseModel, frames: usize, seeds: usize) -> Result<DriftReport> {
    if frames < 10 {
        return Err(Error::invalid(format!("need at least 10 frames, got {frames}")));
    }
    if seeds == 0 {
        return Err(Error::invalid("need at least one seed"));
    }
    let noise = noise.clone().validated()?;
    let bundle = render(spec, frames)?;
    let points = tracked_points(spec, frames)?;
    let truth: Vec<Vec<(f64, f64)>> = {
        let model = SceneModel::new(spec)?;
        (1..frames)
            .map(|t| {
                points
                    .iter()
                    .map(|&p| {
                        let s = model.surface_at(p, 0.0);
                        model.transport(s, p, 0.0, t as f64)
                    })
                    .collect()
            })
            .collect()
    };
    let seq = MotionSequence::new(MotionMode::Eulerian, bundle.bwd_flows.clone())?;
    let anchored = eulerian_to_lagrangian(&seq)?;
    let photometric_masks = {
        let model = SceneModel::new(spec)?;
        model.validity(frames - 1, 0)?
    };

    let outcomes = (0..seeds as u64)
        .into_par_iter()
        .map(|k| {
            let model = NoiseModel {
                seed: noise.seed.wrapping_add(k),
                ..noise.clone()
            };
            let run = |refresh| -> Result<ChainErrors> {
                let chain = autoregressive_chain(&bundle.frames[0], &seq, &model, refresh)?;
                let gains = model.flow_gains(refresh, frames - 1);
                let endpoint = (1..frames)
                    .map(|t| {
                        let pulled: Vec<(f64, f64)> = truth[t - 1]
                            .iter()
                            .map(|&x| match refresh {
                                Refresh::EulerianStep => pull_eulerian(&seq, &gains, t, x),
                                Refresh::LagrangianAnchor => pull_once(&anchored.fields()[t - 1], gains[t - 1], x),
                            })
                            .collect();
                        mean_distance(&pulled, &points)
                    })
                    .collect();
                let final_photometric = masked_rmse(
                    chain.last().expect("non-empty chain"),
                    &bundle.frames[frames - 1],
                    &photometric_masks,
                );
                Ok(ChainErrors {
                    endpoint,
                    final_photometric,
                })
            };
            Ok(SeedOutcome {
                seed: model.seed,
                eulerian: run(Refresh::EulerianStep)?,
                lagrangian: run(Refresh::LagrangianAnchor)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut wins = 0;
    let mut ties = 0;
    for o in &outcomes {
        let (e, l) = (o.eulerian.final_endpoint(), o.lagrangian.final_endpoint());
        if noise.sigma == 0.0 || (e - l).abs() <= 1e-9 {
            ties += 1;
        } else if e < l {
            wins += 1;
        }
    }
    let decided = outcomes.len() - ties;
    Ok(DriftReport {
        frames,
        tracked_points: points.len(),
        eulerian_win_fraction: (decided > 0).then(|| wins as f64 / decided as f64),
        ties,
        outcomes,
    })
}

/// Source position in frame 0 that the per-step chain pulls into `x` at
/// frame `t`.
fn pull_eulerian(seq: &MotionSequence, gains: &[f64], t: usize, x: (f64, f64)) -> (f64, f64) {
    let mut p = x;
    for s in (1..=t).rev() {
        p = pull_once(&seq.fields()[s - 1], gains[s - 1], p);
    }
    p
}

fn pull_once(field: &MotionField, gain: f64, x: (f64, f64)) -> (f64, f64) {
    let (u, v) = field.sample(x.0, x.1);
    let g = 1.0 + gain;
    (x.0 + g * u, x.1 + g * v)
}

fn mean_distance(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let sum: f64 = a.iter().zip(b).map(|(p, q)| (p.0 - q.0).hypot(p.1 - q.1)).sum();
    sum / a.len() as f64
}

fn masked_rmse(a: &FrameGrid, b: &FrameGrid, mask: &crate::grid::ValidityMask) -> f64 {
    let c = a.channels();
    let mut sum = 0.0;
    let mut n = 0usize;
    for y in 0..a.height() {
        for x in 0..a.width() {
            if mask.get(x, y) {
                for ch in 0..c {
                    let d = a.get(x, y, ch) as f64 - b.get(x, y, ch) as f64;
                    sum += d * d;
                    n += 1;
                }
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Final chain frames of one seed, for inspection.
pub fn chain_frames(bundle: &GroundTruthBundle, noise: &NoiseModel, refresh: Refresh) -> Result<Vec<FrameGrid>> {
    let seq = MotionSequence::new(MotionMode::Eulerian, bundle.bwd_flows.clone())?;
    autoregressive_chain(&bundle.frames[0], &seq, noise, refresh)
}
