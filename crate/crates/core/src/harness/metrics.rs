//! Warping error and the threshold sensitivity sweep.

use rand_distr::{Distribution, Normal};

use super::noise::{NoiseModel, FLOW_STREAM};
use crate::consistency::{geometric_loss, occlusion_mask, BgcParams};
use crate::error::{Error, Result};
use crate::estimator::{estimate_batched, EstimatorParams};
use crate::grid::{warp_backward, FrameGrid, MotionField};
use crate::synth::{render, SceneSpec};

/// Flow-aligned photometric error between consecutive frames.
///
/// Estimates forward and backward flows for every adjacent pair, then
/// averages `|W(I_{t+1}, f_{t->t+1})(x) - I_t(x)|²` (summed over channels) over
/// every `t` and every pixel kept by the default cycle-consistency mask.
/// Returns 0 when no pixel survives.
pub fn warping_error(frames: &[FrameGrid], params: &EstimatorParams) -> Result<f64> {
    let (fwd, bwd) = estimate_batched(frames, params, 1)?;
    warping_error_with(frames, &fwd, &bwd, &BgcParams::default())
}

/// [`warping_error`] over given flows.
pub fn warping_error_with(
    frames: &[FrameGrid],
    fwd: &[MotionField],
    bwd: &[MotionField],
    bgc: &BgcParams,
) -> Result<f64> {
    if frames.len() < 2 {
        return Err(Error::invalid("need at least 2 frames"));
    }
    if fwd.len() != frames.len() - 1 || bwd.len() != fwd.len() {
        return Err(Error::invalid(
            "need one forward and one backward field per adjacent pair",
        ));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for t in 0..fwd.len() {
        let mask = occlusion_mask(&fwd[t], &bwd[t], bgc)?;
        let (warped, _) = warp_backward(&frames[t + 1], &fwd[t])?;
        let c = frames[t].channels();
        for y in 0..mask.height() {
            for x in 0..mask.width() {
                if !mask.get(x, y) {
                    continue;
                }
                let sq: f64 = (0..c)
                    .map(|ch| (warped.get(x, y, ch) as f64 - frames[t].get(x, y, ch) as f64).powi(2))
                    .sum();
                sum += sq;
                count += 1;
            }
        }
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

/// Where the sweep's flows come from.
#[derive(Clone, Debug, PartialEq)]
pub enum FlowSource {
    Analytic,
    /// Analytic flows plus i.i.d. Gaussian per-component noise of std-dev
    /// `sigma` px.
    Noisy {
        sigma: f64,
        seed: u64,
    },
    Estimated(EstimatorParams),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub alpha1: f64,
    pub alpha2: f64,
    /// IoU of estimated and analytic occluded sets, pooled over all pairs.
    pub iou: f64,
    /// Mean of the masked loss over pairs.
    pub loss: f64,
    pub valid_fraction: f64,
}

/// Grids of the reference sensitivity table.
pub const SWEEP_ALPHA1: [f64; 3] = [0.005, 0.01, 0.05];
pub const SWEEP_ALPHA2: [f64; 3] = [0.1, 0.5, 1.0];

/// Scores every `(alpha1, alpha2)` pair on `frames` frames of `spec`. Rows
/// are ordered by `alpha1`, then `alpha2`, as given.
pub fn sensitivity_sweep(
    alpha1: &[f64],
    alpha2: &[f64],
    spec: &SceneSpec,
    frames: usize,
    source: &FlowSource,
) -> Result<Vec<SweepRow>> {
    if alpha1.is_empty() || alpha2.is_empty() {
        return Err(Error::invalid("alpha grids must be non-empty"));
    }
    let bundle = render(spec, frames)?;
    let (fwd, bwd) = match source {
        FlowSource::Analytic => (bundle.fwd_flows.clone(), bundle.bwd_flows.clone()),
        FlowSource::Noisy { sigma, seed } => {
            let noise = NoiseModel {
                seed: *seed,
                ..NoiseModel::default()
            };
            let dist = Normal::new(0.0, *sigma).map_err(|e| Error::invalid(e.to_string()))?;
            let mut rng = noise.rng(FLOW_STREAM);
            let mut perturb = |f: &MotionField| {
                MotionField::from_fn(
                    f.width(),
                    f.height(),
                    f.direction(),
                    f.src_frame(),
                    f.dst_frame(),
                    |x, y| {
                        let (u, v) = f.get(x, y);
                        (u as f64 + dist.sample(&mut rng), v as f64 + dist.sample(&mut rng))
                    },
                )
            };
            let fwd = bundle.fwd_flows.iter().map(&mut perturb).collect::<Result<Vec<_>>>()?;
            let bwd = bundle.bwd_flows.iter().map(&mut perturb).collect::<Result<Vec<_>>>()?;
            (fwd, bwd)
        }
        FlowSource::Estimated(params) => estimate_batched(&bundle.frames, params, rayon::current_num_threads())?,
    };

    let mut rows = Vec::with_capacity(alpha1.len() * alpha2.len());
    for &a1 in alpha1 {
        for &a2 in alpha2 {
            let params = BgcParams::new(a1, a2)?;
            let (mut inter, mut union) = (0usize, 0usize);
            let (mut loss, mut valid) = (0.0, 0.0);
            for t in 0..fwd.len() {
                let mask = occlusion_mask(&fwd[t], &bwd[t], &params)?;
                let (i, u) = mask.occluded_overlap(&bundle.occlusion[t])?;
                inter += i;
                union += u;
                loss += geometric_loss(&bundle.frames[t + 1], &bundle.frames[t], &fwd[t], &mask, &params)?;
                valid += mask.valid_fraction();
            }
            let n = fwd.len() as f64;
            rows.push(SweepRow {
                alpha1: a1,
                alpha2: a2,
                iou: if union == 0 { 1.0 } else { inter as f64 / union as f64 },
                loss: loss / n,
                valid_fraction: valid / n,
            });
        }
    }
    Ok(rows)
}

/// Estimation error of adjacent versus directly estimated long-range flows.
#[derive(Clone, Debug, PartialEq)]
pub struct PremiseRow {
    pub t: usize,
    /// Mean endpoint error of estimated `f_{t-1->t}` over its analytic
    /// valid set, px.
    pub adjacent_epe: f64,
    /// Mean endpoint error of `u_{0->t}` estimated directly from frames 0 and
    /// `t`, over the reference valid set, px.
    pub direct_epe: f64,
    /// Mean analytic `|u_{0->t}|`, px.
    pub reference_magnitude: f64,
}

/// Compares per-step estimation with direct long-baseline estimation on the
/// rendered scene, for `t in 1..frames`.
pub fn premise_study(spec: &SceneSpec, frames: usize, params: &EstimatorParams) -> Result<Vec<PremiseRow>> {
    let bundle = render(spec, frames)?;
    let (fwd, _) = estimate_batched(&bundle.frames, params, rayon::current_num_threads())?;
    let mut rows = Vec::with_capacity(frames - 1);
    for t in 1..frames {
        let adjacent_epe = fwd[t - 1]
            .mean_endpoint_error(&bundle.fwd_flows[t - 1], Some(&bundle.occlusion[t - 1]))?
            .unwrap_or(0.0);
        let direct = crate::estimator::estimate_flow(&bundle.frames[0], &bundle.frames[t], params)?;
        let truth = &bundle.cum_flows[t - 1];
        let mask = &bundle.reference_valid[t];
        let direct_epe = direct.mean_endpoint_error(truth, Some(mask))?.unwrap_or(0.0);
        let mut mag = 0.0;
        let mut n = 0usize;
        for y in 0..truth.height() {
            for x in 0..truth.width() {
                if mask.get(x, y) {
                    mag += truth.magnitude_sq(x, y).sqrt();
                    n += 1;
                }
            }
        }
        rows.push(PremiseRow {
            t,
            adjacent_epe,
            direct_epe,
            reference_magnitude: if n == 0 { 0.0 } else { mag / n as f64 },
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{panning_rectangle, static_scene, translating_rectangle};

    #[test]
    fn long_baselines_outrun_the_search_window() {
        let rows = premise_study(&translating_rectangle(), 14, &EstimatorParams::default()).unwrap();
        let max_adjacent = rows.iter().map(|r| r.adjacent_epe).fold(0.0, f64::max);
        assert!(max_adjacent < 0.5, "{max_adjacent}");
        // |u| = 2t exceeds the total pyramid reach (search 3 over 3 levels) late
        let last = rows.last().unwrap();
        assert!(last.direct_epe > 4.0 * max_adjacent.max(0.05), "{last:?}");
    }

    #[test]
    fn constant_sequence_has_zero_warping_error() {
        let f = FrameGrid::filled(16, 16, 1, 0.4).unwrap();
        let e = warping_error(&[f.clone(), f.clone(), f], &EstimatorParams::default()).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn integer_translation_is_nearly_exact() {
        let b = render(&translating_rectangle(), 4).unwrap();
        let e = warping_error_with(&b.frames, &b.fwd_flows, &b.bwd_flows, &BgcParams::default()).unwrap();
        assert!(e < 1e-4, "{e}");
    }

    #[test]
    fn analytic_flows_with_zero_floor_recover_occlusion_exactly() {
        let rows = sensitivity_sweep(&[0.01], &[0.0], &panning_rectangle(), 6, &FlowSource::Analytic).unwrap();
        assert_eq!(rows[0].iou, 1.0);
    }

    #[test]
    fn sweep_rows_follow_grid_order() {
        let rows = sensitivity_sweep(
            &SWEEP_ALPHA1,
            &SWEEP_ALPHA2,
            &static_scene(16, 16),
            3,
            &FlowSource::Analytic,
        )
        .unwrap();
        let keys: Vec<(f64, f64)> = rows.iter().map(|r| (r.alpha1, r.alpha2)).collect();
        assert_eq!(keys.len(), 9);
        assert_eq!(keys[4], (0.01, 0.5));
        assert!(rows.iter().all(|r| r.iou == 1.0 && r.valid_fraction == 1.0));
        assert!(sensitivity_sweep(&[], &[0.5], &static_scene(16, 16), 3, &FlowSource::Analytic).is_err());
    }
}
