//! Forward-backward cycle energy, the dynamic occlusion mask built on it, and
//! the mask-gated reconstruction loss.

use crate::error::{ensure_dims, Error, Result};
use crate::grid::{in_domain, warp_backward, Direction, FrameGrid, MotionField, ValidityMask};

/// Thresholds and weights of the bidirectional consistency check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BgcParams {
    /// Weight of the motion-dependent threshold term.
    pub alpha1: f64,
    /// Static threshold floor in px².
    pub alpha2: f64,
    /// Guard added to the valid-pixel count in the loss denominator.
    pub epsilon: f64,
    /// Loss weight; carried into reports only.
    pub lambda_geo: f64,
}

impl Default for BgcParams {
    fn default() -> Self {
        Self {
            alpha1: 0.01,
            alpha2: 0.5,
            epsilon: 1e-6,
            lambda_geo: 1.0,
        }
    }
}

impl BgcParams {
    pub fn new(alpha1: f64, alpha2: f64) -> Result<Self> {
        Self {
            alpha1,
            alpha2,
            ..Self::default()
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.alpha1.is_nan() || self.alpha2.is_nan() || self.alpha1 < 0.0 || self.alpha2 < 0.0 {
            return Err(Error::invalid(format!(
                "alpha1 and alpha2 must be >= 0 (got {}, {})",
                self.alpha1, self.alpha2
            )));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive and finite"));
        }
        Ok(self)
    }
}

/// Per-pixel squared cycle residual in px².
#[derive(Clone, Debug, PartialEq)]
pub struct CycleEnergyGrid {
    width: usize,
    height: usize,
    energy: Vec<f64>,
}

impl CycleEnergyGrid {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn energy(&self) -> &[f64] {
        &self.energy
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.energy[y * self.width + x]
    }

    pub fn max(&self) -> f64 {
        self.energy.iter().copied().fold(0.0, f64::max)
    }
}

fn check_pair(fwd: &MotionField, bwd: &MotionField) -> Result<()> {
    ensure_dims(fwd.dims(), bwd.dims())?;
    if fwd.direction() != Direction::Forward || bwd.direction() != Direction::Backward {
        return Err(Error::invalid("expected a forward field and a backward field"));
    }
    if fwd.src_frame() != bwd.dst_frame() || fwd.dst_frame() != bwd.src_frame() {
        return Err(Error::invalid(format!(
            "frame pair mismatch: forward {}->{}, backward {}->{}",
            fwd.src_frame(),
            fwd.dst_frame(),
            bwd.src_frame(),
            bwd.dst_frame()
        )));
    }
    Ok(())
}

/// Per-pixel quantities of one forward-backward cycle.
struct Cycle {
    energy: f64,
    fwd_sq: f64,
    bwd_sq: f64,
    in_domain: bool,
}

fn walk_cycle(fwd: &MotionField, bwd: &MotionField, mut visit: impl FnMut(Cycle)) {
    let (w, h) = fwd.dims();
    for y in 0..h {
        for x in 0..w {
            let (fu, fv) = fwd.get(x, y);
            let (fu, fv) = (fu as f64, fv as f64);
            let tx = x as f64 + fu;
            let ty = y as f64 + fv;
            let (bu, bv) = bwd.sample(tx, ty);
            visit(Cycle {
                energy: (fu + bu).powi(2) + (fv + bv).powi(2),
                fwd_sq: fu * fu + fv * fv,
                bwd_sq: bu * bu + bv * bv,
                in_domain: in_domain(w, h, tx, ty),
            });
        }
    }
}

/// `E(x) = |f(x) + b(x + f(x))|²`, with `b` sampled bilinearly at the forward
/// target.
pub fn cycle_energy(fwd: &MotionField, bwd: &MotionField) -> Result<CycleEnergyGrid> {
    check_pair(fwd, bwd)?;
    let mut energy = Vec::with_capacity(fwd.u().len());
    walk_cycle(fwd, bwd, |c| energy.push(c.energy));
    Ok(CycleEnergyGrid {
        width: fwd.width(),
        height: fwd.height(),
        energy,
    })
}

/// Dynamic occlusion mask: a pixel is valid iff
/// `E < alpha1 * (|f|² + |b(x+f)|²) + alpha2` and its forward target stays in
/// the domain.
pub fn occlusion_mask(fwd: &MotionField, bwd: &MotionField, params: &BgcParams) -> Result<ValidityMask> {
    check_pair(fwd, bwd)?;
    let params = params.validated()?;
    let mut bits = Vec::with_capacity(fwd.u().len());
    walk_cycle(fwd, bwd, |c| {
        let threshold = params.alpha1 * (c.fwd_sq + c.bwd_sq) + params.alpha2;
        bits.push(c.in_domain && c.energy < threshold);
    });
    ValidityMask::new(fwd.width(), fwd.height(), bits)
}

/// Forward-only magnitude mask: valid iff `|f|² < alpha2` and the target is in
/// the domain.
///
/// This is [`occlusion_mask`] with a zero backward field and `alpha1 = 0`, so
/// the cycle energy degenerates to the forward magnitude.
pub fn forward_only_mask(fwd: &MotionField, alpha2: f64) -> Result<ValidityMask> {
    if fwd.direction() != Direction::Forward {
        return Err(Error::invalid("expected a forward field"));
    }
    let zero = MotionField::zeros(
        fwd.width(),
        fwd.height(),
        Direction::Backward,
        fwd.dst_frame(),
        fwd.src_frame(),
    )?;
    let params = BgcParams {
        alpha1: 0.0,
        alpha2,
        ..BgcParams::default()
    };
    occlusion_mask(fwd, &zero, &params)
}

/// Mask-gated L1 reconstruction loss.
///
/// `source` is backward-warped by `flow` and compared with `target`:
/// `L = Σ M(x) |W(source, flow)(x) - target(x)|₁ / (Σ M(x) + ε)`. Channel
/// residuals are summed. Pixels with `M = 0` are skipped entirely, and the sum
/// runs sequentially in row-major order.
///
/// With the backward-warping operator the natural pairing for a forward field
/// `f_{t->t+1}` is `source = frame t+1`, `target = frame t`, and the mask from
/// [`occlusion_mask`] lives on frame `t`.
pub fn geometric_loss(
    source: &FrameGrid,
    target: &FrameGrid,
    flow: &MotionField,
    mask: &ValidityMask,
    params: &BgcParams,
) -> Result<f64> {
    ensure_dims(source.dims(), target.dims())?;
    ensure_dims(source.dims(), flow.dims())?;
    ensure_dims(source.dims(), mask.dims())?;
    if source.channels() != target.channels() {
        return Err(Error::invalid("channel count mismatch"));
    }
    let params = params.validated()?;
    let (w, h, c) = (source.width(), source.height(), source.channels());
    let mut total = 0.0f64;
    let mut count = 0usize;
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let (u, v) = flow.get(x, y);
            let sx = x as f64 + u as f64;
            let sy = y as f64 + v as f64;
            let mut residual = 0.0;
            for ch in 0..c {
                let warped = crate::grid::bilinear(source.data(), c, ch, w, h, sx, sy);
                residual += (warped - target.get(x, y, ch) as f64).abs();
            }
            total += residual;
            count += 1;
        }
    }
    Ok(total / (count as f64 + params.epsilon))
}

/// Splits the domain into valid and occluded pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionPartition {
    pub valid_fraction: f64,
    /// Occluded `(x, y)` coordinates in row-major order.
    pub occluded: Vec<(usize, usize)>,
}

pub fn masked_region_partition(mask: &ValidityMask) -> RegionPartition {
    let mut occluded = Vec::new();
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if !mask.get(x, y) {
                occluded.push((x, y));
            }
        }
    }
    RegionPartition {
        valid_fraction: mask.valid_fraction(),
        occluded,
    }
}

/// Convenience: warp `source` with `flow` and report the L1 residual image
/// (summed over channels, clamped to `[0, 1]`).
pub fn residual_image(source: &FrameGrid, target: &FrameGrid, flow: &MotionField) -> Result<FrameGrid> {
    ensure_dims(source.dims(), target.dims())?;
    let (warped, _) = warp_backward(source, flow)?;
    let c = source.channels();
    FrameGrid::from_fn(source.width(), source.height(), 1, |x, y, _| {
        (0..c)
            .map(|ch| (warped.get(x, y, ch) as f64 - target.get(x, y, ch) as f64).abs())
            .sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(fwd: (f32, f32), bwd: (f32, f32)) -> (MotionField, MotionField) {
        (
            MotionField::uniform(10, 8, fwd, Direction::Forward, 3, 4).unwrap(),
            MotionField::uniform(10, 8, bwd, Direction::Backward, 4, 3).unwrap(),
        )
    }

    fn interior(mask: &ValidityMask, margin: usize) -> Vec<bool> {
        let mut out = Vec::new();
        for y in margin..mask.height() - margin {
            for x in margin..mask.width() - margin {
                out.push(mask.get(x, y));
            }
        }
        out
    }

    #[test]
    fn exact_inverse_has_zero_energy() {
        let (f, b) = pair((1.0, 0.0), (-1.0, 0.0));
        let e = cycle_energy(&f, &b).unwrap();
        assert!(e.energy().iter().all(|&v| v == 0.0));
        let m = occlusion_mask(&f, &b, &BgcParams::default()).unwrap();
        assert!(interior(&m, 1).into_iter().all(|b| b));
        // the last column maps outside and is forced off
        assert!(!m.get(9, 0));
    }

    #[test]
    fn one_sided_motion_has_unit_energy_and_is_masked() {
        let (f, b) = pair((1.0, 0.0), (0.0, 0.0));
        let e = cycle_energy(&f, &b).unwrap();
        assert!(e.energy().iter().all(|&v| v == 1.0));
        // 1 >= 0.01 * 1 + 0.5
        let m = occlusion_mask(&f, &b, &BgcParams::default()).unwrap();
        assert_eq!(m.valid_count(), 0);
    }

    #[test]
    fn huge_floor_accepts_every_in_domain_pixel() {
        let (f, b) = pair((1.0, 0.0), (3.0, 2.0));
        let params = BgcParams::new(0.0, 1e12).unwrap();
        let m = occlusion_mask(&f, &b, &params).unwrap();
        for y in 0..8 {
            for x in 0..10 {
                assert_eq!(m.get(x, y), x < 9);
            }
        }
    }

    #[test]
    fn rejects_bad_pairs() {
        let (f, _) = pair((1.0, 0.0), (0.0, 0.0));
        let wrong_dir = MotionField::zeros(10, 8, Direction::Forward, 4, 3).unwrap();
        assert!(cycle_energy(&f, &wrong_dir).is_err());
        let wrong_frames = MotionField::zeros(10, 8, Direction::Backward, 5, 4).unwrap();
        assert!(cycle_energy(&f, &wrong_frames).is_err());
        let wrong_dims = MotionField::zeros(9, 8, Direction::Backward, 4, 3).unwrap();
        assert!(matches!(
            cycle_energy(&f, &wrong_dims),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(BgcParams::new(-0.1, 0.5).is_err());
        assert!(BgcParams {
            epsilon: 0.0,
            ..BgcParams::default()
        }
        .validated()
        .is_err());
    }

    #[test]
    fn forward_only_is_the_degenerate_configuration() {
        let f = MotionField::from_fn(12, 9, Direction::Forward, 0, 1, |x, y| {
            ((x as f64 - 6.0) * 0.2, (y as f64 - 4.0) * 0.15)
        })
        .unwrap();
        let m = forward_only_mask(&f, 0.5).unwrap();
        for y in 0..9 {
            for x in 0..12 {
                let (u, v) = f.get(x, y);
                let tx = x as f64 + u as f64;
                let ty = y as f64 + v as f64;
                let expected = f.magnitude_sq(x, y) < 0.5 && in_domain(12, 9, tx, ty);
                assert_eq!(m.get(x, y), expected, "({x},{y})");
            }
        }
    }

    #[test]
    fn loss_of_exact_reconstruction() {
        let src = FrameGrid::from_fn(6, 6, 2, |x, y, c| ((x * 7 + y * 3 + c) % 11) as f64 / 10.0).unwrap();
        let flow = MotionField::uniform(6, 6, (1.0, -1.0), Direction::Forward, 0, 1).unwrap();
        let (target, _) = warp_backward(&src, &flow).unwrap();
        let mask = ValidityMask::filled(6, 6, true).unwrap();
        assert_eq!(
            geometric_loss(&src, &target, &flow, &mask, &BgcParams::default()).unwrap(),
            0.0
        );

        let frac = MotionField::from_fn(6, 6, Direction::Forward, 0, 1, |x, y| {
            (0.3 * x as f64 - 0.7, 0.45 - 0.1 * y as f64)
        })
        .unwrap();
        let (target, _) = warp_backward(&src, &frac).unwrap();
        let l = geometric_loss(&src, &target, &frac, &mask, &BgcParams::default()).unwrap();
        // only the f32 rounding of the stored target remains
        assert!(l < 1e-6, "{l}");
    }

    #[test]
    fn empty_mask_gives_zero_loss() {
        let a = FrameGrid::filled(5, 5, 1, 0.0).unwrap();
        let b = FrameGrid::filled(5, 5, 1, 1.0).unwrap();
        let f = MotionField::zeros(5, 5, Direction::Forward, 0, 1).unwrap();
        let m = ValidityMask::filled(5, 5, false).unwrap();
        let l = geometric_loss(&a, &b, &f, &m, &BgcParams::default()).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn partition_extremes() {
        let ones = ValidityMask::filled(3, 2, true).unwrap();
        let p = masked_region_partition(&ones);
        assert_eq!(p.valid_fraction, 1.0);
        assert!(p.occluded.is_empty());

        let zeros = ValidityMask::filled(3, 2, false).unwrap();
        let p = masked_region_partition(&zeros);
        assert_eq!(p.valid_fraction, 0.0);
        assert_eq!(p.occluded, vec![(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (2, 1)]);
    }
}
