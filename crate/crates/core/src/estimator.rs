//! Coarse-to-fine block-matching flow estimator and batched dyad estimation.
//!
//! Each pyramid level searches integer displacements around the upsampled
//! coarser estimate and picks the minimum sum of absolute differences over a
//! square patch (summed over channels). SAD ties go to the smallest
//! displacement magnitude, then to the lexicographically smallest `(u, v)`, so
//! the result never depends on evaluation order. At the finest level an
//! optional parabola fit through the neighbouring SAD values adds a sub-pixel
//! offset.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::error::{ensure_dims, Error, Result};
use crate::grid::{Direction, FrameGrid, MotionField};

/// Smallest pyramid level extent.
const MIN_LEVEL_EXTENT: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EstimatorParams {
    /// Pyramid depth, capped so the coarsest level stays at least 8x8.
    pub levels: usize,
    /// Patch radius in pixels (window is `2*patch+1` wide).
    pub patch: usize,
    /// Search radius per level in pixels.
    pub search: usize,
    pub subpixel_refine: bool,
    /// At the finest level, score each candidate by the best of all windows
    /// that still contain the pixel (offsets up to `patch`), which keeps
    /// windows from straddling motion boundaries.
    pub shiftable_windows: bool,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        Self {
            levels: 3,
            patch: 2,
            search: 3,
            subpixel_refine: true,
            shiftable_windows: true,
        }
    }
}

impl EstimatorParams {
    pub fn validated(self) -> Result<Self> {
        if self.levels == 0 || self.patch == 0 || self.search == 0 {
            return Err(Error::invalid(format!(
                "levels, patch and search must be >= 1 (got {}, {}, {})",
                self.levels, self.patch, self.search
            )));
        }
        Ok(self)
    }

    /// Levels actually used for a `width x height` input.
    pub fn effective_levels(&self, width: usize, height: usize) -> usize {
        let mut levels = 1;
        let (mut w, mut h) = (width, height);
        while levels < self.levels && w / 2 >= MIN_LEVEL_EXTENT && h / 2 >= MIN_LEVEL_EXTENT {
            w /= 2;
            h /= 2;
            levels += 1;
        }
        levels
    }
}

/// Planar copy of a grid used inside the matcher.
struct Level {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Level {
    fn from_grid(g: &FrameGrid) -> Self {
        Self {
            width: g.width(),
            height: g.height(),
            channels: g.channels(),
            data: g.data().to_vec(),
        }
    }

    /// 2x2 box filter; an odd trailing row/column is dropped.
    fn downsample(&self) -> Self {
        let (w, h, c) = (self.width / 2, self.height / 2, self.channels);
        let mut data = Vec::with_capacity(w * h * c);
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    let s = self.at(2 * x, 2 * y, ch)
                        + self.at(2 * x + 1, 2 * y, ch)
                        + self.at(2 * x, 2 * y + 1, ch)
                        + self.at(2 * x + 1, 2 * y + 1, ch);
                    data.push(s * 0.25);
                }
            }
        }
        Self {
            width: w,
            height: h,
            channels: c,
            data,
        }
    }

    #[inline]
    fn at(&self, x: usize, y: usize, ch: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + ch]
    }

    #[inline]
    fn at_clamped(&self, x: isize, y: isize, ch: usize) -> f32 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.at(x, y, ch)
    }
}

fn pyramid(g: &FrameGrid, levels: usize) -> Vec<Level> {
    let mut out = vec![Level::from_grid(g)];
    for _ in 1..levels {
        let next = out.last().expect("non-empty").downsample();
        out.push(next);
    }
    out
}

fn sad(a: &Level, b: &Level, x: usize, y: usize, dx: isize, dy: isize, r: isize) -> f64 {
    let mut s = 0.0f64;
    let (x, y) = (x as isize, y as isize);
    for j in -r..=r {
        for i in -r..=r {
            for ch in 0..a.channels {
                let va = a.at_clamped(x + i, y + j, ch);
                let vb = b.at_clamped(x + i + dx, y + j + dy, ch);
                s += (va - vb).abs() as f64;
            }
        }
    }
    s
}

/// Matching cost of displacement `d` at every pixel of `a`: the patch SAD of
/// radius `r`, or with `shiftable` the minimum over windows whose centers lie
/// within `r` of the pixel. Same values as [`sad`] / [`shifted_sad`] up to
/// summation order.
fn cost_image(a: &Level, b: &Level, d: (isize, isize), r: usize, shiftable: bool) -> Vec<f64> {
    let (w, h, c) = (a.width, a.height, a.channels);
    let pad = if shiftable { 2 * r } else { r };
    let (we, he) = (w + 2 * pad, h + 2 * pad);
    let ip = pad as isize;
    let mut diff = vec![0.0f64; we * he];
    for ye in 0..he {
        let y = ye as isize - ip;
        for xe in 0..we {
            let x = xe as isize - ip;
            let mut s = 0.0f64;
            for ch in 0..c {
                s += (a.at_clamped(x, y, ch) - b.at_clamped(x + d.0, y + d.1, ch)).abs() as f64;
            }
            diff[ye * we + xe] = s;
        }
    }
    let k = 2 * r + 1;
    // window sums for centers in [r, we - r) x [r, he - r), stored at the
    // window's top-left corner
    let (ws, hs) = (we - 2 * r, he - 2 * r);
    let mut rows = vec![0.0f64; he * ws];
    for ye in 0..he {
        for xs in 0..ws {
            rows[ye * ws + xs] = diff[ye * we + xs..ye * we + xs + k].iter().sum();
        }
    }
    let mut sums = vec![0.0f64; hs * ws];
    for ys in 0..hs {
        for xs in 0..ws {
            sums[ys * ws + xs] = (ys..ys + k).map(|yy| rows[yy * ws + xs]).sum();
        }
    }
    if !shiftable {
        return sums;
    }
    // pixel (x, y) has window center (x + pad, y + pad) in padded
    // coordinates, i.e. index (x + r, y + r) in `sums`; take the minimum over
    // the k x k neighbourhood of centers
    let mut rowmin = vec![0.0f64; hs * w];
    for ys in 0..hs {
        for x in 0..w {
            rowmin[ys * w + x] = sums[ys * ws + x..ys * ws + x + k]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
        }
    }
    let mut out = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = (y..y + k).map(|yy| rowmin[yy * w + x]).fold(f64::INFINITY, f64::min);
        }
    }
    out
}

/// Reusable buffers for [`shifted_sad`].
struct Scratch {
    diff: Vec<f64>,
    rows: Vec<f64>,
}

impl Scratch {
    fn new(r: usize) -> Self {
        let n = 4 * r + 1;
        Self {
            diff: vec![0.0; n * n],
            rows: vec![0.0; n * (2 * r + 1)],
        }
    }
}

/// Minimum SAD over the `(2r+1)²` windows of radius `r` whose centers lie
/// within `r` of `(x, y)`.
#[allow(clippy::too_many_arguments)]
fn shifted_sad(a: &Level, b: &Level, x: usize, y: usize, dx: isize, dy: isize, r: isize, scratch: &mut Scratch) -> f64 {
    let n = (4 * r + 1) as usize;
    let k = (2 * r + 1) as usize;
    let (x, y) = (x as isize, y as isize);
    let c = a.channels;
    let reach = 2 * r;
    let interior = x - reach >= 0
        && y - reach >= 0
        && x + reach < a.width as isize
        && y + reach < a.height as isize
        && x + dx - reach >= 0
        && y + dy - reach >= 0
        && x + dx + reach < b.width as isize
        && y + dy + reach < b.height as isize;
    if interior {
        let row_len = n * c;
        for j in 0..n {
            let ya = (y - reach + j as isize) as usize;
            let yb = (ya as isize + dy) as usize;
            let sa = (ya * a.width + (x - reach) as usize) * c;
            let sb = (yb * b.width + (x + dx - reach) as usize) * c;
            let ra = &a.data[sa..sa + row_len];
            let rb = &b.data[sb..sb + row_len];
            for i in 0..n {
                let mut s = 0.0f64;
                for ch in 0..c {
                    s += (ra[i * c + ch] - rb[i * c + ch]).abs() as f64;
                }
                scratch.diff[j * n + i] = s;
            }
        }
    } else {
        for j in 0..n {
            for i in 0..n {
                let (ox, oy) = (i as isize - reach, j as isize - reach);
                let mut s = 0.0f64;
                for ch in 0..c {
                    let va = a.at_clamped(x + ox, y + oy, ch);
                    let vb = b.at_clamped(x + ox + dx, y + oy + dy, ch);
                    s += (va - vb).abs() as f64;
                }
                scratch.diff[j * n + i] = s;
            }
        }
    }
    // horizontal window sums: rows[j][i] = sum of diff[j][i..i+k]
    for j in 0..n {
        for i in 0..k {
            scratch.rows[j * k + i] = scratch.diff[j * n + i..j * n + i + k].iter().sum();
        }
    }
    let mut best = f64::INFINITY;
    for j in 0..k {
        for i in 0..k {
            let s: f64 = (j..j + k).map(|jj| scratch.rows[jj * k + i]).sum();
            best = best.min(s);
        }
    }
    best
}

/// Key for the total order used to pick the best candidate.
#[inline]
fn better(sad: f64, d: (isize, isize), best_sad: f64, best: (isize, isize)) -> bool {
    if sad != best_sad {
        return sad < best_sad;
    }
    let m = d.0 * d.0 + d.1 * d.1;
    let bm = best.0 * best.0 + best.1 * best.1;
    if m != bm {
        return m < bm;
    }
    d < best
}

/// Component-wise 3x3 median of an integer flow (clamped borders); removes
/// isolated coarse-level mismatches before they seed the finer search.
fn median3(flow: &[(isize, isize)], w: usize, h: usize) -> Vec<(isize, isize)> {
    let mut out = Vec::with_capacity(flow.len());
    let mut us = [0isize; 9];
    let mut vs = [0isize; 9];
    for y in 0..h {
        for x in 0..w {
            let mut k = 0;
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let sx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                    (us[k], vs[k]) = flow[sy * w + sx];
                    k += 1;
                }
            }
            us.sort_unstable();
            vs.sort_unstable();
            out.push((us[4], vs[4]));
        }
    }
    out
}

fn parabola_offset(minus: f64, center: f64, plus: f64) -> f64 {
    let denom = minus - 2.0 * center + plus;
    if denom <= 0.0 {
        return 0.0;
    }
    ((minus - plus) / (2.0 * denom)).clamp(-0.5, 0.5)
}

/// Estimates the flow `f` with `b(x + f(x)) ≈ a(x)`, i.e. the forward field
/// from `a` to `b`. The result is tagged `Forward, 0 -> 1`; use
/// [`MotionField::with_frames`] to relabel it.
/// Integer flow of one pyramid level: width, height, row-major vectors.
type IntFlow = (usize, usize, Vec<(isize, isize)>);

pub fn estimate_flow(a: &FrameGrid, b: &FrameGrid, params: &EstimatorParams) -> Result<MotionField> {
    ensure_dims(a.dims(), b.dims())?;
    if a.channels() != b.channels() {
        return Err(Error::invalid("channel count mismatch"));
    }
    let params = params.validated()?;
    let levels = params.effective_levels(a.width(), a.height());
    let pa = pyramid(a, levels);
    let pb = pyramid(b, levels);
    let r = params.patch as isize;
    let s = params.search as isize;
    let mut scratch = Scratch::new(params.patch);
    let mut cost_at = |la: &Level, lb: &Level, x, y, dx, dy| {
        if params.shiftable_windows {
            shifted_sad(la, lb, x, y, dx, dy, r, &mut scratch)
        } else {
            sad(la, lb, x, y, dx, dy, r)
        }
    };

    // integer flow of the previous (coarser) level
    let mut prev: Option<IntFlow> = None;
    let mut fine_sad: Vec<f64> = Vec::new();
    for level in (0..levels).rev() {
        let (la, lb) = (&pa[level], &pb[level]);
        let (w, h) = (la.width, la.height);
        // Search windows are centered on the upsampled coarse vector of the
        // parent pixel and of its 8 neighbours, so an isolated coarse error
        // does not trap its children.
        let seeds: Vec<Vec<(isize, isize)>> = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| match &prev {
                None => vec![(0, 0)],
                Some((pw, ph, pf)) => {
                    let (px, py) = ((x / 2).min(pw - 1) as isize, (y / 2).min(ph - 1) as isize);
                    let mut out: Vec<(isize, isize)> = Vec::with_capacity(9);
                    for ny in (py - 1).max(0)..=(py + 1).min(*ph as isize - 1) {
                        for nx in (px - 1).max(0)..=(px + 1).min(*pw as isize - 1) {
                            let (u, v) = pf[ny as usize * pw + nx as usize];
                            if !out.contains(&(2 * u, 2 * v)) {
                                out.push((2 * u, 2 * v));
                            }
                        }
                    }
                    out
                }
            })
            .collect();
        let mut candidates = BTreeSet::new();
        for c in seeds.iter().flatten() {
            for dy in -s..=s {
                for dx in -s..=s {
                    candidates.insert((c.0 + dx, c.1 + dy));
                }
            }
        }
        let mut best: Vec<(isize, isize)> = seeds.iter().map(|c| c[0]).collect();
        let mut best_sad = vec![f64::INFINITY; w * h];
        for &d in &candidates {
            let costs = cost_image(la, lb, d, params.patch, params.shiftable_windows && level == 0);
            for i in 0..w * h {
                if seeds[i]
                    .iter()
                    .any(|c| (d.0 - c.0).abs() <= s && (d.1 - c.1).abs() <= s)
                    && better(costs[i], d, best_sad[i], best[i])
                {
                    best_sad[i] = costs[i];
                    best[i] = d;
                }
            }
        }
        if level == 0 {
            fine_sad = best_sad;
        } else {
            best = median3(&best, w, h);
        }
        prev = Some((w, h, best));
    }

    let (w, h, flow) = prev.expect("at least one level");
    let fine = &pa[0];
    let coarse_b = &pb[0];
    MotionField::from_fn(w, h, Direction::Forward, 0, 1, |x, y| {
        let i = y * w + x;
        let (dx, dy) = flow[i];
        let (mut u, mut v) = (dx as f64, dy as f64);
        // an exact match leaves nothing to refine
        if params.subpixel_refine && fine_sad[i] > 0.0 {
            let c = fine_sad[i];
            let mut cost = |ddx, ddy| cost_at(fine, coarse_b, x, y, dx + ddx, dy + ddy);
            let (l, rt) = (cost(-1, 0), cost(1, 0));
            let (up, down) = (cost(0, -1), cost(0, 1));
            u += parabola_offset(l, c, rt);
            v += parabola_offset(up, c, down);
        }
        (u, v)
    })
}

/// Ordered temporal frame pairs `(a, b)`: estimate the flow from frame `a` to
/// frame `b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DyadBatch {
    pub direction: Direction,
    pub pairs: Vec<(usize, usize)>,
}

/// `[(t, t+1)]` and `[(t+1, t)]` for `t` in `0..=T-2`.
pub fn build_dyads(frame_count: usize) -> Result<(DyadBatch, DyadBatch)> {
    if frame_count < 2 {
        return Err(Error::invalid(format!("need at least 2 frames, got {frame_count}")));
    }
    let fwd = (0..frame_count - 1).map(|t| (t, t + 1)).collect();
    let bwd = (0..frame_count - 1).map(|t| (t + 1, t)).collect();
    Ok((
        DyadBatch {
            direction: Direction::Forward,
            pairs: fwd,
        },
        DyadBatch {
            direction: Direction::Backward,
            pairs: bwd,
        },
    ))
}

/// Forward and backward flows of every adjacent pair, estimated as
/// independent tasks on `workers` threads. Output order follows the dyad
/// index and is identical for every worker count.
pub fn estimate_batched(
    frames: &[FrameGrid],
    params: &EstimatorParams,
    workers: usize,
) -> Result<(Vec<MotionField>, Vec<MotionField>)> {
    let (fwd, bwd) = build_dyads(frames.len())?;
    if workers == 0 {
        return Err(Error::invalid("worker count must be >= 1"));
    }
    let params = params.validated()?;
    for f in &frames[1..] {
        ensure_dims(frames[0].dims(), f.dims())?;
        if f.channels() != frames[0].channels() {
            return Err(Error::invalid("frames differ in channel count"));
        }
    }
    let tasks: Vec<(Direction, usize, usize)> = fwd
        .pairs
        .iter()
        .map(|&(a, b)| (fwd.direction, a, b))
        .chain(bwd.pairs.iter().map(|&(a, b)| (bwd.direction, a, b)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let mut fields = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(dir, a, b)| estimate_flow(&frames[a], &frames[b], &params).map(|f| f.with_frames(dir, a, b)))
            .collect::<Result<Vec<_>>>()
    })?;
    let backward = fields.split_off(fwd.pairs.len());
    Ok((fields, backward))
}
