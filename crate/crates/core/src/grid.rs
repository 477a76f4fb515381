//! Dense grids, sub-pixel sampling, backward warping and flow composition.
//!
//! Pixel centers sit on integer coordinates: `(0, 0)` is the center of the
//! top-left pixel and the sampling domain is `[0, w-1] x [0, h-1]`. Samples
//! outside the domain are clamped to the border; callers that need to know
//! about it get a [`ValidityMask`] back.
//!
//! Grids are stored in `f32`, all interpolation and accumulation runs in `f64`.

use crate::error::{ensure_dims, Error, Result};

/// Dense `width x height x channels` grid of values in `[0, 1]`, row-major,
/// channels interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameGrid {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl FrameGrid {
    /// Builds a grid from raw data. Values are clamped into `[0, 1]`; non-finite
    /// values are rejected.
    pub fn new(width: usize, height: usize, channels: usize, mut data: Vec<f32>) -> Result<Self> {
        check_extent(width, height)?;
        if !(1..=4).contains(&channels) {
            return Err(Error::invalid(format!("channel count {channels} not in 1..=4")));
        }
        if data.len() != width * height * channels {
            return Err(Error::invalid(format!(
                "grid data length {} != {width}x{height}x{channels}",
                data.len()
            )));
        }
        for v in &mut data {
            if !v.is_finite() {
                return Err(Error::invalid("non-finite grid value"));
            }
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Evaluates `f(x, y, channel)` at every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c) as f32);
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, channel: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + channel]
    }

    /// Applies `f` to every sample, clamping the result back into `[0, 1]`.
    pub fn map(&self, mut f: impl FnMut(f32) -> f32) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.channels,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }
}

/// Whether a field stores `t -> t+1` or `t+1 -> t` displacements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

/// Dense per-pixel displacement field in pixels.
///
/// `src_frame` is the frame whose pixel grid the field lives on and
/// `dst_frame` the frame the displacements point into.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionField {
    width: usize,
    height: usize,
    u: Vec<f32>,
    v: Vec<f32>,
    direction: Direction,
    src_frame: usize,
    dst_frame: usize,
}

impl MotionField {
    pub fn new(
        width: usize,
        height: usize,
        u: Vec<f32>,
        v: Vec<f32>,
        direction: Direction,
        src_frame: usize,
        dst_frame: usize,
    ) -> Result<Self> {
        check_extent(width, height)?;
        if u.len() != width * height || v.len() != width * height {
            return Err(Error::invalid(format!(
                "flow component lengths ({}, {}) != {width}x{height}",
                u.len(),
                v.len()
            )));
        }
        if u.iter().chain(v.iter()).any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite flow component"));
        }
        Ok(Self {
            width,
            height,
            u,
            v,
            direction,
            src_frame,
            dst_frame,
        })
    }

    pub fn zeros(
        width: usize,
        height: usize,
        direction: Direction,
        src_frame: usize,
        dst_frame: usize,
    ) -> Result<Self> {
        Self::uniform(width, height, (0.0, 0.0), direction, src_frame, dst_frame)
    }

    pub fn uniform(
        width: usize,
        height: usize,
        (du, dv): (f32, f32),
        direction: Direction,
        src_frame: usize,
        dst_frame: usize,
    ) -> Result<Self> {
        let n = width * height;
        Self::new(width, height, vec![du; n], vec![dv; n], direction, src_frame, dst_frame)
    }

    /// Evaluates `f(x, y) -> (u, v)` at every pixel center.
    pub fn from_fn(
        width: usize,
        height: usize,
        direction: Direction,
        src_frame: usize,
        dst_frame: usize,
        mut f: impl FnMut(usize, usize) -> (f64, f64),
    ) -> Result<Self> {
        let n = width * height;
        let mut u = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for y in 0..height {
            for x in 0..width {
                let (a, b) = f(x, y);
                u.push(a as f32);
                v.push(b as f32);
            }
        }
        Self::new(width, height, u, v, direction, src_frame, dst_frame)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn u(&self) -> &[f32] {
        &self.u
    }

    pub fn v(&self) -> &[f32] {
        &self.v
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn src_frame(&self) -> usize {
        self.src_frame
    }

    pub fn dst_frame(&self) -> usize {
        self.dst_frame
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (f32, f32) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    /// Bilinear sample of both components at a sub-pixel location, clamped to
    /// the border.
    pub fn sample(&self, x: f64, y: f64) -> (f64, f64) {
        (
            bilinear(&self.u, 1, 0, self.width, self.height, x, y),
            bilinear(&self.v, 1, 0, self.width, self.height, x, y),
        )
    }

    pub fn with_frames(mut self, direction: Direction, src_frame: usize, dst_frame: usize) -> Self {
        self.direction = direction;
        self.src_frame = src_frame;
        self.dst_frame = dst_frame;
        self
    }

    /// Multiplies every vector by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |c: &f32| (*c as f64 * factor) as f32;
        Self {
            u: self.u.iter().map(scale).collect(),
            v: self.v.iter().map(scale).collect(),
            ..self.clone()
        }
    }

    /// Per-pixel squared magnitude `u^2 + v^2`.
    pub fn magnitude_sq(&self, x: usize, y: usize) -> f64 {
        let (u, v) = self.get(x, y);
        (u as f64).powi(2) + (v as f64).powi(2)
    }

    /// Mean endpoint error against `other`, over the pixels set in `mask` (or
    /// all pixels). Returns `None` when no pixel is selected.
    pub fn mean_endpoint_error(&self, other: &MotionField, mask: Option<&ValidityMask>) -> Result<Option<f64>> {
        ensure_dims(self.dims(), other.dims())?;
        if let Some(m) = mask {
            ensure_dims(self.dims(), m.dims())?;
        }
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..self.u.len() {
            if mask.is_some_and(|m| !m.bits[i]) {
                continue;
            }
            let du = self.u[i] as f64 - other.u[i] as f64;
            let dv = self.v[i] as f64 - other.v[i] as f64;
            sum += du.hypot(dv);
            count += 1;
        }
        Ok((count > 0).then(|| sum / count as f64))
    }
}

/// Binary per-pixel validity: `true` means geometrically verifiable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidityMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl ValidityMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        check_extent(width, height)?;
        if bits.len() != width * height {
            return Err(Error::invalid(format!(
                "mask length {} != {width}x{height}",
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self::new(width, height, bits)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Number of set (valid) pixels.
    pub fn valid_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn valid_fraction(&self) -> f64 {
        self.valid_count() as f64 / self.bits.len() as f64
    }

    /// Pointwise AND.
    pub fn and(&self, other: &ValidityMask) -> Result<Self> {
        ensure_dims(self.dims(), other.dims())?;
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect();
        Self::new(self.width, self.height, bits)
    }

    /// Intersection-over-union of the *occluded* (unset) pixel sets. Two masks
    /// with no occluded pixels score 1.
    pub fn occluded_iou(&self, other: &ValidityMask) -> Result<f64> {
        let (inter, union) = self.occluded_overlap(other)?;
        Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
    }

    /// `(|A ∩ B|, |A ∪ B|)` of the occluded sets.
    pub fn occluded_overlap(&self, other: &ValidityMask) -> Result<(usize, usize)> {
        ensure_dims(self.dims(), other.dims())?;
        let mut inter = 0;
        let mut union = 0;
        for (a, b) in self.bits.iter().zip(&other.bits) {
            let (oa, ob) = (!*a, !*b);
            inter += (oa && ob) as usize;
            union += (oa || ob) as usize;
        }
        Ok((inter, union))
    }
}

fn check_extent(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(format!("empty extent {width}x{height}")));
    }
    Ok(())
}

/// Whether `(x, y)` lies inside `[0, w-1] x [0, h-1]`.
#[inline]
pub fn in_domain(width: usize, height: usize, x: f64, y: f64) -> bool {
    x >= 0.0 && y >= 0.0 && x <= (width - 1) as f64 && y <= (height - 1) as f64
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// Clamped bilinear interpolation over an interleaved buffer.
#[inline]
pub(crate) fn bilinear(data: &[f32], stride: usize, offset: usize, width: usize, height: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (width - 1) as f64);
    let y = y.clamp(0.0, (height - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let at = |xx: usize, yy: usize| data[(yy * width + xx) * stride + offset] as f64;
    let top = lerp(at(x0, y0), at(x1, y0), fx);
    let bottom = lerp(at(x0, y1), at(x1, y1), fx);
    lerp(top, bottom, fy)
}

/// Bilinear sample of one channel at a sub-pixel location. Out-of-domain
/// coordinates clamp to the border.
pub fn sample_bilinear(grid: &FrameGrid, x: f64, y: f64, channel: usize) -> Result<f64> {
    if channel >= grid.channels {
        return Err(Error::invalid(format!(
            "channel {channel} out of range for {}-channel grid",
            grid.channels
        )));
    }
    if !x.is_finite() || !y.is_finite() {
        return Err(Error::invalid("non-finite sample coordinate"));
    }
    Ok(bilinear(
        &grid.data,
        grid.channels,
        channel,
        grid.width,
        grid.height,
        x,
        y,
    ))
}

/// Backward warp: `out(x, y) = grid(x + u, y + v)`. The mask is unset where the
/// sample location fell outside the domain.
pub fn warp_backward(grid: &FrameGrid, flow: &MotionField) -> Result<(FrameGrid, ValidityMask)> {
    ensure_dims(grid.dims(), flow.dims())?;
    let (w, h, c) = (grid.width, grid.height, grid.channels);
    let mut data = Vec::with_capacity(w * h * c);
    let mut bits = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (u, v) = flow.get(x, y);
            let sx = x as f64 + u as f64;
            let sy = y as f64 + v as f64;
            bits.push(in_domain(w, h, sx, sy));
            for ch in 0..c {
                data.push(bilinear(&grid.data, c, ch, w, h, sx, sy) as f32);
            }
        }
    }
    Ok((FrameGrid::new(w, h, c, data)?, ValidityMask::new(w, h, bits)?))
}

/// Samples `field` at the locations `at` points to:
/// `result(x, y) = field(x + at.u, y + at.v)`. Keeps the metadata of `field`.
pub fn sample_field(field: &MotionField, at: &MotionField) -> Result<MotionField> {
    ensure_dims(field.dims(), at.dims())?;
    let (w, h) = field.dims();
    let mut u = Vec::with_capacity(w * h);
    let mut v = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (du, dv) = at.get(x, y);
            let (su, sv) = field.sample(x as f64 + du as f64, y as f64 + dv as f64);
            u.push(su as f32);
            v.push(sv as f32);
        }
    }
    MotionField::new(w, h, u, v, field.direction, field.src_frame, field.dst_frame)
}

/// Chains two fields: `result(x) = first(x) + second(x + first(x))`.
///
/// `first.dst_frame` must equal `second.src_frame` and both must share a
/// direction; the result spans `first.src_frame -> second.dst_frame`.
pub fn compose_flows(first: &MotionField, second: &MotionField) -> Result<MotionField> {
    ensure_dims(first.dims(), second.dims())?;
    if first.dst_frame != second.src_frame {
        return Err(Error::invalid(format!(
            "cannot chain {}->{} with {}->{}",
            first.src_frame, first.dst_frame, second.src_frame, second.dst_frame
        )));
    }
    if first.direction != second.direction {
        return Err(Error::invalid("cannot chain fields of different direction"));
    }
    let (w, h) = first.dims();
    let mut u = Vec::with_capacity(w * h);
    let mut v = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (fu, fv) = first.get(x, y);
            let (fu, fv) = (fu as f64, fv as f64);
            let (su, sv) = second.sample(x as f64 + fu, y as f64 + fv);
            u.push((fu + su) as f32);
            v.push((fv + sv) as f32);
        }
    }
    MotionField::new(w, h, u, v, first.direction, first.src_frame, second.dst_frame)
}
