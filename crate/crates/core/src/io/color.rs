//! Flow visualisation.

use crate::error::{Error, Result};
use crate::grid::{FrameGrid, MotionField};

/// HSV to RGB with all components in `[0, 1]`; `hue` in turns.
fn hsv_to_rgb(hue: f64, sat: f64, val: f64) -> [f64; 3] {
    let h = hue.rem_euclid(1.0) * 6.0;
    let sector = h.floor();
    let f = h - sector;
    let p = val * (1.0 - sat);
    let q = val * (1.0 - sat * f);
    let t = val * (1.0 - sat * (1.0 - f));
    match sector as u8 {
        0 => [val, t, p],
        1 => [q, val, p],
        2 => [p, val, t],
        3 => [p, q, val],
        4 => [t, p, val],
        _ => [val, p, q],
    }
}

/// Color-wheel rendering: hue is the flow angle, saturation is
/// `|f| / max_magnitude` clamped to 1, value is 1. Zero flow is white.
pub fn flow_to_color(field: &MotionField, max_magnitude: f64) -> Result<FrameGrid> {
    if !(max_magnitude.is_finite() && max_magnitude > 0.0) {
        return Err(Error::invalid("max_magnitude must be positive"));
    }
    FrameGrid::from_fn(field.width(), field.height(), 3, |x, y, c| {
        let (u, v) = field.get(x, y);
        let (u, v) = (u as f64, v as f64);
        let sat = (u.hypot(v) / max_magnitude).min(1.0);
        let hue = v.atan2(u) / std::f64::consts::TAU;
        hsv_to_rgb(hue, sat, 1.0)[c]
    })
}

/// Single-channel `|f| / max_magnitude`, clamped to 1.
pub fn flow_magnitude(field: &MotionField, max_magnitude: f64) -> Result<FrameGrid> {
    if !(max_magnitude.is_finite() && max_magnitude > 0.0) {
        return Err(Error::invalid("max_magnitude must be positive"));
    }
    FrameGrid::from_fn(field.width(), field.height(), 1, |x, y, _| {
        (field.magnitude_sq(x, y).sqrt() / max_magnitude).min(1.0)
    })
}

/// Largest endpoint magnitude in the field, or 1 for an all-zero field.
pub fn max_magnitude(field: &MotionField) -> f64 {
    let mut m = 0.0f64;
    for y in 0..field.height() {
        for x in 0..field.width() {
            m = m.max(field.magnitude_sq(x, y));
        }
    }
    if m > 0.0 {
        m.sqrt()
    } else {
        1.0
    }
}

/// Hue in turns of an RGB triple with value 1; `None` for white.
pub fn hue_of(rgb: [f64; 3]) -> Option<f64> {
    let max = rgb.iter().copied().fold(f64::MIN, f64::max);
    let min = rgb.iter().copied().fold(f64::MAX, f64::min);
    let d = max - min;
    if d <= 1e-12 {
        return None;
    }
    let [r, g, b] = rgb;
    let h = if max == r {
        ((g - b) / d).rem_euclid(6.0)
    } else if max == g {
        (b - r) / d + 2.0
    } else {
        (r - g) / d + 4.0
    };
    Some(h / 6.0)
}
