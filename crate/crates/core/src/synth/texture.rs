//! Hash-based value noise.

fn hash(seed: u64, ix: i64, iy: i64) -> f64 {
    // splitmix64 over the mixed lattice coordinates
    let mut z =
        seed ^ (ix as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (iy as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn octave(seed: u64, x: f64, y: f64) -> f64 {
    let (fx, fy) = (x.floor(), y.floor());
    let (ix, iy) = (fx as i64, fy as i64);
    let (tx, ty) = (smooth(x - fx), smooth(y - fy));
    let a = hash(seed, ix, iy);
    let b = hash(seed, ix + 1, iy);
    let c = hash(seed, ix, iy + 1);
    let d = hash(seed, ix + 1, iy + 1);
    let top = a + tx * (b - a);
    let bottom = c + tx * (d - c);
    top + ty * (bottom - top)
}

/// Smooth two-octave value noise in `[0.1, 0.9]` with cells of `scale` pixels.
pub fn value_noise(seed: u64, x: f64, y: f64, scale: f64) -> f64 {
    let coarse = octave(seed, x / scale, y / scale);
    let fine = octave(seed ^ 0x5851_F42D_4C95_7F2D, 2.0 * x / scale, 2.0 * y / scale);
    0.1 + 0.8 * (0.65 * coarse + 0.35 * fine)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounded_and_deterministic() {
        for i in 0..500 {
            let (x, y) = (i as f64 * 0.37 - 40.0, i as f64 * 0.91 - 200.0);
            let v = value_noise(5, x, y, 3.0);
            assert!((0.1..=0.9).contains(&v));
            assert_eq!(v, value_noise(5, x, y, 3.0));
        }
        assert_ne!(value_noise(1, 0.5, 0.5, 3.0), value_noise(2, 0.5, 0.5, 3.0));
    }

    #[test]
    fn continuous() {
        let a = value_noise(9, 10.0, 10.0, 3.0);
        let b = value_noise(9, 10.0 + 1e-6, 10.0, 3.0);
        assert!((a - b).abs() < 1e-5);
    }
}
