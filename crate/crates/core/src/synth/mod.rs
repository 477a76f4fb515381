//! Synthetic scenes with analytic ground truth.
//!
//! A scene is a textured background plus depth-ordered rigid sprites whose
//! poses are closed-form functions of time. Frames, adjacent and cumulative
//! flows, and occlusion sets all follow from the poses, so nothing here is
//! estimated.

mod scenes;
mod texture;

pub use scenes::{
    default_scene, drift_default, occluding_square, panning_rectangle, rotating_disk, shipped_scenes, static_scene,
    translating_rectangle,
};
pub use texture::value_noise;

use crate::error::{Error, Result};
use crate::grid::{in_domain, Direction, FrameGrid, MotionField, ValidityMask};

/// Subsamples per axis used when rendering frames.
const RENDER_SUPERSAMPLING: usize = 4;
/// Subsamples per axis used when deciding occlusion.
const OCCLUSION_SUPERSAMPLING: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Rectangle { half_width: f64, half_height: f64 },
    Disk { radius: f64 },
}

impl Shape {
    fn contains(&self, (x, y): (f64, f64)) -> bool {
        match *self {
            Shape::Rectangle {
                half_width,
                half_height,
            } => x.abs() <= half_width && y.abs() <= half_height,
            Shape::Disk { radius } => x * x + y * y <= radius * radius,
        }
    }

    /// Half extents of the unrotated bounding box.
    fn half_extent(&self) -> (f64, f64) {
        match *self {
            Shape::Rectangle {
                half_width,
                half_height,
            } => (half_width, half_height),
            Shape::Disk { radius } => (radius, radius),
        }
    }
}

/// Rigid textured sprite: `world(p, t) = center + velocity * t + R(omega * t) p`
/// for a point `p` in sprite-local coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Sprite {
    pub shape: Shape,
    pub texture_seed: u64,
    /// Center at `t = 0`, in pixels.
    pub center: (f64, f64),
    /// px/frame.
    pub velocity: (f64, f64),
    /// rad/frame about the sprite center.
    pub angular_velocity: f64,
    /// Smaller is nearer; must be unique within a scene.
    pub depth: u32,
}

impl Sprite {
    fn center_at(&self, t: f64) -> (f64, f64) {
        (self.center.0 + self.velocity.0 * t, self.center.1 + self.velocity.1 * t)
    }

    fn to_local(&self, (x, y): (f64, f64), t: f64) -> (f64, f64) {
        let (cx, cy) = self.center_at(t);
        let (s, c) = (-self.angular_velocity * t).sin_cos();
        let (dx, dy) = (x - cx, y - cy);
        (c * dx - s * dy, s * dx + c * dy)
    }

    fn to_world(&self, (px, py): (f64, f64), t: f64) -> (f64, f64) {
        let (cx, cy) = self.center_at(t);
        let (s, c) = (self.angular_velocity * t).sin_cos();
        (cx + c * px - s * py, cy + s * px + c * py)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub background_seed: u64,
    /// Uniform background pan in px/frame.
    pub background_velocity: (f64, f64),
    /// Value-noise cell size in pixels.
    pub texture_scale: f64,
    pub sprites: Vec<Sprite>,
}

impl SceneSpec {
    pub fn new(width: usize, height: usize, background_seed: u64, sprites: Vec<Sprite>) -> Self {
        Self {
            width,
            height,
            channels: 1,
            background_seed,
            background_velocity: (0.0, 0.0),
            texture_scale: 3.0,
            sprites,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 2 || self.height < 2 {
            return Err(Error::invalid("canvas must be at least 2x2"));
        }
        if !(1..=4).contains(&self.channels) {
            return Err(Error::invalid("channels must be in 1..=4"));
        }
        if !(self.texture_scale.is_finite() && self.texture_scale > 0.0) {
            return Err(Error::invalid("texture_scale must be positive"));
        }
        let (w, h) = (self.width as f64, self.height as f64);
        let mut depths: Vec<u32> = self.sprites.iter().map(|s| s.depth).collect();
        depths.sort_unstable();
        if depths.windows(2).any(|d| d[0] == d[1]) {
            return Err(Error::invalid("sprite depths must be unique"));
        }
        for (i, s) in self.sprites.iter().enumerate() {
            let (hx, hy) = s.shape.half_extent();
            if !(hx > 0.0 && hy > 0.0) {
                return Err(Error::invalid(format!("sprite {i} has an empty shape")));
            }
            // rotated rectangles need their circumscribed extent
            let (hx, hy) = match s.shape {
                Shape::Rectangle { .. } if s.angular_velocity != 0.0 => {
                    let r = hx.hypot(hy);
                    (r, r)
                }
                _ => (hx, hy),
            };
            let (cx, cy) = s.center;
            if cx - hx < -0.5 || cy - hy < -0.5 || cx + hx > w - 0.5 || cy + hy > h - 0.5 {
                return Err(Error::invalid(format!("sprite {i} is not inside the canvas at t = 0")));
            }
        }
        Ok(())
    }

    /// Sprite indices, nearest first.
    fn depth_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.sprites.len()).collect();
        order.sort_by_key(|&i| self.sprites[i].depth);
        order
    }
}

/// The visible surface at a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Surface {
    Background,
    Sprite(usize),
}

/// Analytic evaluator over a validated scene.
pub struct SceneModel<'a> {
    spec: &'a SceneSpec,
    order: Vec<usize>,
}

impl<'a> SceneModel<'a> {
    pub fn new(spec: &'a SceneSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            order: spec.depth_order(),
        })
    }

    pub fn spec(&self) -> &SceneSpec {
        self.spec
    }

    pub fn surface_at(&self, p: (f64, f64), t: f64) -> Surface {
        for &i in &self.order {
            let s = &self.spec.sprites[i];
            if s.shape.contains(s.to_local(p, t)) {
                return Surface::Sprite(i);
            }
        }
        Surface::Background
    }

    fn to_local(&self, surface: Surface, p: (f64, f64), t: f64) -> (f64, f64) {
        match surface {
            Surface::Background => {
                let (vx, vy) = self.spec.background_velocity;
                (p.0 - vx * t, p.1 - vy * t)
            }
            Surface::Sprite(i) => self.spec.sprites[i].to_local(p, t),
        }
    }

    fn to_world(&self, surface: Surface, q: (f64, f64), t: f64) -> (f64, f64) {
        match surface {
            Surface::Background => {
                let (vx, vy) = self.spec.background_velocity;
                (q.0 + vx * t, q.1 + vy * t)
            }
            Surface::Sprite(i) => self.spec.sprites[i].to_world(q, t),
        }
    }

    /// Where the surface point at `p` (time `from`) is at time `to`.
    pub fn transport(&self, surface: Surface, p: (f64, f64), from: f64, to: f64) -> (f64, f64) {
        self.to_world(surface, self.to_local(surface, p, from), to)
    }

    /// Displacement of the visible surface at `p` between `from` and `to`.
    pub fn displacement(&self, p: (f64, f64), from: f64, to: f64) -> (f64, f64) {
        let s = self.surface_at(p, from);
        let q = self.transport(s, p, from, to);
        (q.0 - p.0, q.1 - p.1)
    }

    /// Texture value of the visible surface at `p`.
    pub fn shade(&self, p: (f64, f64), t: f64, channel: usize) -> f64 {
        let s = self.surface_at(p, t);
        let seed = match s {
            Surface::Background => self.spec.background_seed,
            Surface::Sprite(i) => self.spec.sprites[i].texture_seed,
        };
        let q = self.to_local(s, p, t);
        let seed = seed.wrapping_add((channel as u64).wrapping_mul(0x9E37_79B9));
        texture::value_noise(seed, q.0, q.1, self.spec.texture_scale)
    }

    /// Whether the surface point seen at `p` at time `from` is still visible
    /// and inside the domain at time `to`.
    pub fn correspondence_valid(&self, p: (f64, f64), from: f64, to: f64) -> bool {
        let s = self.surface_at(p, from);
        let q = self.transport(s, p, from, to);
        in_domain(self.spec.width, self.spec.height, q.0, q.1) && self.surface_at(q, to) == s
    }

    /// Like [`Self::correspondence_valid`] but for a point anywhere inside a
    /// pixel, so the domain is the full pixel extent.
    fn subsample_valid(&self, p: (f64, f64), from: f64, to: f64) -> bool {
        let s = self.surface_at(p, from);
        let q = self.transport(s, p, from, to);
        let (w, h) = (self.spec.width as f64, self.spec.height as f64);
        (-0.5..=w - 0.5).contains(&q.0) && (-0.5..=h - 0.5).contains(&q.1) && self.surface_at(q, to) == s
    }

    pub fn render_frame(&self, t: usize) -> Result<FrameGrid> {
        let n = RENDER_SUPERSAMPLING;
        let inv = 1.0 / (n * n) as f64;
        let t = t as f64;
        FrameGrid::from_fn(self.spec.width, self.spec.height, self.spec.channels, |x, y, c| {
            let mut acc = 0.0;
            for j in 0..n {
                for i in 0..n {
                    let p = (x as f64 + sub_offset(i, n), y as f64 + sub_offset(j, n));
                    acc += self.shade(p, t, c);
                }
            }
            acc * inv
        })
    }

    /// Field of displacements `from -> to` of the surface visible at each pixel
    /// center at time `from`.
    pub fn flow(&self, from: usize, to: usize, direction: Direction) -> Result<MotionField> {
        let (f, t) = (from as f64, to as f64);
        MotionField::from_fn(self.spec.width, self.spec.height, direction, from, to, |x, y| {
            self.displacement((x as f64, y as f64), f, t)
        })
    }

    /// Pixels of frame `from` whose surface stays visible and in-domain at
    /// `to`. A pixel counts as valid only if its center lands in the domain,
    /// every pixel center carrying bilinear weight at the landing point shows
    /// the same surface, and all of its 2x2 subsamples keep their surface.
    pub fn validity(&self, from: usize, to: usize) -> Result<ValidityMask> {
        let n = OCCLUSION_SUPERSAMPLING;
        let (f, t) = (from as f64, to as f64);
        ValidityMask::from_fn(self.spec.width, self.spec.height, |x, y| {
            let center = (x as f64, y as f64);
            let s = self.surface_at(center, f);
            let q = self.transport(s, center, f, t);
            in_domain(self.spec.width, self.spec.height, q.0, q.1)
                && self.support_matches(s, q, t)
                && (0..n).all(|j| {
                    (0..n).all(|i| {
                        let p = (x as f64 + sub_offset(i, n), y as f64 + sub_offset(j, n));
                        self.subsample_valid(p, f, t)
                    })
                })
        })
    }
}

impl SceneModel<'_> {
    /// Whether the pixel centers with nonzero bilinear weight at `q` all show
    /// surface `s` at time `t`.
    fn support_matches(&self, s: Surface, q: (f64, f64), t: f64) -> bool {
        let (x0, y0) = (q.0.floor(), q.1.floor());
        let xs = [(x0, true), (x0 + 1.0, q.0 > x0)];
        let ys = [(y0, true), (y0 + 1.0, q.1 > y0)];
        ys.iter().filter(|(_, w)| *w).all(|&(cy, _)| {
            xs.iter()
                .filter(|(_, w)| *w)
                .all(|&(cx, _)| self.surface_at((cx, cy), t) == s)
        })
    }
}

fn sub_offset(i: usize, n: usize) -> f64 {
    (i as f64 + 0.5) / n as f64 - 0.5
}

/// Analytic frames, flows and validity sets of a rendered scene.
#[derive(Clone, Debug)]
pub struct GroundTruthBundle {
    pub spec: SceneSpec,
    /// `T` frames.
    pub frames: Vec<FrameGrid>,
    /// `f_{t->t+1}` for `t in 0..T-1`.
    pub fwd_flows: Vec<MotionField>,
    /// `f_{t+1->t}` for `t in 0..T-1`.
    pub bwd_flows: Vec<MotionField>,
    /// `u_{0->t}` for `t in 1..T` (entry `k` is `u_{0->k+1}`).
    pub cum_flows: Vec<MotionField>,
    /// `u_{t->0}` for `t in 1..T`.
    pub cum_bwd_flows: Vec<MotionField>,
    /// Validity of `t -> t+1` correspondences on frame `t`, `t in 0..T-1`.
    pub occlusion: Vec<ValidityMask>,
    /// Frame-0 pixels whose correspondence held at every frame up to `t`,
    /// `t in 0..T`.
    pub reference_valid: Vec<ValidityMask>,
    /// `|Ω_valid(t)| / |Ω|` against frame 0, `t in 0..T`.
    pub valid_area: Vec<f64>,
}

impl GroundTruthBundle {
    pub fn horizon(&self) -> usize {
        self.frames.len()
    }
}

/// Renders `frames` frames of `spec` with full ground truth.
pub fn render(spec: &SceneSpec, frames: usize) -> Result<GroundTruthBundle> {
    if frames < 2 {
        return Err(Error::invalid(format!("need at least 2 frames, got {frames}")));
    }
    let model = SceneModel::new(spec)?;
    let images = (0..frames).map(|t| model.render_frame(t)).collect::<Result<Vec<_>>>()?;
    let fwd_flows = (0..frames - 1)
        .map(|t| model.flow(t, t + 1, Direction::Forward))
        .collect::<Result<Vec<_>>>()?;
    let bwd_flows = (0..frames - 1)
        .map(|t| model.flow(t + 1, t, Direction::Backward))
        .collect::<Result<Vec<_>>>()?;
    let cum_flows = (1..frames)
        .map(|t| model.flow(0, t, Direction::Forward))
        .collect::<Result<Vec<_>>>()?;
    let cum_bwd_flows = (1..frames)
        .map(|t| model.flow(t, 0, Direction::Backward))
        .collect::<Result<Vec<_>>>()?;
    let occlusion = (0..frames - 1)
        .map(|t| model.validity(t, t + 1))
        .collect::<Result<Vec<_>>>()?;
    // a trajectory that loses its correspondence stays lost
    let mut reference_valid: Vec<ValidityMask> = Vec::with_capacity(frames);
    for t in 0..frames {
        let now = model.validity(0, t)?;
        let mask = match reference_valid.last() {
            Some(prev) => prev.and(&now)?,
            None => now,
        };
        reference_valid.push(mask);
    }
    let valid_area = reference_valid.iter().map(|m| m.valid_fraction()).collect();
    Ok(GroundTruthBundle {
        spec: spec.clone(),
        frames: images,
        fwd_flows,
        bwd_flows,
        cum_flows,
        cum_bwd_flows,
        occlusion,
        reference_valid,
        valid_area,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Anchor {
    /// Correspondences from frame 0 to frame `t`.
    Reference,
    /// Correspondences from frame `t-1` to frame `t`.
    Adjacent,
}

/// Valid-area fraction per frame `t in 0..T`; entry 0 is 1 in both modes.
pub fn valid_area_curve(bundle: &GroundTruthBundle, anchor: Anchor) -> Vec<f64> {
    match anchor {
        Anchor::Reference => bundle.valid_area.clone(),
        Anchor::Adjacent => std::iter::once(1.0)
            .chain(bundle.occlusion.iter().map(|m| m.valid_fraction()))
            .collect(),
    }
}

/// Displacement field of a rotation by `angle` about `center`:
/// `R(angle)(x - c) + c - x`.
pub fn rotation_field(
    width: usize,
    height: usize,
    center: (f64, f64),
    angle: f64,
    direction: Direction,
    src_frame: usize,
    dst_frame: usize,
) -> Result<MotionField> {
    let (s, c) = angle.sin_cos();
    MotionField::from_fn(width, height, direction, src_frame, dst_frame, |x, y| {
        let (dx, dy) = (x as f64 - center.0, y as f64 - center.1);
        (c * dx - s * dy - dx, s * dx + c * dy - dy)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::warp_backward;

    fn rect(center: (f64, f64), half: (f64, f64), velocity: (f64, f64), depth: u32) -> Sprite {
        Sprite {
            shape: Shape::Rectangle {
                half_width: half.0,
                half_height: half.1,
            },
            texture_seed: 100 + depth as u64,
            center,
            velocity,
            angular_velocity: 0.0,
            depth,
        }
    }

    #[test]
    fn static_scene_has_trivial_ground_truth() {
        let spec = static_scene(24, 20);
        let b = render(&spec, 4).unwrap();
        assert!(b.fwd_flows.iter().chain(&b.bwd_flows).chain(&b.cum_flows).all(|f| f
            .u()
            .iter()
            .chain(f.v())
            .all(|&c| c == 0.0)));
        assert!(b.occlusion.iter().all(|m| m.valid_count() == m.len()));
        assert!(b.valid_area.iter().all(|&a| a == 1.0));
        assert!(b.frames.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn translating_rectangle_occludes_a_leading_band() {
        // edges on half-integers: x in [12.5, 28.5], y in [22.5, 42.5]
        let spec = SceneSpec::new(64, 64, 3, vec![rect((20.5, 32.5), (8.0, 10.0), (2.0, 0.0), 0)]);
        let b = render(&spec, 4).unwrap();
        for (t, m) in b.occlusion.iter().enumerate() {
            let occluded: Vec<(usize, usize)> = (0..64)
                .flat_map(|y| (0..64).map(move |x| (x, y)))
                .filter(|&(x, y)| !m.get(x, y))
                .collect();
            assert_eq!(occluded.len(), 2 * 20, "t={t}");
            let right = 28 + 2 * t;
            assert!(occluded
                .iter()
                .all(|&(x, y)| (x == right + 1 || x == right + 2) && (23..=42).contains(&y)));
        }
    }

    #[test]
    fn sprite_out_of_canvas_is_rejected() {
        let spec = SceneSpec::new(32, 32, 0, vec![rect((2.0, 16.0), (4.0, 4.0), (0.0, 0.0), 0)]);
        assert!(render(&spec, 3).is_err());
        let dup = SceneSpec::new(
            32,
            32,
            0,
            vec![
                rect((10.0, 10.0), (2.0, 2.0), (0.0, 0.0), 1),
                rect((20.0, 20.0), (2.0, 2.0), (0.0, 0.0), 1),
            ],
        );
        assert!(render(&dup, 3).is_err());
        assert!(render(&static_scene(16, 16), 1).is_err());
    }

    #[test]
    fn warping_next_frame_reproduces_current_on_valid_pixels() {
        for spec in [
            translating_rectangle(),
            rotating_disk(),
            occluding_square(),
            panning_rectangle(),
        ] {
            let b = render(&spec, 5).unwrap();
            for t in 0..4 {
                let (warped, _) = warp_backward(&b.frames[t + 1], &b.fwd_flows[t]).unwrap();
                let m = &b.occlusion[t];
                let mut sum = 0.0;
                let mut n = 0;
                for y in 0..spec.height {
                    for x in 0..spec.width {
                        if m.get(x, y) {
                            for c in 0..spec.channels {
                                sum += (warped.get(x, y, c) - b.frames[t].get(x, y, c)).abs() as f64;
                                n += 1;
                            }
                        }
                    }
                }
                let mean = sum / n as f64;
                assert!(mean < 0.02, "t={t}: {mean}");
            }
        }
    }

    #[test]
    fn rotating_disk_reference_area_never_grows() {
        let b = render(&rotating_disk(), 100).unwrap();
        assert!(b.valid_area.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn rotation_field_matches_transport() {
        let spec = rotating_disk();
        let model = SceneModel::new(&spec).unwrap();
        let s = &spec.sprites[0];
        let f = rotation_field(
            spec.width,
            spec.height,
            s.center,
            s.angular_velocity * 3.0,
            Direction::Forward,
            0,
            3,
        )
        .unwrap();
        let (x, y) = (34, 29);
        let d = model.displacement((x as f64, y as f64), 0.0, 3.0);
        let (u, v) = f.get(x, y);
        assert!((d.0 - u as f64).abs() < 1e-5 && (d.1 - v as f64).abs() < 1e-5);
    }

    #[test]
    fn reference_area_decays_and_stays_below_adjacent() {
        for (name, spec) in shipped_scenes() {
            let frames = if name == "rotating_disk" { 100 } else { 30 };
            let b = render(&spec, frames).unwrap();
            let reference = valid_area_curve(&b, Anchor::Reference);
            let adjacent = valid_area_curve(&b, Anchor::Adjacent);
            assert_eq!(reference.len(), frames);
            assert_eq!(reference[0], 1.0);
            assert!(reference.windows(2).all(|w| w[1] <= w[0]), "{name}");
            assert!(reference.iter().zip(&adjacent).all(|(r, a)| r <= a), "{name}");
        }
    }

    #[test]
    fn translating_rectangle_curves() {
        let b = render(&translating_rectangle(), 34).unwrap();
        let reference = valid_area_curve(&b, Anchor::Reference);
        let adjacent = valid_area_curve(&b, Anchor::Adjacent);
        // left edge 12.5 + 2t passes the last pixel center at t = 26
        let exit = 26;
        assert!(reference[..=exit].windows(2).all(|w| w[1] < w[0]));
        assert!(reference[exit..].windows(2).all(|w| w[1] == w[0]));
        let band = 1.0 - 2.0 * 20.0 / (64.0 * 64.0);
        assert!(
            adjacent[1..exit].iter().all(|&a| (a - band).abs() < 1e-12),
            "{adjacent:?}"
        );
    }

    mod props {
        use super::*;
        use crate::consistency::{cycle_energy, occlusion_mask, BgcParams};
        use proptest::prelude::*;

        fn translation_scene() -> impl Strategy<Value = SceneSpec> {
            let sprite = (
                4i32..28,
                4i32..28,
                2i32..7,
                2i32..7,
                -3.0f64..=3.0,
                -3.0f64..=3.0,
                any::<u64>(),
            );
            (
                prop::collection::vec(sprite, 1..4),
                -2.0f64..=2.0,
                -2.0f64..=2.0,
                any::<u64>(),
            )
                .prop_map(|(sprites, bx, by, seed)| {
                    let sprites = sprites
                        .into_iter()
                        .enumerate()
                        .map(|(i, (cx, cy, hw, hh, vx, vy, ts))| Sprite {
                            shape: Shape::Rectangle {
                                half_width: hw as f64,
                                half_height: hh as f64,
                            },
                            texture_seed: ts,
                            center: (cx.clamp(hw, 30 - hw) as f64 + 0.5, cy.clamp(hh, 30 - hh) as f64 + 0.5),
                            velocity: (vx, vy),
                            angular_velocity: 0.0,
                            depth: i as u32,
                        })
                        .collect();
                    let mut spec = SceneSpec::new(32, 32, seed, sprites);
                    spec.background_velocity = (bx, by);
                    spec
                })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn analytic_flows_are_cycle_exact_on_valid_pixels(spec in translation_scene()) {
                let b = render(&spec, 3).unwrap();
                let params = BgcParams::default();
                for t in 0..2 {
                    let e = cycle_energy(&b.fwd_flows[t], &b.bwd_flows[t]).unwrap();
                    let m = occlusion_mask(&b.fwd_flows[t], &b.bwd_flows[t], &params).unwrap();
                    for y in 0..32 {
                        for x in 0..32 {
                            if b.occlusion[t].get(x, y) {
                                prop_assert!(e.get(x, y) < 1e-6);
                                prop_assert!(m.get(x, y));
                            }
                        }
                    }
                }
            }
        }
    }
}
