//! Shipped scene presets. All are 64x64 unless sized explicitly; rectangle
//! edges sit on half-integers so pixel coverage is unambiguous.

use super::{SceneSpec, Shape, Sprite};

fn rectangle(center: (f64, f64), half: (f64, f64), velocity: (f64, f64), seed: u64, depth: u32) -> Sprite {
    Sprite {
        shape: Shape::Rectangle {
            half_width: half.0,
            half_height: half.1,
        },
        texture_seed: seed,
        center,
        velocity,
        angular_velocity: 0.0,
        depth,
    }
}

/// One motionless rectangle.
pub fn static_scene(width: usize, height: usize) -> SceneSpec {
    let c = ((width / 2) as f64 + 0.5, (height / 2) as f64 + 0.5);
    let half = ((width / 4).max(1) as f64, (height / 4).max(1) as f64);
    SceneSpec::new(width, height, 11, vec![rectangle(c, half, (0.0, 0.0), 12, 0)])
}

/// A 17x21 px rectangle moving right at 2 px/frame.
pub fn translating_rectangle() -> SceneSpec {
    SceneSpec::new(
        64,
        64,
        21,
        vec![rectangle((20.5, 32.5), (8.0, 10.0), (2.0, 0.0), 22, 0)],
    )
}

/// A disk of radius 14 spinning at 0.05 rad/frame about the canvas center.
pub fn rotating_disk() -> SceneSpec {
    SceneSpec::new(
        64,
        64,
        31,
        vec![Sprite {
            shape: Shape::Disk { radius: 14.0 },
            texture_seed: 32,
            center: (31.5, 31.5),
            velocity: (0.0, 0.0),
            angular_velocity: 0.05,
            depth: 0,
        }],
    )
}

/// A small square sliding diagonally over a larger static one.
pub fn occluding_square() -> SceneSpec {
    SceneSpec::new(
        64,
        64,
        41,
        vec![
            rectangle((12.5, 22.5), (6.0, 6.0), (2.0, 1.0), 42, 0),
            rectangle((38.5, 32.5), (10.0, 10.0), (0.0, 0.0), 43, 1),
        ],
    )
}

/// A panning background behind a faster rectangle, so every pixel moves.
pub fn panning_rectangle() -> SceneSpec {
    let mut spec = SceneSpec::new(64, 64, 51, vec![rectangle((18.5, 30.5), (7.0, 9.0), (3.0, 0.0), 52, 0)]);
    spec.background_velocity = (1.0, 0.0);
    spec
}

/// Default scene for chain drift experiments.
pub fn drift_default() -> SceneSpec {
    SceneSpec::new(
        64,
        64,
        61,
        vec![Sprite {
            shape: Shape::Disk { radius: 10.0 },
            texture_seed: 62,
            center: (31.5, 31.5),
            velocity: (0.0, 0.0),
            angular_velocity: 0.02,
            depth: 0,
        }],
    )
}

/// Scene used when none is configured.
pub fn default_scene() -> SceneSpec {
    translating_rectangle()
}

/// Every preset with its name.
pub fn shipped_scenes() -> Vec<(&'static str, SceneSpec)> {
    vec![
        ("static", static_scene(64, 64)),
        ("translating_rectangle", translating_rectangle()),
        ("rotating_disk", rotating_disk()),
        ("occluding_square", occluding_square()),
        ("panning_rectangle", panning_rectangle()),
        ("drift_default", drift_default()),
    ]
}
