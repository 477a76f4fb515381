//! Builds a custom two-sprite scene and prints its visibility curves.

use eulerflow::synth::{render, valid_area_curve, Anchor, SceneSpec, Shape, Sprite};

fn main() -> eulerflow::Result<()> {
    let mut spec = SceneSpec::new(
        48,
        48,
        3,
        vec![
            Sprite {
                shape: Shape::Disk { radius: 6.0 },
                texture_seed: 11,
                center: (10.5, 24.5),
                velocity: (1.5, 0.0),
                angular_velocity: 0.1,
                depth: 0,
            },
            Sprite {
                shape: Shape::Rectangle {
                    half_width: 8.0,
                    half_height: 8.0,
                },
                texture_seed: 12,
                center: (30.5, 24.5),
                velocity: (0.0, 0.0),
                angular_velocity: 0.0,
                depth: 1,
            },
        ],
    );
    spec.channels = 3;
    let b = render(&spec, 12)?;
    let reference = valid_area_curve(&b, Anchor::Reference);
    let adjacent = valid_area_curve(&b, Anchor::Adjacent);
    println!("t  reference  adjacent");
    for t in 0..reference.len() {
        println!("{t:<2} {:.4}     {:.4}", reference[t], adjacent[t]);
    }
    Ok(())
}
