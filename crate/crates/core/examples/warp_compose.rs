//! Backward warping, field composition and Euler integration of a rotation.

use eulerflow::grid::{compose_flows, warp_backward, Direction, FrameGrid};
use eulerflow::motion::{eulerian_to_lagrangian, integrate_point, MotionMode, MotionSequence};
use eulerflow::synth::rotation_field;

fn main() -> eulerflow::Result<()> {
    let (w, h) = (32, 32);
    let center = (15.5, 15.5);
    let step = 0.05;

    let frame = FrameGrid::from_fn(w, h, 1, |x, y, _| {
        ((x as f64) * 0.3).sin() * ((y as f64) * 0.2).cos() * 0.5 + 0.5
    })?;
    let shift = eulerflow::grid::MotionField::uniform(w, h, (1.5, -0.5), Direction::Forward, 0, 1)?;
    let (warped, valid) = warp_backward(&frame, &shift)?;
    println!(
        "warp by (1.5, -0.5): {:.1}% of pixels sample inside the frame",
        100.0 * valid.valid_fraction()
    );
    println!(
        "warped(10, 10) = {:.4}, frame(11.5, 9.5) via bilinear = {:.4}",
        warped.get(10, 10, 0),
        eulerflow::grid::sample_bilinear(&frame, 11.5, 9.5, 0)?
    );

    let steps: Vec<_> = (0..5)
        .map(|k| rotation_field(w, h, center, step, Direction::Forward, k, k + 1))
        .collect::<eulerflow::Result<_>>()?;
    let two = compose_flows(&steps[0], &steps[1])?;
    let direct = rotation_field(w, h, center, 2.0 * step, Direction::Forward, 0, 2)?;
    let epe = two.mean_endpoint_error(&direct, None)?.unwrap_or(0.0);
    println!("compose two rotation steps vs one rotation of twice the angle: EPE {epe:.4} px");

    let seq = MotionSequence::new(MotionMode::Eulerian, steps)?;
    let anchored = eulerian_to_lagrangian(&seq)?;
    let exact = rotation_field(w, h, center, 5.0 * step, Direction::Forward, 0, 5)?;
    let epe = anchored.fields()[4].mean_endpoint_error(&exact, None)?.unwrap_or(0.0);
    println!("five chained steps vs exact anchored rotation: EPE {epe:.4} px");

    let path = integrate_point(&seq, (25.0, 15.5))?;
    for (t, p) in path.iter().enumerate() {
        println!("t={t}  ({:.3}, {:.3})", p.0, p.1);
    }
    Ok(())
}
