//! Turns a few sparse trajectory hints into a dense field.

use std::ops::Range;

use eulerflow::motion::{default_bandwidth, densify_hints, Trajectory, TrajectorySet};

fn main() -> eulerflow::Result<()> {
    let hint = |x, y, u, v, active: Range<usize>| Trajectory {
        position: (x, y),
        velocity: (u, v),
        active,
    };
    let hints = TrajectorySet::new(
        64,
        64,
        10,
        vec![
            hint(10.0, 10.0, 2.0, 0.0, 0..10),
            hint(50.0, 50.0, 0.0, -1.0, 0..10),
            hint(32.0, 10.0, 1.0, 1.0, 5..10),
        ],
    )?;
    let bw = default_bandwidth(64, 64);
    for frame in [0, 6] {
        let field = densify_hints(&hints, frame, bw)?;
        println!(
            "frame {frame}: f(10,10)={:?} f(32,32)={:?} f(50,50)={:?}",
            field.get(10, 10),
            field.get(32, 32),
            field.get(50, 50)
        );
    }
    Ok(())
}
