//! Pyramidal block matching on a rendered pair, compared with ground truth.

use std::time::Instant;

use eulerflow::estimator::{estimate_batched, estimate_flow, EstimatorParams};
use eulerflow::synth::{render, rotating_disk, translating_rectangle};

fn main() -> eulerflow::Result<()> {
    let params = EstimatorParams::default();
    for (name, spec) in [
        ("translating_rectangle", translating_rectangle()),
        ("rotating_disk", rotating_disk()),
    ] {
        let b = render(&spec, 2)?;
        let start = Instant::now();
        let est = estimate_flow(&b.frames[0], &b.frames[1], &params)?;
        let epe = est
            .mean_endpoint_error(&b.fwd_flows[0], Some(&b.occlusion[0]))?
            .unwrap_or(0.0);
        println!(
            "{name:<22} EPE on visible pixels {epe:.3} px  ({:.0?})",
            start.elapsed()
        );
    }

    let b = render(&translating_rectangle(), 6)?;
    let (fwd, bwd) = estimate_batched(&b.frames, &params, 4)?;
    println!("batched: {} forward and {} backward fields", fwd.len(), bwd.len());
    Ok(())
}
