//! Error of direct long-baseline estimates against chained adjacent ones.

use eulerflow::estimator::EstimatorParams;
use eulerflow::harness::metrics::premise_study;
use eulerflow::synth::rotating_disk;

fn main() -> eulerflow::Result<()> {
    let rows = premise_study(&rotating_disk(), 12, &EstimatorParams::default())?;
    println!("t   |u_0t|   adjacent-chain EPE   direct EPE");
    for r in rows {
        println!(
            "{:<3} {:<8.3} {:<20.3} {:.3}",
            r.t, r.reference_magnitude, r.adjacent_epe, r.direct_epe
        );
    }
    Ok(())
}
