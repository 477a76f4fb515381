//! Per-step versus anchored refresh of a noisy warp chain.

use eulerflow::harness::drift::drift_experiment;
use eulerflow::harness::noise::{NoiseModel, VarianceLaw};
use eulerflow::synth::drift_default;

fn main() -> eulerflow::Result<()> {
    let noise = NoiseModel::gaussian(0.1, VarianceLaw::LinearInT, 0);
    let r = drift_experiment(&drift_default(), &noise, 100, 20)?;
    let (e, l) = r.mean_endpoint_series();
    for t in [1, 10, 25, 50, 99] {
        println!("t={t:<3} eulerian {:.3} px  lagrangian {:.3} px", e[t - 1], l[t - 1]);
    }
    match r.eulerian_win_fraction {
        Some(f) => println!("per-step refresh wins on {:.0}% of seeds", 100.0 * f),
        None => println!("all seeds tie"),
    }
    Ok(())
}
