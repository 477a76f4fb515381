//! Forward/backward cycle check on a synthetic scene, scored against the
//! analytic occlusion mask.

use eulerflow::consistency::{cycle_energy, occlusion_mask, BgcParams};
use eulerflow::synth::{render, translating_rectangle};

fn main() -> eulerflow::Result<()> {
    let bundle = render(&translating_rectangle(), 2)?;
    let (fwd, bwd) = (&bundle.fwd_flows[0], &bundle.bwd_flows[0]);

    let energy = cycle_energy(fwd, bwd)?;
    println!("max cycle energy {:.3} px^2", energy.max());

    for (a1, a2) in [(0.01, 0.5), (0.05, 0.1), (0.0, 0.0)] {
        let mask = occlusion_mask(fwd, bwd, &BgcParams::new(a1, a2)?)?;
        let iou = mask.occluded_iou(&bundle.occlusion[0])?;
        println!(
            "alpha1={a1:<5} alpha2={a2:<4} valid {:.4}  occluded IoU vs truth {iou:.4}",
            mask.valid_fraction()
        );
    }
    Ok(())
}
