//! Anchored error growth and per-step error uniformity under injected noise.

use eulerflow::harness::noise::{NoiseModel, VarianceLaw};
use eulerflow::harness::theorems::{theorem_scene, verify_theorem1, verify_theorem2};

fn main() -> eulerflow::Result<()> {
    let anchored = NoiseModel::gaussian(1.0, VarianceLaw::LinearInT, 3);
    let r = verify_theorem1(&anchored, 256, 1000)?;
    println!(
        "anchored: log-log slope {:.3}, lower bound holds {}, min E|e|/(sigma sqrt t) {:.3}",
        r.loglog_slope, r.bound_holds, r.stated_ratio
    );

    let heavy = NoiseModel::student_t(1.0, 3.0, VarianceLaw::LinearInT, 3);
    let r = verify_theorem1(&heavy, 256, 1000)?;
    println!(
        "student-t kappa=3: slope {:.3}, bound holds {}",
        r.loglog_slope, r.bound_holds
    );

    let step = NoiseModel::gaussian(1.0, VarianceLaw::Constant, 3);
    let r = verify_theorem2(&step, 256, 200, &theorem_scene())?;
    println!(
        "per-step: max mean EPE {:.3} <= {:.3}, slope {:.1e} px/step",
        r.max_mean_epe, r.bound, r.slope
    );
    Ok(())
}
