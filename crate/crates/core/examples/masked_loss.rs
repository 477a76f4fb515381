//! Masked reconstruction loss with exact, perturbed and absent masks.

use eulerflow::consistency::{geometric_loss, occlusion_mask, residual_image, BgcParams};
use eulerflow::grid::ValidityMask;
use eulerflow::synth::{render, translating_rectangle};

fn main() -> eulerflow::Result<()> {
    let b = render(&translating_rectangle(), 2)?;
    let params = BgcParams::default();
    let (src, dst, fwd) = (&b.frames[1], &b.frames[0], &b.fwd_flows[0]);

    let mask = occlusion_mask(fwd, &b.bwd_flows[0], &params)?;
    let all = ValidityMask::filled(src.width(), src.height(), true)?;
    println!(
        "loss with cycle mask   {:.6}",
        geometric_loss(src, dst, fwd, &mask, &params)?
    );
    println!(
        "loss with all pixels   {:.6}",
        geometric_loss(src, dst, fwd, &all, &params)?
    );

    let off = fwd.scaled(1.25);
    println!(
        "loss with flow x1.25   {:.6}",
        geometric_loss(src, dst, &off, &mask, &params)?
    );

    let residual = residual_image(src, dst, fwd)?;
    let peak = residual.data().iter().fold(0.0f32, |m, v| m.max(v.abs()));
    println!("largest residual (occluded band) {peak:.4}");
    Ok(())
}
