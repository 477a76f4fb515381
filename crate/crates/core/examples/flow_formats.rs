//! Round trip through `.flo`, PGM and a color-wheel preview.

use eulerflow::io::color::{flow_to_color, max_magnitude};
use eulerflow::io::flo::{read_flo, write_flo};
use eulerflow::io::pnm::{read_pnm, write_pnm};
use eulerflow::synth::{render, rotating_disk};

fn main() -> eulerflow::Result<()> {
    let dir = std::env::temp_dir().join("eulerflow_formats");
    std::fs::create_dir_all(&dir)?;
    let b = render(&rotating_disk(), 2)?;

    let flo = dir.join("fwd.flo");
    write_flo(&flo, &b.fwd_flows[0])?;
    let back = read_flo(&flo)?;
    println!(
        "{} bytes, identical after reload: {}",
        std::fs::metadata(&flo)?.len(),
        back.u() == b.fwd_flows[0].u()
    );

    let pgm = dir.join("frame.pgm");
    write_pnm(&pgm, &b.frames[0])?;
    let img = read_pnm(&pgm)?;
    let err = img
        .data()
        .iter()
        .zip(b.frames[0].data())
        .fold(0.0f32, |m, (a, b)| m.max((a - b).abs()));
    println!("PGM quantization error {err:.5} (at most 1/510)");

    let preview = flow_to_color(&back, max_magnitude(&back))?;
    write_pnm(&dir.join("flow.ppm"), &preview)?;
    println!("wrote {}", dir.display());
    Ok(())
}
