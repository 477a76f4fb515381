//! Binary PGM (`P5`) and PPM (`P6`) images with 8-bit samples.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{FrameGrid, ValidityMask};

/// `round(clamp(v, 0, 1) * 255)`.
pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Encodes a 1-channel grid as `P5` or a 3-channel grid as `P6`.
pub fn encode_pnm(grid: &FrameGrid) -> Result<Vec<u8>> {
    let magic = match grid.channels() {
        1 => "P5",
        3 => "P6",
        c => return Err(Error::invalid(format!("PNM stores 1 or 3 channels, got {c}"))),
    };
    let mut out = format!("{magic}\n{} {}\n255\n", grid.width(), grid.height()).into_bytes();
    out.extend(grid.data().iter().map(|&v| quantize(v)));
    Ok(out)
}

/// Masks are written as `P5` with valid = 255 and invalid = 0.
pub fn encode_mask(mask: &ValidityMask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    out.extend(mask.bits().iter().map(|&b| if b { 255u8 } else { 0 }));
    out
}

struct Header {
    channels: usize,
    width: usize,
    height: usize,
    maxval: u32,
    raster: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(Error::format(0, "expected P5 or P6 magic")),
    };
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for (k, field) in fields.iter_mut().enumerate() {
        // whitespace and comments before each field
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        if pos == 2 && k == 0 {
            return Err(Error::format(pos as u64, "missing whitespace after magic"));
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(start as u64, "expected a decimal number"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| Error::format(start as u64, "number out of range"))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(Error::format(
                pos as u64,
                "expected one whitespace byte before the raster",
            ))
        }
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::format(3, "zero image dimension"));
    }
    if !(1..=255).contains(&maxval) {
        return Err(Error::format(3, format!("unsupported maxval {maxval}")));
    }
    Ok(Header {
        channels,
        width: width as usize,
        height: height as usize,
        maxval,
        raster: pos,
    })
}

/// Decodes `P5`/`P6` into a grid with samples scaled to `[0, 1]`.
pub fn decode_pnm(bytes: &[u8]) -> Result<FrameGrid> {
    let h = parse_header(bytes)?;
    let n = h.width * h.height * h.channels;
    let raster = &bytes[h.raster..];
    if raster.len() < n {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated raster: {} of {n} bytes", raster.len()),
        ));
    }
    let scale = 1.0 / h.maxval as f32;
    let data = raster[..n].iter().map(|&b| b as f32 * scale).collect();
    FrameGrid::new(h.width, h.height, h.channels, data)
}

/// Decodes a `P5` mask; samples at or above half of maxval are valid.
pub fn decode_mask(bytes: &[u8]) -> Result<ValidityMask> {
    let grid = decode_pnm(bytes)?;
    if grid.channels() != 1 {
        return Err(Error::format(0, "masks must be P5"));
    }
    ValidityMask::new(
        grid.width(),
        grid.height(),
        grid.data().iter().map(|&v| v >= 0.5).collect(),
    )
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(bytes)?;
    out.flush()?;
    Ok(())
}

pub fn write_pnm(path: &Path, grid: &FrameGrid) -> Result<()> {
    write_bytes(path, &encode_pnm(grid)?)
}

pub fn write_mask(path: &Path, mask: &ValidityMask) -> Result<()> {
    write_bytes(path, &encode_mask(mask))
}

pub fn read_pnm(path: &Path) -> Result<FrameGrid> {
    decode_pnm(&std::fs::read(path)?)
}

pub fn read_mask(path: &Path) -> Result<ValidityMask> {
    decode_mask(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_mask_is_all_zero_bytes() {
        let m = ValidityMask::filled(5, 3, false).unwrap();
        let bytes = encode_mask(&m);
        assert!(bytes.starts_with(b"P5\n5 3\n255\n"));
        assert!(bytes[11..].iter().all(|&b| b == 0));
        assert_eq!(decode_mask(&bytes).unwrap(), m);
    }

    #[test]
    fn one_maps_to_255() {
        let g = FrameGrid::filled(2, 2, 3, 1.0).unwrap();
        let bytes = encode_pnm(&g).unwrap();
        assert!(bytes.starts_with(b"P6\n"));
        assert!(bytes[bytes.len() - 12..].iter().all(|&b| b == 255));
    }

    #[test]
    fn header_with_comments() {
        let mut bytes = b"P5 # a comment\n# another\n2\t1 255\n".to_vec();
        bytes.extend([0, 255]);
        let g = decode_pnm(&bytes).unwrap();
        assert_eq!(g.data(), &[0.0, 1.0]);
    }

    #[test]
    fn malformed_headers() {
        assert!(matches!(
            decode_pnm(b"P3\n1 1\n255\n\0"),
            Err(Error::Format { offset: 0, .. })
        ));
        assert!(matches!(
            decode_pnm(b"P5\nx 1\n255\n\0"),
            Err(Error::Format { offset: 3, .. })
        ));
        assert!(matches!(decode_pnm(b"P5\n1 1\n65535\n\0\0"), Err(Error::Format { .. })));
        assert!(matches!(decode_pnm(b"P5\n2 2\n255\n\0"), Err(Error::Format { .. })));
        assert!(matches!(decode_pnm(b"P5\n0 2\n255\n"), Err(Error::Format { .. })));
        assert!(encode_pnm(&FrameGrid::filled(1, 1, 2, 0.0).unwrap()).is_err());
    }
}
