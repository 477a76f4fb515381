//! Middlebury `.flo` flow files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Direction, MotionField};

pub const FLO_SENTINEL: f32 = 202021.25;

/// Size in bytes of a `width x height` file.
pub fn flo_size(width: usize, height: usize) -> usize {
    12 + 8 * width * height
}

pub fn encode_flo(field: &MotionField) -> Vec<u8> {
    let (w, h) = field.dims();
    let mut out = Vec::with_capacity(flo_size(w, h));
    out.extend_from_slice(&FLO_SENTINEL.to_le_bytes());
    out.extend_from_slice(&(w as i32).to_le_bytes());
    out.extend_from_slice(&(h as i32).to_le_bytes());
    for (u, v) in field.u().iter().zip(field.v()) {
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn word(bytes: &[u8], offset: usize) -> Result<[u8; 4]> {
    bytes
        .get(offset..offset + 4)
        .map(|b| b.try_into().expect("4 bytes"))
        .ok_or_else(|| Error::format(offset as u64, "truncated file"))
}

/// Decodes a `.flo` payload. Frame tags are not stored in the format; the
/// result is labelled `Forward, 0 -> 1`.
pub fn decode_flo(bytes: &[u8]) -> Result<MotionField> {
    let sentinel = f32::from_le_bytes(word(bytes, 0)?);
    if sentinel.to_bits() != FLO_SENTINEL.to_bits() {
        return Err(Error::format(
            0,
            format!("bad sentinel {sentinel}, expected {FLO_SENTINEL}"),
        ));
    }
    let w = i32::from_le_bytes(word(bytes, 4)?);
    let h = i32::from_le_bytes(word(bytes, 8)?);
    if w <= 0 {
        return Err(Error::format(4, format!("nonpositive width {w}")));
    }
    if h <= 0 {
        return Err(Error::format(8, format!("nonpositive height {h}")));
    }
    let (w, h) = (w as usize, h as usize);
    let n = w
        .checked_mul(h)
        .filter(|n| n.checked_mul(8).is_some_and(|b| b <= bytes.len() - 12))
        .ok_or_else(|| Error::format(bytes.len() as u64, format!("truncated payload for {w}x{h}")))?;
    if bytes.len() != flo_size(w, h) {
        return Err(Error::format(
            flo_size(w, h) as u64,
            format!("{} trailing bytes", bytes.len() - flo_size(w, h)),
        ));
    }
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for chunk in bytes[12..].chunks_exact(8) {
        u.push(f32::from_le_bytes(chunk[..4].try_into().expect("4 bytes")));
        v.push(f32::from_le_bytes(chunk[4..].try_into().expect("4 bytes")));
    }
    MotionField::new(w, h, u, v, Direction::Forward, 0, 1)
}

pub fn write_flo(path: &Path, field: &MotionField) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&encode_flo(field))?;
    out.flush()?;
    Ok(())
}

pub fn read_flo(path: &Path) -> Result<MotionField> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    decode_flo(&bytes)
}
