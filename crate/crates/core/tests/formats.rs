//! File-level round trips and malformed-input handling for flow and image files.

use proptest::prelude::*;

use eulerflow::error::Error;
use eulerflow::grid::{Direction, FrameGrid, MotionField, ValidityMask};
use eulerflow::io::flo::{decode_flo, encode_flo, flo_size, read_flo, write_flo};
use eulerflow::io::pnm::{decode_mask, decode_pnm, read_mask, read_pnm, write_mask, write_pnm};

fn finite_f32() -> impl Strategy<Value = f32> {
    any::<f32>().prop_filter("finite", |v| v.is_finite())
}

fn field() -> impl Strategy<Value = MotionField> {
    (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
        (
            prop::collection::vec(finite_f32(), w * h),
            prop::collection::vec(finite_f32(), w * h),
        )
            .prop_map(move |(u, v)| MotionField::new(w, h, u, v, Direction::Forward, 0, 1).unwrap())
    })
}

fn frame() -> impl Strategy<Value = FrameGrid> {
    (1usize..12, 1usize..12, prop::sample::select(vec![1usize, 3])).prop_flat_map(|(w, h, c)| {
        prop::collection::vec(0.0f32..=1.0, w * h * c).prop_map(move |d| FrameGrid::new(w, h, c, d).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn flo_files_round_trip_bitwise(f in field()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.flo");
        write_flo(&path, &f).unwrap();
        prop_assert_eq!(std::fs::metadata(&path).unwrap().len() as usize, flo_size(f.width(), f.height()));
        let back = read_flo(&path).unwrap();
        let bits = |s: &[f32]| s.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(back.u()), bits(f.u()));
        prop_assert_eq!(bits(back.v()), bits(f.v()));
    }

    #[test]
    fn pnm_files_round_trip_within_half_a_level(g in frame()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(if g.channels() == 1 { "g.pgm" } else { "g.ppm" });
        write_pnm(&path, &g).unwrap();
        let back = read_pnm(&path).unwrap();
        prop_assert_eq!(back.channels(), g.channels());
        for (a, b) in back.data().iter().zip(g.data()) {
            prop_assert!((a - b).abs() <= 1.0 / 510.0 + 1e-7);
        }
    }

    #[test]
    fn masks_round_trip_exactly(bits in prop::collection::vec(any::<bool>(), 1..200)) {
        let m = ValidityMask::new(bits.len(), 1, bits).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        write_mask(&path, &m).unwrap();
        prop_assert_eq!(read_mask(&path).unwrap(), m);
    }

    #[test]
    fn truncated_flo_is_a_format_error(f in field(), cut in 1usize..16) {
        let bytes = encode_flo(&f);
        let cut = cut.min(bytes.len());
        let is_format_error = matches!(decode_flo(&bytes[..bytes.len() - cut]), Err(Error::Format { .. }));
        prop_assert!(is_format_error);
    }
}

#[test]
fn flo_errors_point_at_the_bad_field() {
    let f = MotionField::uniform(2, 2, (0.5, 0.25), Direction::Forward, 0, 1).unwrap();
    let good = encode_flo(&f);

    let mut bad = good.clone();
    bad[4..8].copy_from_slice(&0i32.to_le_bytes());
    assert!(matches!(decode_flo(&bad), Err(Error::Format { offset: 4, .. })));

    let mut long = good.clone();
    long.extend_from_slice(&[0; 8]);
    assert!(matches!(decode_flo(&long), Err(Error::Format { offset: 44, .. })));

    let mut huge = good;
    huge[4..8].copy_from_slice(&i32::MAX.to_le_bytes());
    huge[8..12].copy_from_slice(&i32::MAX.to_le_bytes());
    assert!(matches!(decode_flo(&huge), Err(Error::Format { .. })));
}

#[test]
fn malformed_images_are_rejected() {
    for bytes in [
        &b"P2\n1 1\n255\n\x00"[..],
        b"P5\n2 2\n255\n\x00\x00",
        b"P5\n0 2\n255\n",
        b"P6\n1 1\n255\n\x00",
        b"P5 1",
    ] {
        assert!(
            matches!(decode_pnm(bytes), Err(Error::Format { .. })),
            "{:?}",
            String::from_utf8_lossy(bytes)
        );
    }
    assert!(decode_mask(b"P6\n1 1\n255\n\x00\x00\x00").is_err());
}

#[test]
fn missing_files_are_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(read_flo(&dir.path().join("none.flo")), Err(Error::Io(_))));
    assert!(matches!(read_pnm(&dir.path().join("none.pgm")), Err(Error::Io(_))));
}
