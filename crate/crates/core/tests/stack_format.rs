use std::fs;

use doci::archive::{read_maps, read_stack, write_maps, write_stack, MANIFEST_NAME};
use doci::camera::{acquire, AcquisitionConfig};
use doci::format::{decode, encode, read_raster, write_raster, RasterData, HEADER_LEN};
use doci::phantom::{make_dye_drop_phantom, DyeDropSpec};
use doci::pipeline::DociStack;
use doci::DociError;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_raster(rng: &mut ChaCha8Rng) -> RasterData {
    let (h, w) = (rng.gen_range(0..40), rng.gen_range(0..40));
    match rng.gen_range(0..3) {
        0 => RasterData::F32(Array2::from_shape_fn((h, w), |_| {
            // Arbitrary finite bit patterns, including subnormals and -0.
            loop {
                let v = f32::from_bits(rng.gen());
                if v.is_finite() {
                    break v;
                }
            }
        })),
        1 => RasterData::U16(Array2::from_shape_fn((h, w), |_| rng.gen())),
        _ => RasterData::Mask(Array2::from_shape_fn((h, w), |_| rng.gen())),
    }
}

fn bits(r: &RasterData) -> Vec<u32> {
    match r {
        RasterData::F32(a) => a.iter().map(|v| v.to_bits()).collect(),
        RasterData::U16(a) => a.iter().map(|&v| v as u32).collect(),
        RasterData::Mask(a) => a.iter().map(|&v| v as u32).collect(),
    }
}

#[test]
fn thousand_rasters_round_trip_bit_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    for _ in 0..1000 {
        let r = random_raster(&mut rng);
        let bytes = encode(&r).unwrap();
        assert_eq!(
            bytes.len(),
            HEADER_LEN + r.dtype().payload_len(r.dim().1, r.dim().0)
        );
        let back = decode(&bytes).unwrap();
        assert_eq!(back.dim(), r.dim());
        assert_eq!(back.dtype(), r.dtype());
        assert_eq!(bits(&back), bits(&r));
        assert_eq!(encode(&back).unwrap(), bytes);
    }
}

#[test]
fn header_is_little_endian() {
    let r = RasterData::U16(Array2::from_shape_vec((2, 3), vec![1, 2, 3, 4, 5, 0x0102]).unwrap());
    let bytes = encode(&r).unwrap();
    assert_eq!(
        &bytes[..16],
        &[b'D', b'O', b'C', b'R', 1, 0, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0]
    );
    assert_eq!(&bytes[26..28], &[0x02, 0x01]);
}

#[test]
fn two_by_two_float_file_is_32_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.docr");
    let r = RasterData::F32(Array2::from_shape_vec((2, 2), vec![0.5, -1.0, 3.25, 7.0]).unwrap());
    write_raster(&path, &r).unwrap();
    assert_eq!(fs::metadata(&path).unwrap().len(), 32);
    assert_eq!(read_raster(&path).unwrap(), r);
}

#[test]
fn corrupted_files_are_rejected_with_codes() {
    let r = RasterData::F32(Array2::from_elem((4, 4), 1.5));
    let good = encode(&r).unwrap();
    let cases: Vec<(Vec<u8>, &str)> = vec![
        (
            b"DOCX"
                .iter()
                .copied()
                .chain(good[4..].iter().copied())
                .collect(),
            "BadMagic",
        ),
        (good[..3].to_vec(), "BadMagic"),
        (good[..10].to_vec(), "TruncatedPayload"),
        (good[..good.len() - 3].to_vec(), "TruncatedPayload"),
        ([&good[..], &[0u8]].concat(), "TruncatedPayload"),
        (
            {
                let mut b = good.clone();
                b[4] = 7;
                b
            },
            "UnsupportedVersion",
        ),
        (
            {
                let mut b = good.clone();
                b[14] = 0;
                b
            },
            "UnsupportedDtype",
        ),
        (
            {
                let mut b = good.clone();
                b[16..20].copy_from_slice(&f32::NAN.to_le_bytes());
                b
            },
            "NonFinite",
        ),
    ];
    for (bytes, code) in cases {
        let err = decode(&bytes).unwrap_err();
        assert_eq!(err.code(), code, "{err}");
    }
}

fn small_stack(seed: u64) -> doci::camera::ChannelStack {
    let spec = DyeDropSpec {
        width_px: 96,
        height_px: 64,
        drop_radius_px: 10.0,
        ..Default::default()
    };
    let (phantom, _) = make_dye_drop_phantom(&spec).unwrap();
    let config = AcquisitionConfig {
        seed,
        channels: vec![2, 6, 10],
        ..Default::default()
    };
    acquire(&phantom, &config).unwrap()
}

#[test]
fn stack_archive_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let stack = small_stack(5);
    let manifest = write_stack(dir.path(), &stack, Some("2026-01-01T00:00:00Z".into())).unwrap();
    assert_eq!(manifest.files.len(), 9);
    let (back, read) = read_stack(dir.path()).unwrap();
    assert_eq!(read, manifest);
    assert_eq!(back.channels.len(), 3);
    for (a, b) in stack.channels.iter().zip(&back.channels) {
        assert_eq!(a.channel, b.channel);
        let narrowed = a.triplet.reference.mapv(|v| v as f32 as f64);
        assert_eq!(narrowed, b.triplet.reference);
    }
}

#[test]
fn archives_differ_only_in_timestamp() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = write_stack(
        a.path(),
        &small_stack(9),
        Some("2026-01-01T00:00:00Z".into()),
    )
    .unwrap();
    let mb = write_stack(
        b.path(),
        &small_stack(9),
        Some("2030-06-30T12:00:00Z".into()),
    )
    .unwrap();
    assert_eq!(ma.checksum, mb.checksum);
    for f in &ma.files {
        assert_eq!(
            fs::read(a.path().join(&f.name)).unwrap(),
            fs::read(b.path().join(&f.name)).unwrap()
        );
    }
}

#[test]
fn any_single_byte_corruption_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_stack(dir.path(), &small_stack(1), None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut names: Vec<String> = manifest.files.iter().map(|f| f.name.clone()).collect();
    names.push(MANIFEST_NAME.to_string());
    for name in &names {
        let path = dir.path().join(name);
        let original = fs::read(&path).unwrap();
        for _ in 0..8 {
            let mut bytes = original.clone();
            let i = rng.gen_range(0..bytes.len());
            bytes[i] ^= 1 << rng.gen_range(0..8);
            fs::write(&path, &bytes).unwrap();
            assert!(read_stack(dir.path()).is_err(), "{name} byte {i}");
        }
        fs::write(&path, &original).unwrap();
    }
    read_stack(dir.path()).unwrap();
}

#[test]
fn map_archive_keeps_mask_plane() {
    let dir = tempfile::tempdir().unwrap();
    let stack = small_stack(2);
    let source = write_stack(dir.path().join("stack"), &stack, None).unwrap();
    let maps = DociStack::from_channels(&stack, None).unwrap();
    write_maps(dir.path().join("maps"), &maps, &source, None).unwrap();
    let (back, manifest) = read_maps(dir.path().join("maps")).unwrap();
    assert_eq!(manifest.files.len(), 6);
    for (a, b) in maps.maps.iter().zip(&back.maps) {
        assert_eq!(a.valid, b.valid);
        assert_eq!(a.values.mapv(|v| v as f32 as f64), b.values);
        assert_eq!(a.denominator_floor, b.denominator_floor);
    }
    let err = read_stack(dir.path().join("maps")).unwrap_err();
    assert!(matches!(err, DociError::Manifest(_)));
}
