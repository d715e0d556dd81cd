use super::morphology::{dilate_binary, erode_binary};
use super::*;
use proptest::prelude::*;
use std::collections::HashSet;

fn ds(dims: (usize, usize, usize)) -> usize {
    dims.0 * dims.1 * dims.2
}

/// Fill an axis-aligned ellipsoid (voxel units) with `value`.
fn fill_ellipsoid(
    data: &mut [i16],
    dims: (usize, usize, usize),
    center: (f64, f64, f64),
    radii: (f64, f64, f64),
    value: i16,
) {
    for z in 0..dims.2 {
        for y in 0..dims.1 {
            for x in 0..dims.0 {
                let dx = (x as f64 - center.0) / radii.0;
                let dy = (y as f64 - center.1) / radii.1;
                let dz = (z as f64 - center.2) / radii.2;
                if dx * dx + dy * dy + dz * dz <= 1.0 {
                    data[x + dims.0 * (y + dims.1 * z)] = value;
                }
            }
        }
    }
}

/// Two air ellipsoids inside a 0 HU body on a 64^3 grid, 1 mm spacing.
fn two_lung_phantom() -> (ScanVolume, Vec<bool>) {
    let dims = (64, 64, 64);
    let mut data = vec![0i16; ds(dims)];
    fill_ellipsoid(&mut data, dims, (16.0, 32.0, 32.0), (10.0, 14.0, 20.0), -1000);
    fill_ellipsoid(&mut data, dims, (48.0, 32.0, 32.0), (10.0, 14.0, 20.0), -1000);
    let truth: Vec<bool> = data.iter().map(|&v| v == -1000).collect();
    let scan = ScanVolume::new(dims, (1.0, 1.0, 1.0), (0.0, 0.0, 0.0), data).unwrap();
    (scan, truth)
}

fn dice(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(&x, &y)| x && y).count();
    let na = a.iter().filter(|&&x| x).count();
    let nb = b.iter().filter(|&&x| x).count();
    2.0 * inter as f64 / (na + nb) as f64
}

// -- dense morphology oracle -------------------------------------------------
// Direct O(n * |ball|) evaluation with the same conventions as the EDT path:
// dilation unions the in-domain ball, erosion requires the in-domain ball
// to be foreground (out-of-domain offsets are don't-care).

fn ball_offsets(spacing: (f64, f64, f64), r: f64) -> Vec<(i64, i64, i64)> {
    let (rx, ry, rz) = (
        (r / spacing.0).floor() as i64,
        (r / spacing.1).floor() as i64,
        (r / spacing.2).floor() as i64,
    );
    let mut out = Vec::new();
    for dz in -rz..=rz {
        for dy in -ry..=ry {
            for dx in -rx..=rx {
                let sq_x = (spacing.0 * spacing.0) * ((dx * dx) as f64);
                let sq_y = (spacing.1 * spacing.1) * ((dy * dy) as f64);
                let sq_z = (spacing.2 * spacing.2) * ((dz * dz) as f64);
                if sq_z + (sq_y + sq_x) <= r * r {
                    out.push((dx, dy, dz));
                }
            }
        }
    }
    out
}

fn dense_close(
    dims: (usize, usize, usize),
    bits: &[bool],
    spacing: (f64, f64, f64),
    r: f64,
) -> Vec<bool> {
    let ball = ball_offsets(spacing, r);
    let (nx, ny, nz) = dims;
    let at = |b: &[bool], x: i64, y: i64, z: i64| -> Option<bool> {
        if x < 0 || y < 0 || z < 0 || x >= nx as i64 || y >= ny as i64 || z >= nz as i64 {
            None
        } else {
            Some(b[x as usize + nx * (y as usize + ny * z as usize)])
        }
    };
    let mut dil = vec![false; bits.len()];
    for z in 0..nz as i64 {
        for y in 0..ny as i64 {
            for x in 0..nx as i64 {
                let hit = ball
                    .iter()
                    .any(|&(dx, dy, dz)| at(bits, x + dx, y + dy, z + dz) == Some(true));
                dil[x as usize + nx * (y as usize + ny * z as usize)] = hit;
            }
        }
    }
    let mut ero = vec![false; bits.len()];
    for z in 0..nz as i64 {
        for y in 0..ny as i64 {
            for x in 0..nx as i64 {
                let all = ball
                    .iter()
                    .all(|&(dx, dy, dz)| at(&dil, x + dx, y + dy, z + dz) != Some(false));
                ero[x as usize + nx * (y as usize + ny * z as usize)] = all;
            }
        }
    }
    ero
}

// -- metaimage ----------------------------------------------------------------

#[test]
fn metaimage_identity_round_trip() {
    let dims = (4, 4, 2);
    let data: Vec<i16> = (0..32).map(|i| (i * 7 - 100) as i16).collect();
    let scan = ScanVolume::new(dims, (0.7, 0.7, 1.25), (-100.0, -120.5, 42.0), data).unwrap();
    let dir = tempfile::tempdir().unwrap();

    for name in ["vol.mhd", "vol.mha"] {
        let path = dir.path().join(name);
        scan.write_metaimage(&path).unwrap();
        let back = ScanVolume::read_metaimage(&path).unwrap();
        assert_eq!(back, scan);
    }
}

#[test]
fn metaimage_write_read_write_is_byte_identical() {
    let dims = (5, 3, 4);
    let data: Vec<i16> = (0..60).map(|i| (i as i16) * 13 - 500).collect();
    let scan = ScanVolume::new(dims, (0.67, 0.67, 1.29), (-12.5, 3.0, 0.0), data).unwrap();
    let dir = tempfile::tempdir().unwrap();

    let p1 = dir.path().join("a.mhd");
    let p2 = dir.path().join("b.mhd");
    scan.write_metaimage(&p1).unwrap();
    ScanVolume::read_metaimage(&p1).unwrap().write_metaimage(&p2).unwrap();
    // header bytes differ only in the data file name; compare after rename
    let h1 = std::fs::read_to_string(&p1).unwrap().replace("a.raw", "X.raw");
    let h2 = std::fs::read_to_string(&p2).unwrap().replace("b.raw", "X.raw");
    assert_eq!(h1, h2);
    assert_eq!(
        std::fs::read(dir.path().join("a.raw")).unwrap(),
        std::fs::read(dir.path().join("b.raw")).unwrap()
    );

    let m1 = dir.path().join("a.mha");
    let m2 = dir.path().join("b.mha");
    scan.write_metaimage(&m1).unwrap();
    ScanVolume::read_metaimage(&m1).unwrap().write_metaimage(&m2).unwrap();
    assert_eq!(std::fs::read(&m1).unwrap(), std::fs::read(&m2).unwrap());
}

#[test]
fn metaimage_missing_spacing_is_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.mhd");
    std::fs::write(
        &path,
        "NDims = 3\nDimSize = 2 2 2\nOffset = 0 0 0\nElementType = MET_SHORT\nElementDataFile = bad.raw\n",
    )
    .unwrap();
    std::fs::write(dir.path().join("bad.raw"), vec![0u8; 16]).unwrap();
    match ScanVolume::read_metaimage(&path) {
        Err(Error::Format(msg)) => assert!(msg.contains("ElementSpacing")),
        other => panic!("expected format error, got {other:?}"),
    }
}

#[test]
fn metaimage_payload_length_mismatch_is_corrupt() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.mhd");
    std::fs::write(
        &path,
        "NDims = 3\nDimSize = 2 2 2\nElementSpacing = 1 1 1\nOffset = 0 0 0\nElementType = MET_SHORT\nElementDataFile = short.raw\n",
    )
    .unwrap();
    std::fs::write(dir.path().join("short.raw"), vec![0u8; 10]).unwrap();
    assert!(matches!(ScanVolume::read_metaimage(&path), Err(Error::Corrupt(_))));
}

#[test]
fn metaimage_unsupported_element_type() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("double.mhd");
    std::fs::write(
        &path,
        "NDims = 3\nDimSize = 1 1 1\nElementSpacing = 1 1 1\nOffset = 0 0 0\nElementType = MET_DOUBLE\nElementDataFile = double.raw\n",
    )
    .unwrap();
    assert!(matches!(ScanVolume::read_metaimage(&path), Err(Error::Unsupported(_))));
}

#[test]
fn metaimage_big_endian_payload_is_decoded() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("be.mhd");
    std::fs::write(
        &path,
        "NDims = 3\nDimSize = 2 1 1\nElementSpacing = 1 1 1\nOffset = 0 0 0\nElementType = MET_SHORT\nElementByteOrderMSB = True\nElementDataFile = be.raw\n",
    )
    .unwrap();
    std::fs::write(dir.path().join("be.raw"), [0x01, 0x02, 0xff, 0xfe]).unwrap();
    let scan = ScanVolume::read_metaimage(&path).unwrap();
    assert_eq!(scan.data(), &[0x0102, -2]);
}

#[test]
fn mask_metaimage_round_trip() {
    let (scan, _) = two_lung_phantom();
    let mask = estimate_lung_mask(&scan, DEFAULT_HU_THRESHOLD, 3.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mask.mhd");
    mask.write_metaimage(&path, scan.spacing(), scan.origin()).unwrap();
    let back = LungMask::read_metaimage(&path).unwrap();
    assert_eq!(back.bits(), mask.bits());
    assert_eq!(back.split_x(), mask.split_x());
}

// -- world/voxel conversion ----------------------------------------------------

#[test]
fn world_voxel_round_trip_within_half_voxel() {
    let scan =
        ScanVolume::new((10, 12, 8), (0.7, 0.8, 2.5), (-35.0, 10.0, -4.0), vec![0; 960]).unwrap();
    for v in [(0usize, 0usize, 0usize), (9, 11, 7), (3, 5, 2)] {
        let w = scan.voxel_to_world(v);
        assert_eq!(scan.world_to_voxel(w), Some(v));
        // perturb by just under half a voxel in every axis
        let w2 = (w.0 + 0.49 * 0.7, w.1 - 0.49 * 0.8, w.2 + 0.49 * 2.5);
        assert_eq!(scan.world_to_voxel(w2), Some(v));
    }
    assert_eq!(scan.world_to_voxel((1000.0, 0.0, 0.0)), None);
}

// -- lung mask -------------------------------------------------------------------

#[test]
fn phantom_mask_recovers_ellipsoids() {
    let (scan, truth) = two_lung_phantom();
    let mask = estimate_lung_mask(&scan, DEFAULT_HU_THRESHOLD, 5.0).unwrap();
    assert!(dice(mask.bits(), &truth) >= 0.95, "dice = {}", dice(mask.bits(), &truth));
}

#[test]
fn uniform_volume_yields_empty_mask_error() {
    let scan = ScanVolume::new((8, 8, 8), (1.0, 1.0, 1.0), (0.0, 0.0, 0.0), vec![0; 512]).unwrap();
    assert!(matches!(estimate_lung_mask(&scan, -400.0, 5.0), Err(Error::EmptyMask)));
}

#[test]
fn border_connected_air_is_removed() {
    // air everywhere except a small body block in the middle: the outside
    // air touches the x/y borders and must vanish, leaving only the air
    // pocket enclosed by the body.
    let dims = (24, 24, 8);
    let mut data = vec![-1000i16; ds(dims)];
    for z in 0..8 {
        for y in 4..20 {
            for x in 4..20 {
                data[x + 24 * (y + 24 * z)] = 0;
            }
        }
    }
    // pocket inside the body
    for z in 2..6 {
        for y in 10..14 {
            for x in 10..14 {
                data[x + 24 * (y + 24 * z)] = -1000;
            }
        }
    }
    let scan = ScanVolume::new(dims, (1.0, 1.0, 1.0), (0.0, 0.0, 0.0), data).unwrap();
    let mask = estimate_lung_mask(&scan, -400.0, 0.0).unwrap();
    assert_eq!(mask.volume(), 4 * 4 * 4);
    assert!(mask.contains(11, 11, 3));
    assert!(!mask.contains(0, 0, 0));
}

#[test]
fn vessel_hole_is_filled_by_closing() {
    let dims = (64, 64, 64);
    let mut data = vec![0i16; ds(dims)];
    fill_ellipsoid(&mut data, dims, (16.0, 32.0, 32.0), (10.0, 14.0, 20.0), -1000);
    fill_ellipsoid(&mut data, dims, (48.0, 32.0, 32.0), (10.0, 14.0, 20.0), -1000);
    // 4 mm vessel through the low-x ellipsoid, along y
    for y in 0..dims.1 {
        for z in 30..34 {
            for x in 14..18 {
                let dx = (x as f64 - 16.0) / 10.0;
                let dz = (z as f64 - 32.0) / 20.0;
                if dx * dx + dz * dz <= 1.0 {
                    data[x + dims.0 * (y + dims.1 * z)] = 60;
                }
            }
        }
    }
    let holey: Vec<bool> = data.iter().map(|&v| v == -1000).collect();
    let scan = ScanVolume::new(dims, (1.0, 1.0, 1.0), (0.0, 0.0, 0.0), data).unwrap();
    let mask = estimate_lung_mask(&scan, -400.0, 3.0).unwrap();

    // matches the dense morphological oracle exactly
    let oracle = dense_close(dims, &holey, (1.0, 1.0, 1.0), 3.0);
    assert_eq!(mask.bits(), &oracle[..]);

    // and fills the vessel hole (deep interior voxel of the hole)
    assert!(mask.contains(16, 32, 32));
    // superset of the holey input
    assert!(holey.iter().zip(mask.bits()).all(|(&h, &m)| !h || m));
}

#[test]
fn closing_matches_dense_oracle_anisotropic() {
    let dims = (20, 16, 12);
    let mut bits = vec![false; ds(dims)];
    // an L-shaped blob with a notch
    for z in 3..9 {
        for y in 3..12 {
            for x in 3..14 {
                if !(x > 7 && x < 10 && y > 5 && y < 10) {
                    bits[x + dims.0 * (y + dims.1 * z)] = true;
                }
            }
        }
    }
    let spacing = (0.8, 1.1, 2.0);
    for r in [0.0, 1.0, 2.45, 3.9] {
        let fast = close_binary(dims, &bits, spacing, r);
        let slow = dense_close(dims, &bits, spacing, r);
        assert_eq!(fast, slow, "radius {r}");
    }
}

#[test]
fn dilate_erode_match_dense_oracle() {
    let dims = (11, 9, 7);
    let mut bits = vec![false; ds(dims)];
    for &(x, y, z) in &[(5usize, 4usize, 3usize), (2, 2, 1), (9, 7, 5), (5, 5, 3)] {
        bits[x + dims.0 * (y + dims.1 * z)] = true;
    }
    let spacing = (1.0, 1.0, 1.5);
    let r = 2.2;
    let ball = ball_offsets(spacing, r);
    let (nx, ny, nz) = dims;

    let dil = dilate_binary(dims, &bits, spacing, r);
    for z in 0..nz as i64 {
        for y in 0..ny as i64 {
            for x in 0..nx as i64 {
                let want = ball.iter().any(|&(dx, dy, dz)| {
                    let (px, py, pz) = (x + dx, y + dy, z + dz);
                    px >= 0
                        && py >= 0
                        && pz >= 0
                        && px < nx as i64
                        && py < ny as i64
                        && pz < nz as i64
                        && bits[px as usize + nx * (py as usize + ny * pz as usize)]
                });
                assert_eq!(dil[x as usize + nx * (y as usize + ny * z as usize)], want);
            }
        }
    }

    let ero = erode_binary(dims, &dil, spacing, r);
    for z in 0..nz as i64 {
        for y in 0..ny as i64 {
            for x in 0..nx as i64 {
                let want = ball.iter().all(|&(dx, dy, dz)| {
                    let (px, py, pz) = (x + dx, y + dy, z + dz);
                    if px < 0 || py < 0 || pz < 0 || px >= nx as i64 || py >= ny as i64 || pz >= nz as i64
                    {
                        true
                    } else {
                        dil[px as usize + nx * (py as usize + ny * pz as usize)]
                    }
                });
                assert_eq!(ero[x as usize + nx * (y as usize + ny * z as usize)], want);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn closing_is_idempotent(
        seeds in proptest::collection::hash_set((0usize..10, 0usize..8, 0usize..6), 1..20),
        r in 0.5f64..3.0,
    ) {
        let dims = (10, 8, 6);
        let mut bits = vec![false; ds(dims)];
        for (x, y, z) in &seeds {
            bits[x + dims.0 * (y + dims.1 * z)] = true;
        }
        let spacing = (1.0, 1.0, 1.0);
        let once = close_binary(dims, &bits, spacing, r);
        let twice = close_binary(dims, &once, spacing, r);
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn closing_is_extensive(
        seeds in proptest::collection::hash_set((0usize..10, 0usize..8, 0usize..6), 1..20),
        r in 0.5f64..3.0,
    ) {
        let dims = (10, 8, 6);
        let mut bits = vec![false; ds(dims)];
        for (x, y, z) in &seeds {
            bits[x + dims.0 * (y + dims.1 * z)] = true;
        }
        let closed = close_binary(dims, &bits, (1.0, 1.0, 1.0), r);
        prop_assert!(bits.iter().zip(&closed).all(|(&b, &c)| !b || c));
    }
}

// -- sides ------------------------------------------------------------------------

#[test]
fn side_of_definition_and_boundary() {
    let dims = (64, 4, 4);
    let mut bits = vec![false; ds(dims)];
    // extents chosen so split lands on 32
    for x in [6usize, 58usize] {
        bits[x + 64 * (2 + 4 * 2)] = true;
    }
    let mut mask = LungMask::from_bits(dims, bits).unwrap();
    assert_eq!(mask.split_x(), 32);
    assert_eq!(mask.side_of(10, 0, 0).unwrap(), Side::Right);
    assert_eq!(mask.side_of(32, 0, 0).unwrap(), Side::Left);
    assert!(matches!(mask.side_of(64, 0, 0), Err(Error::OutOfBounds(..))));
    assert!(matches!(mask.side_of(-1, 0, 0), Err(Error::OutOfBounds(..))));

    mask.set_flip_lr(true);
    assert_eq!(mask.side_of(10, 0, 0).unwrap(), Side::Left);
    assert_eq!(mask.side_of(32, 0, 0).unwrap(), Side::Right);
}

#[test]
fn split_x_rounds_half_up() {
    let dims = (8, 1, 1);
    let mut bits = vec![false; 8];
    bits[1] = true;
    bits[4] = true; // mean 2.5 -> 3
    let mask = LungMask::from_bits(dims, bits).unwrap();
    assert_eq!(mask.split_x(), 3);
}

#[test]
fn phantom_split_is_mean_of_extents() {
    let (scan, _) = two_lung_phantom();
    let mask = estimate_lung_mask(&scan, -400.0, 5.0).unwrap();
    // ellipsoid centers at x = 16 and 48 with equal radii: extents are
    // symmetric around 32
    assert_eq!(mask.split_x(), 32);
}

#[test]
fn side_of_partitions_mask() {
    let (scan, _) = two_lung_phantom();
    let mask = estimate_lung_mask(&scan, -400.0, 5.0).unwrap();
    let mut left = 0usize;
    let mut right = 0usize;
    let dims = mask.dims();
    let mut seen = HashSet::new();
    for z in 0..dims.2 {
        for y in 0..dims.1 {
            for x in 0..dims.0 {
                if mask.contains(x as i64, y as i64, z as i64) {
                    match mask.side_of(x as i64, y as i64, z as i64).unwrap() {
                        Side::Left => left += 1,
                        Side::Right => right += 1,
                    }
                    seen.insert((x, y, z));
                }
            }
        }
    }
    assert_eq!(left + right, mask.volume());
    assert_eq!(seen.len(), mask.volume());
    assert!(left > 0 && right > 0);
}

#[test]
fn empty_bits_is_empty_mask_error() {
    assert!(matches!(LungMask::from_bits((4, 4, 4), vec![false; 64]), Err(Error::EmptyMask)));
}
