//! Binary morphology on anisotropic voxel grids.
//!
//! Dilation and erosion are computed from the exact anisotropic squared
//! Euclidean distance transform (Felzenszwalb-Huttenlocher lower envelope,
//! one pass per axis), so closing with a physical-radius ball costs O(n)
//! regardless of the element size. Erosion treats out-of-volume neighbours
//! as foreground (clipped element), which makes closing extensive and
//! idempotent on the bounded grid.

const INF: f64 = f64::MAX / 4.0;

/// 1D squared distance transform under d(i, j) = w2 * (i - j)^2 + f(j).
fn dt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64], w2: f64) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = -INF;
    z[1] = INF;
    for q in 1..n {
        if f[q] >= INF {
            continue;
        }
        loop {
            if f[v[k]] >= INF {
                // No finite parabola yet; adopt q as the first.
                if k == 0 {
                    v[0] = q;
                    z[0] = -INF;
                    z[1] = INF;
                    break;
                }
                k -= 1;
                continue;
            }
            let p = v[k];
            let s = ((f[q] + w2 * (q * q) as f64) - (f[p] + w2 * (p * p) as f64))
                / (2.0 * w2 * (q as f64 - p as f64));
            if s <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[0] = -INF;
                    z[1] = INF;
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = INF;
                break;
            }
        }
    }
    let mut k = 0usize;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        d[q] = if f[p] >= INF { INF } else { w2 * ((q as f64 - p as f64) * (q as f64 - p as f64)) + f[p] };
    }
}

/// Exact squared Euclidean distance (in mm^2) from every voxel to the
/// nearest seed voxel, honouring per-axis spacing.
pub fn squared_edt(
    dims: (usize, usize, usize),
    seeds: &[bool],
    spacing: (f64, f64, f64),
) -> Vec<f64> {
    let (nx, ny, nz) = dims;
    assert_eq!(seeds.len(), nx * ny * nz);
    let mut dist: Vec<f64> = seeds.iter().map(|&s| if s { 0.0 } else { INF }).collect();

    let max_len = nx.max(ny).max(nz);
    let mut f = vec![0.0; max_len];
    let mut d = vec![0.0; max_len];
    let mut v = vec![0usize; max_len];
    let mut z = vec![0.0; max_len + 1];

    // x pass (contiguous rows)
    let w2 = spacing.0 * spacing.0;
    for row in dist.chunks_mut(nx) {
        f[..nx].copy_from_slice(row);
        dt_1d(&f[..nx], &mut d[..nx], &mut v[..nx], &mut z[..nx + 1], w2);
        row.copy_from_slice(&d[..nx]);
    }

    // y pass (stride nx within each z slab)
    let w2 = spacing.1 * spacing.1;
    for zidx in 0..nz {
        let slab = zidx * nx * ny;
        for x in 0..nx {
            for y in 0..ny {
                f[y] = dist[slab + x + nx * y];
            }
            dt_1d(&f[..ny], &mut d[..ny], &mut v[..ny], &mut z[..ny + 1], w2);
            for y in 0..ny {
                dist[slab + x + nx * y] = d[y];
            }
        }
    }

    // z pass (stride nx*ny)
    let w2 = spacing.2 * spacing.2;
    let slab = nx * ny;
    for y in 0..ny {
        for x in 0..nx {
            let base = x + nx * y;
            for zi in 0..nz {
                f[zi] = dist[base + slab * zi];
            }
            dt_1d(&f[..nz], &mut d[..nz], &mut v[..nz], &mut z[..nz + 1], w2);
            for zi in 0..nz {
                dist[base + slab * zi] = d[zi];
            }
        }
    }

    dist
}

/// Dilate by the discrete ball of physical radius `radius_mm`.
pub fn dilate_binary(
    dims: (usize, usize, usize),
    bits: &[bool],
    spacing: (f64, f64, f64),
    radius_mm: f64,
) -> Vec<bool> {
    let r2 = radius_mm * radius_mm;
    squared_edt(dims, bits, spacing).iter().map(|&d| d <= r2).collect()
}

/// Erode by the discrete ball of physical radius `radius_mm`
/// (out-of-volume neighbours count as foreground).
pub fn erode_binary(
    dims: (usize, usize, usize),
    bits: &[bool],
    spacing: (f64, f64, f64),
    radius_mm: f64,
) -> Vec<bool> {
    let r2 = radius_mm * radius_mm;
    let background: Vec<bool> = bits.iter().map(|&b| !b).collect();
    if !background.iter().any(|&b| b) {
        return bits.to_vec();
    }
    squared_edt(dims, &background, spacing).iter().map(|&d| d > r2).collect()
}

/// Morphological closing (dilation then erosion) with a ball of physical
/// radius `radius_mm`, converted per axis through the voxel spacing.
pub fn close_binary(
    dims: (usize, usize, usize),
    bits: &[bool],
    spacing: (f64, f64, f64),
    radius_mm: f64,
) -> Vec<bool> {
    if radius_mm <= 0.0 {
        return bits.to_vec();
    }
    let dilated = dilate_binary(dims, bits, spacing, radius_mm);
    erode_binary(dims, &dilated, spacing, radius_mm)
}
