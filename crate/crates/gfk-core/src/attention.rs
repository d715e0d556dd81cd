//! Attention volumes: zoom-dependent Gaussian splatting of gaze points.
//!
//! Every gaze sample deposits one foveal kernel on its slice; kernels are
//! 2D (no cross-slice spread), truncated at 3 sigma and normalized to sum
//! to exactly 1/f seconds, so each voxel of the result estimates observed
//! seconds. Mass clipped at volume borders is dropped, not renormalized.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaze::{MappedPoint, ViewportState, VoxelGazePoint};
use crate::volume::{ElementType, LungMask, MhdHeader, ScanVolume};

/// Physical diameter of the foveal circle on screen, in mm (5.2 cm).
pub const FOVEAL_DIAMETER_MM: f64 = 52.0;

/// Kernel sigmas are quantized to this grid (in voxels) for caching;
/// distinct zoom levels map to distinct quantized sigmas.
pub const SIGMA_QUANTUM_VOX: f64 = 1e-3;

/// Kernel spread in scan voxels for a viewport: 6 sigma covers the foveal
/// diameter, so sigma = (52 mm / px_pitch) / zoom / 6.
pub fn sigma_for_zoom(zoom: f64, px_pitch: f64) -> Result<f64> {
    if zoom <= 0.0 || !zoom.is_finite() {
        return Err(Error::Parameter(format!("zoom must be positive, got {zoom}")));
    }
    if px_pitch <= 0.0 || !px_pitch.is_finite() {
        return Err(Error::Parameter(format!("px_pitch must be positive, got {px_pitch}")));
    }
    Ok(FOVEAL_DIAMETER_MM / px_pitch / zoom / 6.0)
}

fn quantize_sigma(sigma: f64) -> f64 {
    ((sigma / SIGMA_QUANTUM_VOX).round() * SIGMA_QUANTUM_VOX).max(SIGMA_QUANTUM_VOX)
}

/// Discrete 2D Gaussian, circularly truncated at 3 sigma, normalized so the
/// weights sum to exactly `1/f`.
#[derive(Debug, Clone)]
pub struct FovealKernel {
    sigma_vox: f64,
    support_radius_vox: usize,
    /// (2R+1)^2 row-major weights.
    weights: Vec<f64>,
    /// Audit value: fraction of the untruncated discrete Gaussian mass that
    /// fell inside the 3-sigma support before renormalization.
    captured_mass: f64,
}

impl FovealKernel {
    pub fn new(sigma_vox: f64, f: f64) -> Result<Self> {
        if sigma_vox <= 0.0 || !sigma_vox.is_finite() {
            return Err(Error::Parameter(format!("sigma must be positive, got {sigma_vox}")));
        }
        if f <= 0.0 || !f.is_finite() {
            return Err(Error::Parameter(format!("sampling frequency must be positive, got {f}")));
        }
        let r = (3.0 * sigma_vox).ceil() as usize;
        let side = 2 * r + 1;
        let cutoff2 = (3.0 * sigma_vox) * (3.0 * sigma_vox);
        let inv_two_sigma2 = 1.0 / (2.0 * sigma_vox * sigma_vox);

        let mut weights = vec![0.0; side * side];
        let mut truncated_sum = 0.0;
        for dy in -(r as i64)..=(r as i64) {
            for dx in -(r as i64)..=(r as i64) {
                let d2 = (dx * dx + dy * dy) as f64;
                if d2 <= cutoff2 {
                    let w = (-d2 * inv_two_sigma2).exp();
                    weights[(dy + r as i64) as usize * side + (dx + r as i64) as usize] = w;
                    truncated_sum += w;
                }
            }
        }
        // Untruncated discrete mass over a support wide enough that the
        // remainder is negligible.
        let r_full = (8.0 * sigma_vox).ceil().max(r as f64 + 2.0) as i64;
        let mut full_sum = 0.0;
        for dy in -r_full..=r_full {
            for dx in -r_full..=r_full {
                full_sum += (-((dx * dx + dy * dy) as f64) * inv_two_sigma2).exp();
            }
        }

        let scale = 1.0 / f / truncated_sum;
        for w in &mut weights {
            *w *= scale;
        }
        Ok(FovealKernel {
            sigma_vox,
            support_radius_vox: r,
            weights,
            captured_mass: truncated_sum / full_sum,
        })
    }

    pub fn sigma_vox(&self) -> f64 {
        self.sigma_vox
    }

    pub fn support_radius_vox(&self) -> usize {
        self.support_radius_vox
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn captured_mass(&self) -> f64 {
        self.captured_mass
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Gaze points sharing one kernel spread (one zoom level).
#[derive(Debug, Clone)]
pub struct GazeGroup {
    pub sigma_vox: f64,
    pub points: Vec<VoxelGazePoint>,
}

/// Group mapped gaze points by their quantized kernel sigma.
pub fn group_by_sigma(mapped: &[MappedPoint], states: &[ViewportState]) -> Result<Vec<GazeGroup>> {
    let mut groups: BTreeMap<u64, GazeGroup> = BTreeMap::new();
    for m in mapped {
        let state = states.get(m.state_idx).ok_or_else(|| {
            Error::Parameter(format!("mapped point references missing state {}", m.state_idx))
        })?;
        let sigma = quantize_sigma(sigma_for_zoom(state.zoom, state.px_pitch)?);
        let key = (sigma / SIGMA_QUANTUM_VOX).round() as u64;
        groups
            .entry(key)
            .or_insert_with(|| GazeGroup { sigma_vox: sigma, points: Vec::new() })
            .points
            .push(m.point);
    }
    Ok(groups.into_values().collect())
}

/// Per-voxel estimated observation time, in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionVolume {
    dims: (usize, usize, usize),
    values: Vec<f64>,
    total_mass: f64,
    f: f64,
}

/// Voxel region to reduce attention over. Cylinders are elliptical in voxel
/// units so physical circles survive anisotropic in-plane spacing.
#[derive(Debug, Clone)]
pub enum Region<'a> {
    All,
    Box { x: Range<usize>, y: Range<usize>, z: Range<usize> },
    CylinderZ { center_x_vox: f64, center_y_vox: f64, radius_x_vox: f64, radius_y_vox: f64, z: Range<usize> },
    Mask(&'a LungMask),
}

impl AttentionVolume {
    pub fn zeros(dims: (usize, usize, usize), f: f64) -> Self {
        AttentionVolume { dims, values: vec![0.0; dims.0 * dims.1 * dims.2], total_mass: 0.0, f }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sum of all voxel values, in seconds.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Sampling frequency the volume was built with.
    pub fn frequency(&self) -> f64 {
        self.f
    }

    #[inline]
    pub fn value(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[x + self.dims.0 * (y + self.dims.1 * z)]
    }

    /// Sum the attention seconds over a region. Regions reaching outside the
    /// volume are clipped; a fully outside region sums to zero.
    pub fn attention_at(&self, region: &Region) -> f64 {
        let (nx, ny, nz) = self.dims;
        match region {
            Region::All => self.values.iter().sum(),
            Region::Box { x, y, z } => {
                let (x0, x1) = (x.start.min(nx), x.end.min(nx));
                let (y0, y1) = (y.start.min(ny), y.end.min(ny));
                let (z0, z1) = (z.start.min(nz), z.end.min(nz));
                let mut acc = 0.0;
                for zi in z0..z1 {
                    for yi in y0..y1 {
                        let row = nx * (yi + ny * zi);
                        for xi in x0..x1 {
                            acc += self.values[row + xi];
                        }
                    }
                }
                acc
            }
            Region::CylinderZ { center_x_vox, center_y_vox, radius_x_vox, radius_y_vox, z } => {
                if *radius_x_vox <= 0.0 || *radius_y_vox <= 0.0 {
                    return 0.0;
                }
                let (z0, z1) = (z.start.min(nz), z.end.min(nz));
                let x0 = ((center_x_vox - radius_x_vox).floor().max(0.0)) as usize;
                let x1 = (((center_x_vox + radius_x_vox).ceil() + 1.0).min(nx as f64)) as usize;
                let y0 = ((center_y_vox - radius_y_vox).floor().max(0.0)) as usize;
                let y1 = (((center_y_vox + radius_y_vox).ceil() + 1.0).min(ny as f64)) as usize;
                let mut acc = 0.0;
                for zi in z0..z1 {
                    for yi in y0..y1 {
                        let fy = (yi as f64 - center_y_vox) / radius_y_vox;
                        let row = nx * (yi + ny * zi);
                        for xi in x0..x1 {
                            let fx = (xi as f64 - center_x_vox) / radius_x_vox;
                            if fx * fx + fy * fy <= 1.0 {
                                acc += self.values[row + xi];
                            }
                        }
                    }
                }
                acc
            }
            Region::Mask(mask) => {
                debug_assert_eq!(mask.dims(), self.dims);
                self.values
                    .iter()
                    .zip(mask.bits())
                    .filter(|(_, &b)| b)
                    .map(|(&v, _)| v)
                    .sum()
            }
        }
    }

    /// Write as a MET_FLOAT MetaImage plus a `.json` sidecar carrying the
    /// total mass and sampling frequency.
    pub fn write_metaimage(
        &self,
        path: &Path,
        spacing: (f64, f64, f64),
        origin: (f64, f64, f64),
    ) -> Result<()> {
        let header = MhdHeader::for_volume(self.dims, spacing, origin, ElementType::Float);
        let as_f32: Vec<f32> = self.values.iter().map(|&v| v as f32).collect();
        crate::volume::mhd_write(path, &header, &crate::volume::mhd_encode_f32(&as_f32))?;
        let sidecar = path.with_extension("json");
        let meta = AttentionSidecar { total_mass: self.total_mass, f: self.f };
        std::fs::write(
            sidecar,
            serde_json::to_string_pretty(&meta).map_err(|e| Error::Format(e.to_string()))?,
        )?;
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AttentionSidecar {
    pub total_mass: f64,
    pub f: f64,
}

/// Splat gaze groups into an attention volume.
///
/// Accumulation is deterministic: slices are processed independently and
/// points within a slice in (t, x, y) order, so the result is identical
/// across runs and thread counts, and invariant to input permutation.
pub fn splat(groups: &[GazeGroup], f: f64, dims: (usize, usize, usize)) -> Result<AttentionVolume> {
    let (nx, ny, nz) = dims;
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(Error::Parameter(format!("attention dims must be positive, got {dims:?}")));
    }

    let kernels: Vec<FovealKernel> =
        groups.iter().map(|g| FovealKernel::new(g.sigma_vox, f)).collect::<Result<_>>()?;

    // (point, kernel index) per slice
    let mut per_slice: Vec<Vec<(VoxelGazePoint, usize)>> = vec![Vec::new(); nz];
    for (gi, group) in groups.iter().enumerate() {
        for p in &group.points {
            if p.x >= nx || p.y >= ny || p.z >= nz {
                return Err(Error::OutOfBounds(p.x as i64, p.y as i64, p.z as i64, nx, ny, nz));
            }
            per_slice[p.z].push((*p, gi));
        }
    }
    for slice in &mut per_slice {
        slice.sort_by(|a, b| {
            a.0.t
                .total_cmp(&b.0.t)
                .then(a.0.x.cmp(&b.0.x))
                .then(a.0.y.cmp(&b.0.y))
                .then(a.1.cmp(&b.1))
        });
    }

    let mut values = vec![0.0f64; nx * ny * nz];
    values
        .par_chunks_mut(nx * ny)
        .zip(per_slice.par_iter())
        .for_each(|(slice_values, points)| {
            for &(p, gi) in points {
                let kernel = &kernels[gi];
                let r = kernel.support_radius_vox as i64;
                let side = 2 * kernel.support_radius_vox + 1;
                let (px, py) = (p.x as i64, p.y as i64);
                let y_lo = (py - r).max(0);
                let y_hi = (py + r).min(ny as i64 - 1);
                let x_lo = (px - r).max(0);
                let x_hi = (px + r).min(nx as i64 - 1);
                for y in y_lo..=y_hi {
                    let krow = ((y - py + r) as usize) * side;
                    let vrow = nx * y as usize;
                    for x in x_lo..=x_hi {
                        slice_values[vrow + x as usize] +=
                            kernel.weights[krow + (x - px + r) as usize];
                    }
                }
            }
        });

    let total_mass = values.iter().sum();
    Ok(AttentionVolume { dims, values, total_mass, f })
}

/// Map + group + splat in one call for a parsed session.
pub fn build_attention(
    mapped: &[MappedPoint],
    states: &[ViewportState],
    scan: &ScanVolume,
    f: f64,
) -> Result<AttentionVolume> {
    let groups = group_by_sigma(mapped, states)?;
    splat(&groups, f, scan.dims())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn point(x: usize, y: usize, z: usize, t: f64) -> VoxelGazePoint {
        VoxelGazePoint { t, x, y, z }
    }

    /// Dense per-voxel oracle: direct Gaussian-sum evaluation with its own
    /// normalization pass, independent of the kernel/deposit machinery.
    fn dense_oracle(groups: &[GazeGroup], f: f64, dims: (usize, usize, usize)) -> Vec<f64> {
        let (nx, ny, nz) = dims;
        let mut out = vec![0.0f64; nx * ny * nz];
        for g in groups {
            let sigma = g.sigma_vox;
            let cutoff2 = (3.0 * sigma) * (3.0 * sigma);
            let r = (3.0 * sigma).ceil() as i64;
            let mut norm = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let d2 = (dx * dx + dy * dy) as f64;
                    if d2 <= cutoff2 {
                        norm += (-d2 / (2.0 * sigma * sigma)).exp();
                    }
                }
            }
            for p in &g.points {
                for y in 0..ny as i64 {
                    for x in 0..nx as i64 {
                        let d2 = ((x - p.x as i64).pow(2) + (y - p.y as i64).pow(2)) as f64;
                        if d2 <= cutoff2 {
                            out[x as usize + nx * (y as usize + ny * p.z)] +=
                                (-d2 / (2.0 * sigma * sigma)).exp() / norm / f;
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn sigma_for_zoom_direct_substitution() {
        assert_relative_eq!(sigma_for_zoom(2.0, 0.26).unwrap(), 52.0 / 0.26 / 2.0 / 6.0);
        assert_relative_eq!(sigma_for_zoom(2.0, 0.26).unwrap(), 16.666666666666668);
        assert_relative_eq!(sigma_for_zoom(1.0, 0.26).unwrap(), 33.333333333333336);
    }

    #[test]
    fn doubling_zoom_halves_sigma() {
        let s1 = sigma_for_zoom(2.0, 0.3).unwrap();
        let s2 = sigma_for_zoom(4.0, 0.3).unwrap();
        assert_relative_eq!(s1, 2.0 * s2);
    }

    #[test]
    fn non_positive_zoom_or_pitch_is_parameter_error() {
        assert!(matches!(sigma_for_zoom(0.0, 0.26), Err(Error::Parameter(_))));
        assert!(matches!(sigma_for_zoom(2.0, -1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn kernel_sums_to_one_over_f() {
        for &(sigma, f) in &[(1.0, 90.0), (2.5, 90.0), (16.667, 60.0), (0.4, 30.0)] {
            let k = FovealKernel::new(sigma, f).unwrap();
            assert_relative_eq!(k.weight_sum(), 1.0 / f, max_relative = 1e-12);
            assert_eq!(k.support_radius_vox(), (3.0 * sigma).ceil() as usize);
            assert!(k.captured_mass() > 0.9 && k.captured_mass() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn kernel_is_radially_symmetric() {
        let k = FovealKernel::new(2.0, 90.0).unwrap();
        let r = k.support_radius_vox();
        let side = 2 * r + 1;
        let w = |dx: i64, dy: i64| k.weights()[(dy + r as i64) as usize * side + (dx + r as i64) as usize];
        for (dx, dy) in [(1i64, 0i64), (2, 3), (0, 4), (3, 3)] {
            assert_eq!(w(dx, dy), w(-dx, dy));
            assert_eq!(w(dx, dy), w(dx, -dy));
            assert_eq!(w(dx, dy), w(dy, dx));
        }
    }

    #[test]
    fn single_interior_point_conserves_mass() {
        let groups =
            vec![GazeGroup { sigma_vox: 2.0, points: vec![point(32, 32, 4, 0.0)] }];
        let att = splat(&groups, 90.0, (64, 64, 8)).unwrap();
        assert_relative_eq!(att.total_mass(), 1.0 / 90.0, max_relative = 0.003);
        assert_relative_eq!(att.total_mass(), 1.0 / 90.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_points_yield_zero_volume() {
        let att = splat(&[], 90.0, (16, 16, 4)).unwrap();
        assert_eq!(att.total_mass(), 0.0);
        assert!(att.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn many_interior_points_conserve_mass() {
        // 450 points at f = 90 Hz is 5 seconds of gaze
        let pts: Vec<VoxelGazePoint> = (0..450)
            .map(|i| point(20 + (i % 21), 20 + (i % 17), i % 8, i as f64 / 90.0))
            .collect();
        let groups = vec![GazeGroup { sigma_vox: 1.5, points: pts }];
        let att = splat(&groups, 90.0, (64, 64, 8)).unwrap();
        assert_relative_eq!(att.total_mass(), 5.0, max_relative = 0.003);
    }

    #[test]
    fn splat_matches_dense_oracle() {
        let groups = vec![
            GazeGroup {
                sigma_vox: 1.25,
                points: (0..40).map(|i| point(5 + i % 20, 4 + i % 15, i % 4, i as f64)).collect(),
            },
            GazeGroup {
                sigma_vox: 3.0,
                points: (0..25).map(|i| point(2 + i % 28, 1 + i % 20, (i + 1) % 4, i as f64)).collect(),
            },
        ];
        let dims = (32, 24, 4);
        let att = splat(&groups, 90.0, dims).unwrap();
        let oracle = dense_oracle(&groups, 90.0, dims);
        for (a, b) in att.values().iter().zip(&oracle) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn border_clipped_mass_is_dropped_not_renormalized() {
        let groups = vec![GazeGroup { sigma_vox: 2.0, points: vec![point(0, 0, 0, 0.0)] }];
        let att = splat(&groups, 90.0, (32, 32, 2)).unwrap();
        assert!(att.total_mass() < 1.0 / 90.0 * 0.5);
        let oracle = dense_oracle(&groups, 90.0, (32, 32, 2));
        assert_abs_diff_eq!(att.total_mass(), oracle.iter().sum::<f64>(), epsilon = 1e-12);
    }

    #[test]
    fn splat_is_permutation_invariant() {
        let mut pts: Vec<VoxelGazePoint> =
            (0..60).map(|i| point(3 + i % 25, 2 + (i * 7) % 19, i % 3, i as f64 * 0.011)).collect();
        let groups_fwd = vec![GazeGroup { sigma_vox: 1.7, points: pts.clone() }];
        pts.reverse();
        let groups_rev = vec![GazeGroup { sigma_vox: 1.7, points: pts }];
        let a = splat(&groups_fwd, 90.0, (32, 24, 3)).unwrap();
        let b = splat(&groups_rev, 90.0, (32, 24, 3)).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn out_of_bounds_point_is_rejected() {
        let groups = vec![GazeGroup { sigma_vox: 1.0, points: vec![point(40, 0, 0, 0.0)] }];
        assert!(matches!(splat(&groups, 90.0, (32, 32, 2)), Err(Error::OutOfBounds(..))));
    }

    #[test]
    fn attention_at_linearity() {
        let groups = vec![GazeGroup {
            sigma_vox: 1.2,
            points: (0..50).map(|i| point(8 + i % 16, 8 + i % 12, i % 4, i as f64)).collect(),
        }];
        let att = splat(&groups, 90.0, (32, 32, 4)).unwrap();

        let all = att.attention_at(&Region::All);
        assert_relative_eq!(all, att.total_mass(), max_relative = 1e-12);

        let left = att.attention_at(&Region::Box { x: 0..16, y: 0..32, z: 0..4 });
        let right = att.attention_at(&Region::Box { x: 16..32, y: 0..32, z: 0..4 });
        assert_relative_eq!(left + right, all, max_relative = 1e-12);

        // fully out-of-bounds region sums to zero
        let outside = att.attention_at(&Region::Box { x: 40..50, y: 0..32, z: 0..4 });
        assert_eq!(outside, 0.0);
    }

    #[test]
    fn attention_at_uniform_region() {
        let mut att = AttentionVolume::zeros((10, 10, 2), 90.0);
        for v in &mut att.values {
            *v = 0.25;
        }
        att.total_mass = att.values.iter().sum();
        let got = att.attention_at(&Region::Box { x: 2..6, y: 3..5, z: 0..2 });
        assert_relative_eq!(got, 0.25 * 4.0 * 2.0 * 2.0, max_relative = 1e-12);

        // cylinder over a uniform field counts voxel centers inside the ellipse
        let cyl = Region::CylinderZ {
            center_x_vox: 5.0,
            center_y_vox: 5.0,
            radius_x_vox: 2.0,
            radius_y_vox: 2.0,
            z: 0..1,
        };
        let count = (0..10)
            .flat_map(|y| (0..10).map(move |x| (x, y)))
            .filter(|&(x, y)| {
                let fx = (x as f64 - 5.0) / 2.0;
                let fy = (y as f64 - 5.0) / 2.0;
                fx * fx + fy * fy <= 1.0
            })
            .count();
        assert_relative_eq!(att.attention_at(&cyl), 0.25 * count as f64, max_relative = 1e-12);
    }

    #[test]
    fn group_by_sigma_quantizes_and_groups() {
        use crate::gaze::WinRect;
        let mk_state = |zoom: f64| ViewportState {
            t: 0.0,
            z: 0,
            zoom,
            pan: (0.0, 0.0),
            win: WinRect { left: 0.0, top: 0.0, width: 100.0, height: 100.0 },
            px_pitch: 0.26,
            annotating: false,
        };
        let states = vec![mk_state(2.0), mk_state(2.0), mk_state(4.0)];
        let mapped = vec![
            MappedPoint { point: point(1, 1, 0, 0.0), state_idx: 0 },
            MappedPoint { point: point(2, 2, 0, 0.1), state_idx: 1 },
            MappedPoint { point: point(3, 3, 0, 0.2), state_idx: 2 },
        ];
        let groups = group_by_sigma(&mapped, &states).unwrap();
        assert_eq!(groups.len(), 2);
        // sorted by sigma: zoom 4 has the smaller kernel
        assert!(groups[0].sigma_vox < groups[1].sigma_vox);
        assert_eq!(groups[0].points.len(), 1);
        assert_eq!(groups[1].points.len(), 2);
        assert_abs_diff_eq!(groups[1].sigma_vox, 16.667, epsilon = 1e-9);
    }

    #[test]
    fn attention_metaimage_writes_sidecar() {
        let groups = vec![GazeGroup { sigma_vox: 1.0, points: vec![point(8, 8, 1, 0.0)] }];
        let att = splat(&groups, 90.0, (16, 16, 2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("att.mhd");
        att.write_metaimage(&path, (1.0, 1.0, 1.0), (0.0, 0.0, 0.0)).unwrap();
        let sidecar: AttentionSidecar =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("att.json")).unwrap())
                .unwrap();
        assert_relative_eq!(sidecar.total_mass, att.total_mass());
        assert_eq!(sidecar.f, 90.0);
        assert!(dir.path().join("att.raw").exists());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn adding_a_point_never_decreases_any_voxel(
            base in proptest::collection::vec((0usize..24, 0usize..20, 0usize..3), 1..30),
            extra in (0usize..24, 0usize..20, 0usize..3),
        ) {
            let dims = (24, 20, 3);
            let mk = |pts: &[(usize, usize, usize)]| {
                vec![GazeGroup {
                    sigma_vox: 1.4,
                    points: pts
                        .iter()
                        .enumerate()
                        .map(|(i, &(x, y, z))| point(x, y, z, i as f64))
                        .collect(),
                }]
            };
            let a = splat(&mk(&base), 90.0, dims).unwrap();
            let mut with_extra = base.clone();
            with_extra.push(extra);
            let b = splat(&mk(&with_extra), 90.0, dims).unwrap();
            for (va, vb) in a.values().iter().zip(b.values()) {
                prop_assert!(vb >= va);
            }
            prop_assert!(b.total_mass() >= a.total_mass());
        }

        #[test]
        fn interior_points_conserve_mass_exactly(
            pts in proptest::collection::vec((8usize..24, 8usize..24, 0usize..4), 1..50),
        ) {
            let groups = vec![GazeGroup {
                sigma_vox: 1.1,
                points: pts
                    .iter()
                    .enumerate()
                    .map(|(i, &(x, y, z))| point(x, y, z, i as f64))
                    .collect(),
            }];
            let att = splat(&groups, 90.0, (32, 32, 4)).unwrap();
            let expected = pts.len() as f64 / 90.0;
            prop_assert!((att.total_mass() - expected).abs() / expected <= 0.005);
        }
    }
}
