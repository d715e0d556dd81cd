//! CT volume representation, MetaImage I/O, lung-mask estimation and the
//! left/right lung split.

mod mhd;
mod morphology;

pub use mhd::{
    encode_f32 as mhd_encode_f32, read as mhd_read, write as mhd_write, ElementType, MhdHeader,
};
pub use morphology::close_binary;

use std::path::Path;

use crate::error::{Error, Result};

/// Default Hounsfield threshold below which a voxel counts as lung air.
pub const DEFAULT_HU_THRESHOLD: f64 = -400.0;
/// Default physical radius of the closing element, in mm.
pub const DEFAULT_CLOSING_RADIUS_MM: f64 = 5.0;

/// A 3D grid of Hounsfield values with physical spacing and origin.
///
/// Data is stored x-fastest: index = x + X*(y + Y*z).
#[derive(Debug, Clone, PartialEq)]
pub struct ScanVolume {
    dims: (usize, usize, usize),
    spacing: (f64, f64, f64),
    origin: (f64, f64, f64),
    data: Vec<i16>,
}

impl ScanVolume {
    pub fn new(
        dims: (usize, usize, usize),
        spacing: (f64, f64, f64),
        origin: (f64, f64, f64),
        data: Vec<i16>,
    ) -> Result<Self> {
        if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 {
            return Err(Error::Parameter(format!("volume dims must be positive, got {dims:?}")));
        }
        if spacing.0 <= 0.0 || spacing.1 <= 0.0 || spacing.2 <= 0.0 {
            return Err(Error::Parameter(format!("voxel spacing must be positive, got {spacing:?}")));
        }
        let expected = dims.0 * dims.1 * dims.2;
        if data.len() != expected {
            return Err(Error::Parameter(format!(
                "data length {} does not match dims {:?} ({} voxels)",
                data.len(),
                dims,
                expected
            )));
        }
        Ok(ScanVolume { dims, spacing, origin, data })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn spacing(&self) -> (f64, f64, f64) {
        self.spacing
    }

    pub fn origin(&self) -> (f64, f64, f64) {
        self.origin
    }

    pub fn data(&self) -> &[i16] {
        &self.data
    }

    pub fn voxel_count(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims.0 * (y + self.dims.1 * z)
    }

    #[inline]
    pub fn hu(&self, x: usize, y: usize, z: usize) -> i16 {
        self.data[self.index(x, y, z)]
    }

    pub fn contains(&self, x: i64, y: i64, z: i64) -> bool {
        x >= 0
            && y >= 0
            && z >= 0
            && (x as usize) < self.dims.0
            && (y as usize) < self.dims.1
            && (z as usize) < self.dims.2
    }

    /// Physical position (mm) of a voxel center.
    pub fn voxel_to_world(&self, v: (usize, usize, usize)) -> (f64, f64, f64) {
        (
            self.origin.0 + v.0 as f64 * self.spacing.0,
            self.origin.1 + v.1 as f64 * self.spacing.1,
            self.origin.2 + v.2 as f64 * self.spacing.2,
        )
    }

    /// Continuous voxel coordinates of a world-mm position.
    pub fn world_to_voxel_f64(&self, w: (f64, f64, f64)) -> (f64, f64, f64) {
        (
            (w.0 - self.origin.0) / self.spacing.0,
            (w.1 - self.origin.1) / self.spacing.1,
            (w.2 - self.origin.2) / self.spacing.2,
        )
    }

    /// Nearest voxel of a world-mm position, or None when out of bounds.
    pub fn world_to_voxel(&self, w: (f64, f64, f64)) -> Option<(usize, usize, usize)> {
        let (fx, fy, fz) = self.world_to_voxel_f64(w);
        let (x, y, z) = (fx.round(), fy.round(), fz.round());
        if self.contains(x as i64, y as i64, z as i64) {
            Some((x as usize, y as usize, z as usize))
        } else {
            None
        }
    }

    /// Read a scan from a MetaImage header (.mhd with sidecar .raw, or
    /// single-file .mha). Only MET_SHORT volumes are scans.
    pub fn read_metaimage(path: &Path) -> Result<Self> {
        let (header, payload) = mhd::read(path)?;
        if header.element_type != ElementType::Short {
            return Err(Error::Unsupported(format!(
                "scan volumes must be MET_SHORT, got {}",
                header.element_type.as_str()
            )));
        }
        let data = mhd::decode_i16(&payload, header.msb);
        ScanVolume::new(header.dims()?, header.spacing()?, header.offset()?, data)
    }

    /// Write the scan as MetaImage. `.mhd` writes a header + `.raw` pair,
    /// `.mha` a single file with local payload. Always little-endian.
    pub fn write_metaimage(&self, path: &Path) -> Result<()> {
        let header = MhdHeader::for_volume(self.dims, self.spacing, self.origin, ElementType::Short);
        mhd::write(path, &header, &mhd::encode_i16(&self.data))
    }
}

/// Which lung a voxel belongs to. `Right` is the anatomical right lung,
/// which sits on the low-x side of the scan unless flipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

/// Binary lung segmentation plus the sagittal column splitting the lungs.
#[derive(Debug, Clone, PartialEq)]
pub struct LungMask {
    dims: (usize, usize, usize),
    bits: Vec<bool>,
    split_x: usize,
    flip_lr: bool,
}

impl LungMask {
    /// Wrap a binary volume, computing the split column from the mask's
    /// transverse extents (mean of min and max, rounded half-up).
    pub fn from_bits(dims: (usize, usize, usize), bits: Vec<bool>) -> Result<Self> {
        if bits.len() != dims.0 * dims.1 * dims.2 {
            return Err(Error::Parameter(format!(
                "mask length {} does not match dims {:?}",
                bits.len(),
                dims
            )));
        }
        let (mut min_x, mut max_x) = (usize::MAX, 0usize);
        for z in 0..dims.2 {
            for y in 0..dims.1 {
                let row = dims.0 * (y + dims.1 * z);
                for x in 0..dims.0 {
                    if bits[row + x] {
                        min_x = min_x.min(x);
                        max_x = max_x.max(x);
                    }
                }
            }
        }
        if min_x == usize::MAX {
            return Err(Error::EmptyMask);
        }
        let split_x = (min_x + max_x + 1) / 2;
        Ok(LungMask { dims, bits, split_x, flip_lr: false })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn split_x(&self) -> usize {
        self.split_x
    }

    /// Flip the left/right convention (for scans whose orientation metadata
    /// puts the anatomical right lung on the high-x side).
    pub fn set_flip_lr(&mut self, flip: bool) {
        self.flip_lr = flip;
    }

    pub fn flip_lr(&self) -> bool {
        self.flip_lr
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims.0 * (y + self.dims.1 * z)
    }

    /// True when the voxel is inside the mask; out-of-bounds voxels are not.
    pub fn contains(&self, x: i64, y: i64, z: i64) -> bool {
        if x < 0 || y < 0 || z < 0 {
            return false;
        }
        let (x, y, z) = (x as usize, y as usize, z as usize);
        if x >= self.dims.0 || y >= self.dims.1 || z >= self.dims.2 {
            return false;
        }
        self.bits[self.index(x, y, z)]
    }

    /// Number of voxels in the mask.
    pub fn volume(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Lung side of a voxel: `Right` iff x < split_x (boundary column is
    /// `Left`), inverted when the flip flag is set.
    pub fn side_of(&self, x: i64, y: i64, z: i64) -> Result<Side> {
        if x < 0
            || y < 0
            || z < 0
            || x as usize >= self.dims.0
            || y as usize >= self.dims.1
            || z as usize >= self.dims.2
        {
            return Err(Error::OutOfBounds(x, y, z, self.dims.0, self.dims.1, self.dims.2));
        }
        let low_x = (x as usize) < self.split_x;
        Ok(match low_x ^ self.flip_lr {
            true => Side::Right,
            false => Side::Left,
        })
    }

    /// Write the mask as a MET_UCHAR MetaImage (0/1 voxels).
    pub fn write_metaimage(&self, path: &Path, spacing: (f64, f64, f64), origin: (f64, f64, f64)) -> Result<()> {
        let header = MhdHeader::for_volume(self.dims, spacing, origin, ElementType::UChar);
        let bytes: Vec<u8> = self.bits.iter().map(|&b| b as u8).collect();
        mhd::write(path, &header, &bytes)
    }

    /// Read a mask from a MET_UCHAR MetaImage; split_x is recomputed.
    pub fn read_metaimage(path: &Path) -> Result<Self> {
        let (header, payload) = mhd::read(path)?;
        if header.element_type != ElementType::UChar {
            return Err(Error::Unsupported(format!(
                "masks must be MET_UCHAR, got {}",
                header.element_type.as_str()
            )));
        }
        let bits: Vec<bool> = payload.iter().map(|&b| b != 0).collect();
        LungMask::from_bits(header.dims()?, bits)
    }
}

/// Estimate the lung mask: threshold air below `hu_threshold`, discard
/// air components connected to the transverse volume border (outside air),
/// then close with a spherical element of physical radius
/// `closing_radius_mm` to fill vessel and nodule gaps.
pub fn estimate_lung_mask(
    scan: &ScanVolume,
    hu_threshold: f64,
    closing_radius_mm: f64,
) -> Result<LungMask> {
    if closing_radius_mm < 0.0 {
        return Err(Error::Parameter("closing radius must be non-negative".into()));
    }
    let (nx, ny, nz) = scan.dims();
    let air: Vec<bool> = scan.data().iter().map(|&hu| (hu as f64) < hu_threshold).collect();
    if !air.iter().any(|&b| b) {
        return Err(Error::EmptyMask);
    }

    let body_air = remove_border_components(scan.dims(), &air);
    if !body_air.iter().any(|&b| b) {
        return Err(Error::EmptyMask);
    }

    let closed = close_binary(scan.dims(), &body_air, scan.spacing(), closing_radius_mm);
    debug_assert_eq!(closed.len(), nx * ny * nz);
    LungMask::from_bits(scan.dims(), closed)
}

/// Remove air components touching an x or y border face (outside air).
/// The z faces are kept since cropped chest scans can cut through the lungs.
fn remove_border_components(dims: (usize, usize, usize), air: &[bool]) -> Vec<bool> {
    let (nx, ny, nz) = dims;
    let idx = |x: usize, y: usize, z: usize| x + nx * (y + ny * z);
    let mut outside = vec![false; air.len()];
    let mut stack: Vec<(usize, usize, usize)> = Vec::new();

    let seed = |x: usize, y: usize, z: usize, stack: &mut Vec<(usize, usize, usize)>, outside: &mut [bool]| {
        let i = idx(x, y, z);
        if air[i] && !outside[i] {
            outside[i] = true;
            stack.push((x, y, z));
        }
    };
    for z in 0..nz {
        for y in 0..ny {
            seed(0, y, z, &mut stack, &mut outside);
            seed(nx - 1, y, z, &mut stack, &mut outside);
        }
        for x in 0..nx {
            seed(x, 0, z, &mut stack, &mut outside);
            seed(x, ny - 1, z, &mut stack, &mut outside);
        }
    }

    while let Some((x, y, z)) = stack.pop() {
        let visit = |x: usize, y: usize, z: usize, stack: &mut Vec<(usize, usize, usize)>, outside: &mut [bool]| {
            let i = idx(x, y, z);
            if air[i] && !outside[i] {
                outside[i] = true;
                stack.push((x, y, z));
            }
        };
        if x > 0 {
            visit(x - 1, y, z, &mut stack, &mut outside);
        }
        if x + 1 < nx {
            visit(x + 1, y, z, &mut stack, &mut outside);
        }
        if y > 0 {
            visit(x, y - 1, z, &mut stack, &mut outside);
        }
        if y + 1 < ny {
            visit(x, y + 1, z, &mut stack, &mut outside);
        }
        if z > 0 {
            visit(x, y, z - 1, &mut stack, &mut outside);
        }
        if z + 1 < nz {
            visit(x, y, z + 1, &mut stack, &mut outside);
        }
    }

    air.iter().zip(&outside).map(|(&a, &o)| a && !o).collect()
}

#[cfg(test)]
mod tests;
