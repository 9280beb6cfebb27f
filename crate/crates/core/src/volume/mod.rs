//! Dense 3D volumes and the shared machinery built on them: file I/O,
//! connected components, binary morphology per label, axis slicing, and
//! blockwise tiling.
//!
//! Voxels are stored x-fastest: the voxel at `(x, y, z)` lives at linear
//! index `x + dims[0] * (y + dims[1] * z)`. Label `0` is background
//! everywhere; a segment is the maximal set of voxels sharing one nonzero
//! label.

mod components;
mod io;
mod morphology;
mod table;
mod tiling;

pub use components::{connected_components, label_components_2d};
pub use io::{load_volume, save_volume, sidecar_path, VOLUME_SIDECAR_SUFFIX};
pub use morphology::{morphology, MorphOp};
pub use table::{segment_table, SegmentEntry, SegmentTable, VolumeReport};
pub use tiling::{make_tiling, Block, BlockTiling, Region};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the three volume axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    /// Index of this axis into a `dims` triple.
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "X",
            Axis::Y => "Y",
            Axis::Z => "Z",
        }
    }

    /// The two remaining axes, in ascending order. Slices taken along
    /// `self` use the first as the u (width) axis and the second as the
    /// v (height) axis.
    pub fn others(self) -> [Axis; 2] {
        match self {
            Axis::X => [Axis::Y, Axis::Z],
            Axis::Y => [Axis::X, Axis::Z],
            Axis::Z => [Axis::X, Axis::Y],
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(Error::InvalidParameter(format!(
                "unknown axis {other:?}, expected X, Y or Z"
            ))),
        }
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Voxel neighbourhood: face-adjacent (6) or face+edge+corner (26).
///
/// Doubles as the structuring element for binary morphology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    Six,
    TwentySix,
}

impl Connectivity {
    /// Neighbour offsets for this connectivity.
    pub fn offsets(self) -> &'static [[i64; 3]] {
        const SIX: [[i64; 3]; 6] = [
            [-1, 0, 0],
            [1, 0, 0],
            [0, -1, 0],
            [0, 1, 0],
            [0, 0, -1],
            [0, 0, 1],
        ];
        const TWENTY_SIX: [[i64; 3]; 26] = {
            let mut out = [[0i64; 3]; 26];
            let mut n = 0;
            let mut dz = -1i64;
            while dz <= 1 {
                let mut dy = -1i64;
                while dy <= 1 {
                    let mut dx = -1i64;
                    while dx <= 1 {
                        if dx != 0 || dy != 0 || dz != 0 {
                            out[n] = [dx, dy, dz];
                            n += 1;
                        }
                        dx += 1;
                    }
                    dy += 1;
                }
                dz += 1;
            }
            out
        };
        match self {
            Connectivity::Six => &SIX,
            Connectivity::TwentySix => &TWENTY_SIX,
        }
    }

    /// Neighbour count (6 or 26).
    pub fn degree(self) -> usize {
        self.offsets().len()
    }
}

impl std::str::FromStr for Connectivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "6" => Ok(Connectivity::Six),
            "26" => Ok(Connectivity::TwentySix),
            other => Err(Error::InvalidParameter(format!(
                "unknown connectivity {other:?}, expected 6 or 26"
            ))),
        }
    }
}

/// Payload element type of a stored volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VoxelKind {
    #[serde(rename = "label-u32")]
    LabelU32,
    #[serde(rename = "scalar-f32")]
    ScalarF32,
}

impl VoxelKind {
    pub fn name(self) -> &'static str {
        match self {
            VoxelKind::LabelU32 => "label-u32",
            VoxelKind::ScalarF32 => "scalar-f32",
        }
    }
}

/// Shape and provenance of a volume: voxel counts per axis, the corner
/// coordinate of the sub-volume within a larger scan (informational), and
/// the payload element type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VolumeMeta {
    pub dims: [usize; 3],
    pub origin: [i64; 3],
    pub voxel_kind: VoxelKind,
}

impl VolumeMeta {
    pub fn new(dims: [usize; 3], voxel_kind: VoxelKind) -> Self {
        assert!(
            dims.iter().all(|&d| d >= 1),
            "volume dims must all be >= 1, got {dims:?}"
        );
        VolumeMeta {
            dims,
            origin: [0, 0, 0],
            voxel_kind,
        }
    }

    pub fn with_origin(mut self, origin: [i64; 3]) -> Self {
        self.origin = origin;
        self
    }

    /// Total voxel count.
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        false // dims are all >= 1 by construction
    }

    /// Linear index of `(x, y, z)` in x-fastest order.
    #[inline]
    pub fn linear(&self, x: usize, y: usize, z: usize) -> usize {
        debug_assert!(x < self.dims[0] && y < self.dims[1] && z < self.dims[2]);
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    /// Inverse of [`Self::linear`].
    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let x = index % self.dims[0];
        let rest = index / self.dims[0];
        [x, rest % self.dims[1], rest / self.dims[1]]
    }

    /// Linear index of the neighbour at `coords + offset`, or `None` when
    /// it falls outside the volume.
    #[inline]
    pub fn neighbour(&self, coords: [usize; 3], offset: [i64; 3]) -> Option<usize> {
        let mut out = [0usize; 3];
        for a in 0..3 {
            let c = coords[a] as i64 + offset[a];
            if c < 0 || c >= self.dims[a] as i64 {
                return None;
            }
            out[a] = c as usize;
        }
        Some(self.linear(out[0], out[1], out[2]))
    }

    /// 2D dims (width, height) of slices taken along `axis`.
    pub fn slice_dims(&self, axis: Axis) -> (usize, usize) {
        let [u, v] = axis.others();
        (self.dims[u.index()], self.dims[v.index()])
    }
}

/// Dense 3D grid of instance labels, 0 = background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVolume {
    pub meta: VolumeMeta,
    pub voxels: Vec<u32>,
}

impl LabelVolume {
    /// All-background volume of the given dims.
    pub fn zeros(dims: [usize; 3]) -> Self {
        let meta = VolumeMeta::new(dims, VoxelKind::LabelU32);
        let len = meta.len();
        LabelVolume {
            meta,
            voxels: vec![0; len],
        }
    }

    pub fn from_voxels(meta: VolumeMeta, voxels: Vec<u32>) -> Self {
        assert_eq!(meta.voxel_kind, VoxelKind::LabelU32);
        assert_eq!(meta.len(), voxels.len(), "voxel count must equal dims product");
        LabelVolume { meta, voxels }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> u32 {
        self.voxels[self.meta.linear(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, label: u32) {
        let i = self.meta.linear(x, y, z);
        self.voxels[i] = label;
    }

    /// Number of nonzero voxels.
    pub fn foreground_count(&self) -> usize {
        self.voxels.iter().filter(|&&v| v != 0).count()
    }

    /// Largest label present (0 for an all-background volume).
    pub fn max_label(&self) -> u32 {
        self.voxels.iter().copied().max().unwrap_or(0)
    }
}

/// Dense 3D grid of 32-bit float intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume {
    pub meta: VolumeMeta,
    pub voxels: Vec<f32>,
}

impl ScalarVolume {
    pub fn zeros(dims: [usize; 3]) -> Self {
        let meta = VolumeMeta::new(dims, VoxelKind::ScalarF32);
        let len = meta.len();
        ScalarVolume {
            meta,
            voxels: vec![0.0; len],
        }
    }

    pub fn from_voxels(meta: VolumeMeta, voxels: Vec<f32>) -> Self {
        assert_eq!(meta.voxel_kind, VoxelKind::ScalarF32);
        assert_eq!(meta.len(), voxels.len(), "voxel count must equal dims product");
        ScalarVolume { meta, voxels }
    }

    /// Index of the first non-finite voxel, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.voxels.iter().position(|v| !v.is_finite())
    }
}

/// A loaded volume of either voxel kind.
#[derive(Debug, Clone)]
pub enum Volume {
    Label(LabelVolume),
    Scalar(ScalarVolume),
}

impl Volume {
    pub fn meta(&self) -> &VolumeMeta {
        match self {
            Volume::Label(v) => &v.meta,
            Volume::Scalar(v) => &v.meta,
        }
    }

    pub fn into_label(self) -> Result<LabelVolume> {
        match self {
            Volume::Label(v) => Ok(v),
            Volume::Scalar(_) => Err(Error::VoxelKindMismatch {
                expected: "label-u32",
                actual: "scalar-f32",
            }),
        }
    }

    pub fn into_scalar(self) -> Result<ScalarVolume> {
        match self {
            Volume::Scalar(v) => Ok(v),
            Volume::Label(_) => Err(Error::VoxelKindMismatch {
                expected: "scalar-f32",
                actual: "label-u32",
            }),
        }
    }
}

impl From<LabelVolume> for Volume {
    fn from(v: LabelVolume) -> Self {
        Volume::Label(v)
    }
}

impl From<ScalarVolume> for Volume {
    fn from(v: ScalarVolume) -> Self {
        Volume::Scalar(v)
    }
}

/// A 2D label map, pixel (u, v) at index `u + width * v`, 0 = background.
///
/// Slices along axis A use the remaining axes in ascending order as
/// (u, v): X-slices are (y, z) maps, Y-slices (x, z), Z-slices (x, y).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap2d {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u32>,
}

impl LabelMap2d {
    pub fn zeros(width: usize, height: usize) -> Self {
        LabelMap2d {
            width,
            height,
            pixels: vec![0; width * height],
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u32>) -> Self {
        assert_eq!(width * height, pixels.len());
        LabelMap2d {
            width,
            height,
            pixels,
        }
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> u32 {
        self.pixels[u + self.width * v]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, label: u32) {
        self.pixels[u + self.width * v] = label;
    }

    pub fn max_label(&self) -> u32 {
        self.pixels.iter().copied().max().unwrap_or(0)
    }
}

/// Map a slice pixel (u, v) back to volume coordinates.
#[inline]
pub fn slice_to_volume_coords(axis: Axis, index: usize, u: usize, v: usize) -> [usize; 3] {
    match axis {
        Axis::X => [index, u, v],
        Axis::Y => [u, index, v],
        Axis::Z => [u, v, index],
    }
}

/// Extract the 2D restriction of `volume` to the plane `axis = index`.
pub fn extract_slice(volume: &LabelVolume, axis: Axis, index: usize) -> Result<LabelMap2d> {
    let size = volume.meta.dims[axis.index()];
    if index >= size {
        return Err(Error::SliceIndexOutOfRange {
            axis: axis.name(),
            index,
            size,
        });
    }
    let (w, h) = volume.meta.slice_dims(axis);
    let mut map = LabelMap2d::zeros(w, h);
    for v in 0..h {
        for u in 0..w {
            let [x, y, z] = slice_to_volume_coords(axis, index, u, v);
            map.set(u, v, volume.get(x, y, z));
        }
    }
    Ok(map)
}

/// Write a 2D map back into the plane `axis = index`; inverse of
/// [`extract_slice`].
pub fn write_slice(volume: &mut LabelVolume, axis: Axis, index: usize, map: &LabelMap2d) -> Result<()> {
    let size = volume.meta.dims[axis.index()];
    if index >= size {
        return Err(Error::SliceIndexOutOfRange {
            axis: axis.name(),
            index,
            size,
        });
    }
    let (w, h) = volume.meta.slice_dims(axis);
    if (map.width, map.height) != (w, h) {
        return Err(Error::DimsMismatch {
            left: [map.width, map.height, 1],
            right: [w, h, 1],
        });
    }
    for v in 0..h {
        for u in 0..w {
            let [x, y, z] = slice_to_volume_coords(axis, index, u, v);
            volume.set(x, y, z, map.get(u, v));
        }
    }
    Ok(())
}
