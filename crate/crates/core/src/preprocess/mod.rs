//! Intensity denoising and reference-label conditioning.
//!
//! [`labels_to_three_class`] rewrites an instance labelling into the
//! three classes consumed by marker-based instancing: 0 background,
//! 1 object interior, 2 border. [`tv_denoise`] removes noise from a
//! scalar volume while preserving edges.

mod tv;

pub use tv::{rof_objective, tv_denoise, tv_denoise_with_trace};

use crate::error::{Error, Result};
use crate::volume::{morphology, Connectivity, LabelVolume, MorphOp, VolumeMeta, VoxelKind};

/// Per-voxel class values.
pub const CLASS_BACKGROUND: u8 = 0;
pub const CLASS_OBJECT: u8 = 1;
pub const CLASS_BORDER: u8 = 2;

/// Dense 3D grid of {background, object, border} classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThreeClassVolume {
    pub meta: VolumeMeta,
    pub classes: Vec<u8>,
}

impl ThreeClassVolume {
    pub fn zeros(dims: [usize; 3]) -> Self {
        let meta = VolumeMeta::new(dims, VoxelKind::LabelU32);
        let len = meta.len();
        ThreeClassVolume {
            meta,
            classes: vec![0; len],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> u8 {
        self.classes[self.meta.linear(x, y, z)]
    }

    /// Serialized form: a label volume with values in {0, 1, 2}.
    pub fn to_label_volume(&self) -> LabelVolume {
        LabelVolume::from_voxels(self.meta, self.classes.iter().map(|&c| c as u32).collect())
    }

    /// Inverse of [`Self::to_label_volume`]; rejects any value above 2.
    pub fn from_label_volume(volume: &LabelVolume) -> Result<Self> {
        let mut classes = Vec::with_capacity(volume.voxels.len());
        for (index, &v) in volume.voxels.iter().enumerate() {
            if v > 2 {
                return Err(Error::InvalidClassValue { index, value: v });
            }
            classes.push(v as u8);
        }
        Ok(ThreeClassVolume {
            meta: volume.meta,
            classes,
        })
    }
}

/// Transform reference labels into {background, object, border} classes.
///
/// A foreground voxel becomes border when it lies within
/// `border_thickness` (face-step distance) of a voxel with a different
/// label or background; the surviving interior stays object. The volume
/// boundary itself does not induce border voxels.
pub fn labels_to_three_class(reference: &LabelVolume, border_thickness: usize) -> ThreeClassVolume {
    assert!(border_thickness >= 1, "border_thickness must be >= 1");
    let eroded = morphology(
        reference,
        MorphOp::Erode,
        Connectivity::Six,
        border_thickness,
    );
    let classes: Vec<u8> = reference
        .voxels
        .iter()
        .zip(&eroded.voxels)
        .map(|(&orig, &core)| {
            if orig == 0 {
                CLASS_BACKGROUND
            } else if core != 0 {
                CLASS_OBJECT
            } else {
                CLASS_BORDER
            }
        })
        .collect();
    ThreeClassVolume {
        meta: reference.meta,
        classes,
    }
}
