//! Binary morphology applied per label against background.
//!
//! Dilation fills background voxels only; it never overwrites a
//! foreground voxel of any label. When several labels reach the same
//! background voxel within one iteration, the label with the larger
//! current voxel count wins, then the smaller label id. Erosion removes
//! a voxel as soon as any in-bounds neighbour under the structuring
//! element carries a different value; voxels beyond the volume bounds
//! count as same-label, so the volume boundary never erodes by itself.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::volume::{Connectivity, LabelVolume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MorphOp {
    Dilate,
    Erode,
    /// Dilate then erode with the same element and iteration count.
    Close,
}

impl std::str::FromStr for MorphOp {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s {
            "dilate" => Ok(MorphOp::Dilate),
            "erode" => Ok(MorphOp::Erode),
            "close" => Ok(MorphOp::Close),
            other => Err(crate::error::Error::InvalidParameter(format!(
                "unknown morphology op {other:?}"
            ))),
        }
    }
}

/// Apply `op` with the given structuring element for `iterations` rounds.
pub fn morphology(
    volume: &LabelVolume,
    op: MorphOp,
    element: Connectivity,
    iterations: usize,
) -> LabelVolume {
    assert!(iterations >= 1, "iterations must be >= 1");
    match op {
        MorphOp::Dilate => repeat(volume, iterations, |v| dilate_once(v, element)),
        MorphOp::Erode => repeat(volume, iterations, |v| erode_once(v, element)),
        MorphOp::Close => {
            let dilated = repeat(volume, iterations, |v| dilate_once(v, element));
            repeat(&dilated, iterations, |v| erode_once(v, element))
        }
    }
}

fn repeat(
    volume: &LabelVolume,
    iterations: usize,
    step: impl Fn(&LabelVolume) -> LabelVolume,
) -> LabelVolume {
    let mut current = step(volume);
    for _ in 1..iterations {
        current = step(&current);
    }
    current
}

fn label_counts(volume: &LabelVolume) -> Vec<u64> {
    let mut counts = vec![0u64; volume.max_label() as usize + 1];
    for &v in &volume.voxels {
        counts[v as usize] += 1;
    }
    counts
}

fn dilate_once(volume: &LabelVolume, element: Connectivity) -> LabelVolume {
    let meta = volume.meta;
    let offsets = element.offsets();
    // Tie-break on the counts as they stand at the start of the iteration.
    let counts = label_counts(volume);

    let voxels: Vec<u32> = (0..volume.voxels.len())
        .into_par_iter()
        .map(|idx| {
            let own = volume.voxels[idx];
            if own != 0 {
                return own;
            }
            let coords = meta.coords(idx);
            let mut best = 0u32;
            for &off in offsets {
                if let Some(n) = meta.neighbour(coords, off) {
                    let l = volume.voxels[n];
                    if l == 0 {
                        continue;
                    }
                    if best == 0 {
                        best = l;
                    } else if l != best {
                        let (cb, cl) = (counts[best as usize], counts[l as usize]);
                        if cl > cb || (cl == cb && l < best) {
                            best = l;
                        }
                    }
                }
            }
            best
        })
        .collect();

    LabelVolume::from_voxels(meta, voxels)
}

fn erode_once(volume: &LabelVolume, element: Connectivity) -> LabelVolume {
    let meta = volume.meta;
    let offsets = element.offsets();

    let voxels: Vec<u32> = (0..volume.voxels.len())
        .into_par_iter()
        .map(|idx| {
            let own = volume.voxels[idx];
            if own == 0 {
                return 0;
            }
            let coords = meta.coords(idx);
            for &off in offsets {
                if let Some(n) = meta.neighbour(coords, off) {
                    if volume.voxels[n] != own {
                        return 0;
                    }
                }
            }
            own
        })
        .collect();

    LabelVolume::from_voxels(meta, voxels)
}
