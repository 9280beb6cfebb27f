//! Marker-based instancing of a three-class volume.
//!
//! Connected components of the object class become markers; every
//! foreground voxel (object or border) is then flooded from the
//! markers along shortest geodesic paths, with border voxels costing 1
//! per step and object voxels costing 0. The border class thereby acts
//! as a divider between touching instances.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::preprocess::{ThreeClassVolume, CLASS_BORDER, CLASS_OBJECT};
use crate::volume::{connected_components, Connectivity, LabelVolume};

/// Parameters for [`run_watershed_pipeline`].
#[derive(Debug, Clone, Copy)]
pub struct WatershedConfig {
    /// Object-class components smaller than this are not used as markers.
    pub min_marker_size: usize,
    /// Connectivity for both marker extraction and flooding. The
    /// 6-neighbourhood keeps a 1-voxel border wall watertight;
    /// 26-flooding would tunnel through corner-adjacent border voxels.
    pub connectivity: Connectivity,
}

impl Default for WatershedConfig {
    fn default() -> Self {
        WatershedConfig {
            min_marker_size: 0,
            connectivity: Connectivity::Six,
        }
    }
}

/// Markers are connected components of object-class voxels with at
/// least `min_marker_size` voxels, labelled 1..K in scan order.
pub fn extract_markers(
    classes: &ThreeClassVolume,
    min_marker_size: usize,
    connectivity: Connectivity,
) -> LabelVolume {
    let mask = LabelVolume::from_voxels(
        classes.meta,
        classes
            .classes
            .iter()
            .map(|&c| (c == CLASS_OBJECT) as u32)
            .collect(),
    );
    let components = connected_components(&mask, connectivity);
    if min_marker_size <= 1 {
        return components;
    }
    let max = components.max_label() as usize;
    let mut counts = vec![0usize; max + 1];
    for &v in &components.voxels {
        counts[v as usize] += 1;
    }
    // Components already carry scan-order labels, so renumbering the
    // survivors in ascending label order preserves scan order.
    let mut remap = vec![0u32; max + 1];
    let mut next = 0u32;
    for label in 1..=max {
        if counts[label] >= min_marker_size {
            next += 1;
            remap[label] = next;
        }
    }
    LabelVolume::from_voxels(
        components.meta,
        components.voxels.iter().map(|&v| remap[v as usize]).collect(),
    )
}

/// Flood foreground voxels from the markers by shortest geodesic
/// distance, where stepping onto an object voxel costs 0 and onto a
/// border voxel costs 1. Equidistant voxels go to the smaller marker
/// label. Background voxels and foreground unreachable from any marker
/// stay 0; marker voxels always keep their own label.
pub fn watershed_instances(
    classes: &ThreeClassVolume,
    markers: &LabelVolume,
    connectivity: Connectivity,
) -> Result<LabelVolume> {
    if classes.meta.dims != markers.meta.dims {
        return Err(Error::DimsMismatch {
            left: classes.meta.dims,
            right: markers.meta.dims,
        });
    }
    let meta = classes.meta;
    let n = classes.classes.len();
    let mut dist = vec![u32::MAX; n];
    let mut label = vec![0u32; n];
    let mut heap: BinaryHeap<Reverse<(u32, u32, usize)>> = BinaryHeap::new();

    for (index, &m) in markers.voxels.iter().enumerate() {
        if m == 0 {
            continue;
        }
        let class = classes.classes[index];
        if class != CLASS_OBJECT {
            return Err(Error::MarkerOffObject {
                label: m,
                index,
                class,
            });
        }
        dist[index] = 0;
        label[index] = m;
        heap.push(Reverse((0, m, index)));
    }

    let offsets = connectivity.offsets();
    while let Some(Reverse((d, l, index))) = heap.pop() {
        if (d, l) != (dist[index], label[index]) {
            continue; // superseded entry
        }
        let coords = meta.coords(index);
        for &off in offsets {
            let Some(next) = meta.neighbour(coords, off) else {
                continue;
            };
            if markers.voxels[next] != 0 {
                continue; // marker voxels are pinned
            }
            let step = match classes.classes[next] {
                CLASS_OBJECT => 0,
                CLASS_BORDER => 1,
                _ => continue,
            };
            let candidate = (d + step, l);
            if candidate < (dist[next], label[next]) {
                dist[next] = candidate.0;
                label[next] = candidate.1;
                heap.push(Reverse((candidate.0, candidate.1, next)));
            }
        }
    }

    Ok(LabelVolume::from_voxels(meta, label))
}

/// [`extract_markers`] followed by [`watershed_instances`] with shared
/// connectivity.
pub fn run_watershed_pipeline(
    classes: &ThreeClassVolume,
    config: &WatershedConfig,
) -> Result<LabelVolume> {
    let markers = extract_markers(classes, config.min_marker_size, config.connectivity);
    watershed_instances(classes, &markers, config.connectivity)
}
