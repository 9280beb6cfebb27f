//! Connected-component labelling.

use std::collections::VecDeque;

use crate::volume::{Connectivity, LabelMap2d, LabelVolume};

/// Split every input segment into its connected components.
///
/// Two voxels share an output label iff they shared an input label and
/// are connected under `connectivity`. Output labels are consecutive
/// `1..=K` in first-voxel scan order; background is preserved.
pub fn connected_components(volume: &LabelVolume, connectivity: Connectivity) -> LabelVolume {
    let meta = volume.meta;
    let offsets = connectivity.offsets();
    let mut out = vec![0u32; volume.voxels.len()];
    let mut next = 1u32;
    let mut queue = VecDeque::new();

    for start in 0..volume.voxels.len() {
        let input_label = volume.voxels[start];
        if input_label == 0 || out[start] != 0 {
            continue;
        }
        let label = next;
        next += 1;
        out[start] = label;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            let coords = meta.coords(idx);
            for &off in offsets {
                if let Some(n) = meta.neighbour(coords, off) {
                    if out[n] == 0 && volume.voxels[n] == input_label {
                        out[n] = label;
                        queue.push_back(n);
                    }
                }
            }
        }
    }

    LabelVolume::from_voxels(meta, out)
}

/// 2D analogue of [`connected_components`] with 8-connectivity, used to
/// give slice maps local ids.
pub fn label_components_2d(map: &LabelMap2d) -> LabelMap2d {
    let (w, h) = (map.width, map.height);
    let mut out = vec![0u32; map.pixels.len()];
    let mut next = 1u32;
    let mut queue = VecDeque::new();

    for start in 0..map.pixels.len() {
        let input_label = map.pixels[start];
        if input_label == 0 || out[start] != 0 {
            continue;
        }
        let label = next;
        next += 1;
        out[start] = label;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            let (u, v) = (idx % w, idx / w);
            for dv in -1i64..=1 {
                for du in -1i64..=1 {
                    if du == 0 && dv == 0 {
                        continue;
                    }
                    let (nu, nv) = (u as i64 + du, v as i64 + dv);
                    if nu < 0 || nv < 0 || nu >= w as i64 || nv >= h as i64 {
                        continue;
                    }
                    let n = nu as usize + w * nv as usize;
                    if out[n] == 0 && map.pixels[n] == input_label {
                        out[n] = label;
                        queue.push_back(n);
                    }
                }
            }
        }
    }

    LabelMap2d::from_pixels(w, h, out)
}
