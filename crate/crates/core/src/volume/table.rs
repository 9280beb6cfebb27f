//! Per-segment voxel counts and bounding boxes, plus the per-volume
//! summary report (segment count, min/max/median size, foreground share).

use std::collections::BTreeMap;

use serde::Serialize;

use crate::volume::LabelVolume;

/// Voxel count and tight inclusive bounding box of one segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SegmentEntry {
    pub voxel_count: usize,
    pub bbox_min: [usize; 3],
    pub bbox_max: [usize; 3],
}

/// Per-label statistics of a label volume.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SegmentTable {
    pub entries: BTreeMap<u32, SegmentEntry>,
}

impl SegmentTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn voxel_count(&self, label: u32) -> usize {
        self.entries.get(&label).map_or(0, |e| e.voxel_count)
    }

    /// Total foreground voxels.
    pub fn foreground_voxels(&self) -> usize {
        self.entries.values().map(|e| e.voxel_count).sum()
    }

    /// Summary over all segments; `total_voxels` is the dims product of
    /// the source volume.
    pub fn report(&self, total_voxels: usize) -> VolumeReport {
        let mut sizes: Vec<usize> = self.entries.values().map(|e| e.voxel_count).collect();
        sizes.sort_unstable();
        let foreground = sizes.iter().sum::<usize>();
        VolumeReport {
            segment_count: sizes.len(),
            min_segment_size: sizes.first().copied().unwrap_or(0),
            max_segment_size: sizes.last().copied().unwrap_or(0),
            // Lower median: integer voxel counts, no interpolation.
            median_segment_size: if sizes.is_empty() {
                0
            } else {
                sizes[(sizes.len() - 1) / 2]
            },
            foreground_pct: 100.0 * foreground as f64 / total_voxels as f64,
        }
    }
}

/// The volume-level metrics row: segment count, extreme and median
/// segment sizes, and the foreground voxel percentage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeReport {
    pub segment_count: usize,
    pub min_segment_size: usize,
    pub max_segment_size: usize,
    pub median_segment_size: usize,
    pub foreground_pct: f64,
}

/// Compute exact per-label voxel counts and tight bounding boxes.
pub fn segment_table(volume: &LabelVolume) -> SegmentTable {
    let meta = volume.meta;
    let mut entries: BTreeMap<u32, SegmentEntry> = BTreeMap::new();
    for (idx, &label) in volume.voxels.iter().enumerate() {
        if label == 0 {
            continue;
        }
        let c = meta.coords(idx);
        entries
            .entry(label)
            .and_modify(|e| {
                e.voxel_count += 1;
                for (a, &v) in c.iter().enumerate() {
                    e.bbox_min[a] = e.bbox_min[a].min(v);
                    e.bbox_max[a] = e.bbox_max[a].max(v);
                }
            })
            .or_insert(SegmentEntry {
                voxel_count: 1,
                bbox_min: c,
                bbox_max: c,
            });
    }
    SegmentTable { entries }
}
