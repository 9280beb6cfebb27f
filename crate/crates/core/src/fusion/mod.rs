//! Fuse per-slice 2D instance maps from three orthogonal slicing
//! directions into one consistent 3D instance labelling.
//!
//! Each slice map carries slice-local ids. Starting from a chosen
//! slice, global ids propagate breadth-first: a 2D instance shares a 1D
//! line with every instance in an orthogonal slice, and when their
//! line segments overlap strongly enough the whole target instance
//! adopts the source's global id. Post passes absorb single-slice
//! leftovers, close small gaps morphologically, and re-apply the 2D
//! instances onto the fused volume.

mod io;

pub use io::{load_stack, save_stack, STACK_MANIFEST_NAME};

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::volume::{
    extract_slice, morphology, slice_to_volume_coords, Axis, Connectivity, LabelMap2d, LabelVolume,
    MorphOp, VolumeMeta, VoxelKind,
};

/// Per-axis stacks of 2D instance maps covering a full volume.
///
/// Ids are meaningful only within a single map; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceStack {
    pub meta: VolumeMeta,
    /// One `Vec` per axis (indexed by [`Axis::index`]), one map per slice.
    pub maps: [Vec<LabelMap2d>; 3],
}

impl SliceStack {
    /// All-background stack for the given volume shape.
    pub fn empty(meta: VolumeMeta) -> Self {
        let maps = Axis::ALL.map(|axis| {
            let (w, h) = meta.slice_dims(axis);
            vec![LabelMap2d::zeros(w, h); meta.dims[axis.index()]]
        });
        SliceStack { meta, maps }
    }

    pub fn from_maps(meta: VolumeMeta, maps: [Vec<LabelMap2d>; 3]) -> Result<Self> {
        let stack = SliceStack { meta, maps };
        stack.validate()?;
        Ok(stack)
    }

    /// Check the one-map-per-slice and per-map dims invariants.
    pub fn validate(&self) -> Result<()> {
        for axis in Axis::ALL {
            let maps = &self.maps[axis.index()];
            let expected = self.meta.dims[axis.index()];
            if maps.len() != expected {
                return Err(Error::StackSliceCount {
                    axis: axis.name(),
                    expected,
                    actual: maps.len(),
                });
            }
            let (w, h) = self.meta.slice_dims(axis);
            for map in maps {
                if (map.width, map.height) != (w, h) {
                    return Err(Error::DimsMismatch {
                        left: [map.width, map.height, 1],
                        right: [w, h, 1],
                    });
                }
            }
        }
        Ok(())
    }

    pub fn map(&self, axis: Axis, slice: usize) -> &LabelMap2d {
        &self.maps[axis.index()][slice]
    }

    pub fn map_mut(&mut self, axis: Axis, slice: usize) -> &mut LabelMap2d {
        &mut self.maps[axis.index()][slice]
    }
}

/// Slice a labelled volume into a stack, keeping the 3D labels as local
/// ids. Useful for building already-consistent stacks in tests and
/// diagnostics; a real 2D instancer's ids carry no cross-slice meaning.
pub fn stack_from_global_labels(volume: &LabelVolume) -> SliceStack {
    let mut stack = SliceStack::empty(volume.meta);
    for axis in Axis::ALL {
        for i in 0..volume.meta.dims[axis.index()] {
            stack.maps[axis.index()][i] =
                extract_slice(volume, axis, i).expect("slice index in range");
        }
    }
    stack
}

/// Where id propagation starts along the start axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartIndexPolicy {
    /// `dims[start_axis] / 2`.
    Middle,
    Given(usize),
}

impl StartIndexPolicy {
    pub fn resolve(self, axis: Axis, size: usize) -> Result<usize> {
        match self {
            StartIndexPolicy::Middle => Ok(size / 2),
            StartIndexPolicy::Given(i) if i < size => Ok(i),
            StartIndexPolicy::Given(i) => Err(Error::SliceIndexOutOfRange {
                axis: axis.name(),
                index: i,
                size,
            }),
        }
    }
}

/// Parameters of the fusion pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    /// Minimum line-segment overlap ratio (intersection / shorter
    /// segment) for a target instance to adopt the source's global id.
    /// In (0, 1]; overlap must exceed it strictly.
    pub line_overlap_threshold: f64,
    /// Minimum footprint overlap ratio for a 2D instance to stamp its
    /// dominant 3D label over all its voxels. In (0, 1], strict.
    pub reinsert_overlap_threshold: f64,
    pub start_axis: Axis,
    pub start_index_policy: StartIndexPolicy,
    /// Iterations of morphological closing between artefact absorption
    /// and reinsertion; 0 skips the stage.
    pub closing_iterations: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            line_overlap_threshold: 0.5,
            reinsert_overlap_threshold: 0.5,
            start_axis: Axis::Z,
            start_index_policy: StartIndexPolicy::Middle,
            closing_iterations: 1,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [
            ("line_overlap_threshold", self.line_overlap_threshold),
            ("reinsert_overlap_threshold", self.reinsert_overlap_threshold),
        ] {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in (0, 1], got {t}"
                )));
            }
        }
        Ok(())
    }
}

/// Key of a 2D instance: (axis, slice index, slice-local id).
pub type InstanceKey = (Axis, usize, u32);

/// Injective mapping from 2D instances to global ids; ids are never
/// reused.
#[derive(Debug, Default)]
pub struct GlobalIndexMap {
    next_global_id: u32,
    assignments: HashMap<InstanceKey, u32>,
}

impl GlobalIndexMap {
    pub fn new() -> Self {
        GlobalIndexMap {
            next_global_id: 1,
            assignments: HashMap::new(),
        }
    }

    pub fn get(&self, key: InstanceKey) -> Option<u32> {
        self.assignments.get(&key).copied()
    }

    /// Record `key -> global`; returns false (and changes nothing) when
    /// the key is already assigned.
    pub fn adopt(&mut self, key: InstanceKey, global: u32) -> bool {
        if self.assignments.contains_key(&key) {
            return false;
        }
        self.assignments.insert(key, global);
        true
    }

    /// Mint a never-used global id and assign it to `key`.
    pub fn assign_fresh(&mut self, key: InstanceKey) -> u32 {
        let id = self.next_global_id;
        self.next_global_id += 1;
        assert!(self.adopt(key, id), "fresh id assigned to visited key");
        id
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

/// Footprints of every 2D instance, as ascending in-slice pixel indices
/// (`v * width + u`).
struct InstanceIndex {
    footprints: [Vec<BTreeMap<u32, Vec<usize>>>; 3],
}

impl InstanceIndex {
    fn build(stack: &SliceStack) -> Self {
        let footprints = Axis::ALL.map(|axis| {
            stack.maps[axis.index()]
                .iter()
                .map(|map| {
                    let mut per_id: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
                    for (p, &id) in map.pixels.iter().enumerate() {
                        if id != 0 {
                            per_id.entry(id).or_default().push(p);
                        }
                    }
                    per_id
                })
                .collect()
        });
        InstanceIndex { footprints }
    }

    fn in_slice(&self, axis: Axis, slice: usize) -> &BTreeMap<u32, Vec<usize>> {
        &self.footprints[axis.index()][slice]
    }

    fn keys_in_slice(&self, axis: Axis, slice: usize) -> impl Iterator<Item = InstanceKey> + '_ {
        self.in_slice(axis, slice)
            .keys()
            .map(move |&id| (axis, slice, id))
    }
}

fn third_axis(a: Axis, b: Axis) -> Axis {
    Axis::ALL
        .into_iter()
        .find(|&c| c != a && c != b)
        .expect("two distinct axes leave one")
}

/// Maximal runs of equal nonzero values: (start, end inclusive, id).
fn runs_of(line: &[u32]) -> Vec<(usize, usize, u32)> {
    let mut out = Vec::new();
    let mut t = 0;
    while t < line.len() {
        if line[t] == 0 {
            t += 1;
            continue;
        }
        let id = line[t];
        let start = t;
        while t + 1 < line.len() && line[t + 1] == id {
            t += 1;
        }
        out.push((start, t, id));
        t += 1;
    }
    out
}

/// Pixel coordinate of volume position `w` within the slice map of
/// `axis`.
fn project(axis: Axis, w: [usize; 3]) -> (usize, usize) {
    let [p, q] = axis.others();
    (w[p.index()], w[q.index()])
}

/// Target instances whose line segments overlap instance `(axis, slice,
/// local)` with ratio strictly above `threshold`, in deterministic
/// (axis, slice, id) order.
fn find_line_matches(
    stack: &SliceStack,
    index: &InstanceIndex,
    source: InstanceKey,
    threshold: f64,
) -> Vec<InstanceKey> {
    let (axis, slice, local) = source;
    let dims = stack.meta.dims;
    let src_map = stack.map(axis, slice);
    let footprint = &index.in_slice(axis, slice)[&local];

    let mut matches: BTreeSet<InstanceKey> = BTreeSet::new();
    for target_axis in axis.others() {
        let line_axis = third_axis(axis, target_axis);
        // Only orthogonal slices actually crossed by the instance can
        // share a nonempty line segment with it.
        let crossed: BTreeSet<usize> = footprint
            .iter()
            .map(|&p| {
                let (u, v) = (p % src_map.width, p / src_map.width);
                let w = slice_to_volume_coords(axis, slice, u, v);
                w[target_axis.index()]
            })
            .collect();
        for j in crossed {
            let tgt_map = stack.map(target_axis, j);
            let n = dims[line_axis.index()];
            let mut src_line = vec![0u32; n];
            let mut tgt_line = vec![0u32; n];
            let mut w = [0usize; 3];
            w[axis.index()] = slice;
            w[target_axis.index()] = j;
            for t in 0..n {
                w[line_axis.index()] = t;
                let (su, sv) = project(axis, w);
                if src_map.get(su, sv) == local {
                    src_line[t] = 1;
                }
                let (tu, tv) = project(target_axis, w);
                tgt_line[t] = tgt_map.get(tu, tv);
            }
            for (sa, sb, _) in runs_of(&src_line) {
                for &(ta, tb, id) in &runs_of(&tgt_line) {
                    let lo = sa.max(ta);
                    let hi = sb.min(tb);
                    if lo > hi {
                        continue;
                    }
                    let inter = (hi - lo + 1) as f64;
                    let shorter = (sb - sa + 1).min(tb - ta + 1) as f64;
                    if inter / shorter > threshold {
                        matches.insert((target_axis, j, id));
                    }
                }
            }
        }
    }
    matches.into_iter().collect()
}

/// Assign a global id to every 2D instance by breadth-first line
/// matching. Instances of the start slice are seeded first (local id
/// ascending); whenever propagation exhausts, the first still-unassigned
/// instance in (axis, slice, local id) order seeds a fresh id.
pub fn assign_global_ids(
    stack: &SliceStack,
    config: &MatchConfig,
) -> Result<GlobalIndexMap> {
    stack.validate()?;
    config.validate()?;
    let dims = stack.meta.dims;
    let start_axis = config.start_axis;
    let start = config
        .start_index_policy
        .resolve(start_axis, dims[start_axis.index()])?;
    let index = InstanceIndex::build(stack);

    let mut all_instances: Vec<InstanceKey> = Vec::new();
    for axis in Axis::ALL {
        for i in 0..dims[axis.index()] {
            all_instances.extend(index.keys_in_slice(axis, i));
        }
    }

    let mut globals = GlobalIndexMap::new();
    let mut frontier: Vec<InstanceKey> = Vec::new();
    for key in index.keys_in_slice(start_axis, start) {
        globals.assign_fresh(key);
        frontier.push(key);
    }
    let mut pending = all_instances.into_iter();

    loop {
        while !frontier.is_empty() {
            frontier.sort();
            let mut next = Vec::new();
            for &key in &frontier {
                let g = globals.get(key).expect("frontier instances are assigned");
                for target in
                    find_line_matches(stack, &index, key, config.line_overlap_threshold)
                {
                    if globals.adopt(target, g) {
                        next.push(target);
                    }
                }
            }
            frontier = next;
        }
        match pending.find(|&key| globals.get(key).is_none()) {
            Some(key) => {
                globals.assign_fresh(key);
                frontier.push(key);
            }
            None => break,
        }
    }
    Ok(globals)
}

/// Fuse the stack into a 3D labelling. The volume is painted from the
/// start axis's maps, so its foreground equals that stack's foreground
/// exactly; the other two axes contribute matching information only.
pub fn match_slices(stack: &SliceStack, config: &MatchConfig) -> Result<LabelVolume> {
    let globals = assign_global_ids(stack, config)?;
    let dims = stack.meta.dims;
    let axis = config.start_axis;
    let mut out = LabelVolume::zeros(dims);
    out.meta = VolumeMeta::new(dims, VoxelKind::LabelU32).with_origin(stack.meta.origin);
    for i in 0..dims[axis.index()] {
        let map = stack.map(axis, i);
        for v in 0..map.height {
            for u in 0..map.width {
                let local = map.get(u, v);
                if local == 0 {
                    continue;
                }
                let g = globals
                    .get((axis, i, local))
                    .expect("every instance holds a global id");
                let w = slice_to_volume_coords(axis, i, u, v);
                out.voxels[out.meta.linear(w[0], w[1], w[2])] = g;
            }
        }
    }
    Ok(out)
}

/// Absorb single-slice leftovers along the start axis.
///
/// A region whose global id occupies exactly one start-axis slice is a
/// failed match; when its footprint overlaps a multi-slice region in an
/// adjacent slice with ratio (intersection / smaller footprint) strictly
/// above `line_overlap_threshold`, it adopts that region's id. Slices
/// are visited outward from the start slice and the pass repeats until
/// nothing changes. Background is never relabelled.
pub fn close_line_artefacts(
    volume: &LabelVolume,
    stack: &SliceStack,
    config: &MatchConfig,
) -> LabelVolume {
    assert_eq!(
        volume.meta.dims, stack.meta.dims,
        "volume and stack describe different shapes"
    );
    let axis = config.start_axis;
    let dims = volume.meta.dims;
    let n = dims[axis.index()];
    let start = config
        .start_index_policy
        .resolve(axis, n)
        .expect("start index validated upstream");

    let mut out = volume.clone();
    let (width, _) = volume.meta.slice_dims(axis);

    // Per-slice footprints (ascending in-slice pixel indices) and the
    // number of slices each id occupies.
    let mut footprints: Vec<BTreeMap<u32, Vec<usize>>> = (0..n)
        .map(|i| {
            let map = extract_slice(&out, axis, i).expect("slice in range");
            let mut per_id: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
            for (p, &id) in map.pixels.iter().enumerate() {
                if id != 0 {
                    per_id.entry(id).or_default().push(p);
                }
            }
            per_id
        })
        .collect();
    let mut span: HashMap<u32, usize> = HashMap::new();
    for per_id in &footprints {
        for &id in per_id.keys() {
            *span.entry(id).or_insert(0) += 1;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (i.abs_diff(start), i));

    loop {
        let mut changed = false;
        for &i in &order {
            let artefacts: Vec<u32> = footprints[i]
                .keys()
                .copied()
                .filter(|id| span[id] == 1)
                .collect();
            for g in artefacts {
                let Some(region) = footprints[i].get(&g).cloned() else {
                    continue; // absorbed earlier in this pass
                };
                if span[&g] != 1 {
                    continue;
                }
                // Best adjacent multi-slice region by (ratio, size, id).
                let mut best: Option<(f64, usize, u32)> = None;
                for j in [i.checked_sub(1), (i + 1 < n).then_some(i + 1)]
                    .into_iter()
                    .flatten()
                {
                    for (&h, neighbour) in &footprints[j] {
                        if span[&h] < 2 {
                            continue;
                        }
                        let inter = sorted_intersection_len(&region, neighbour);
                        if inter == 0 {
                            continue;
                        }
                        let ratio = inter as f64 / region.len().min(neighbour.len()) as f64;
                        let better = match best {
                            None => true,
                            Some((br, bs, bh)) => {
                                ratio > br
                                    || (ratio == br
                                        && (neighbour.len() > bs
                                            || (neighbour.len() == bs && h < bh)))
                            }
                        };
                        if better {
                            best = Some((ratio, neighbour.len(), h));
                        }
                    }
                }
                let Some((ratio, _, h)) = best else { continue };
                if ratio <= config.line_overlap_threshold {
                    continue;
                }
                for &p in &region {
                    let w = slice_to_volume_coords(axis, i, p % width, p / width);
                    out.voxels[out.meta.linear(w[0], w[1], w[2])] = h;
                }
                let moved = footprints[i].remove(&g).expect("region present");
                span.remove(&g);
                let entry = footprints[i].entry(h).or_insert_with(|| {
                    *span.entry(h).or_insert(0) += 1;
                    Vec::new()
                });
                entry.extend(moved);
                entry.sort_unstable();
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    out
}

fn sorted_intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Stamp every sufficiently-matching 2D instance back onto the volume.
///
/// For each instance (all three axes), the dominant nonzero 3D label
/// under its footprint is computed; when its share of the footprint
/// exceeds `reinsert_overlap_threshold` the instance claims all its
/// voxels for that label. Voxels claimed by several instances go to the
/// label with more voxels in the input volume (ties: smaller id).
pub fn reinsert_2d_segments(
    volume: &LabelVolume,
    stack: &SliceStack,
    config: &MatchConfig,
) -> LabelVolume {
    assert_eq!(
        volume.meta.dims, stack.meta.dims,
        "volume and stack describe different shapes"
    );
    let mut base_counts: HashMap<u32, usize> = HashMap::new();
    for &v in &volume.voxels {
        if v != 0 {
            *base_counts.entry(v).or_insert(0) += 1;
        }
    }

    let index = InstanceIndex::build(stack);
    let mut claims: HashMap<usize, u32> = HashMap::new();
    for axis in Axis::ALL {
        let (width, _) = stack.meta.slice_dims(axis);
        for i in 0..stack.meta.dims[axis.index()] {
            for footprint in index.in_slice(axis, i).values() {
                let positions: Vec<usize> = footprint
                    .iter()
                    .map(|&p| {
                        let w = slice_to_volume_coords(axis, i, p % width, p / width);
                        volume.meta.linear(w[0], w[1], w[2])
                    })
                    .collect();
                let mut overlap: BTreeMap<u32, usize> = BTreeMap::new();
                for &pos in &positions {
                    let label = volume.voxels[pos];
                    if label != 0 {
                        *overlap.entry(label).or_insert(0) += 1;
                    }
                }
                let Some((&label, &count)) = overlap
                    .iter()
                    .max_by_key(|&(&l, &c)| (c, std::cmp::Reverse(l)))
                else {
                    continue;
                };
                if count as f64 / positions.len() as f64 <= config.reinsert_overlap_threshold {
                    continue;
                }
                for &pos in &positions {
                    let stronger = |l: u32| (base_counts.get(&l).copied().unwrap_or(0), std::cmp::Reverse(l));
                    match claims.entry(pos) {
                        std::collections::hash_map::Entry::Vacant(e) => {
                            e.insert(label);
                        }
                        std::collections::hash_map::Entry::Occupied(mut e) => {
                            if stronger(label) > stronger(*e.get()) {
                                e.insert(label);
                            }
                        }
                    }
                }
            }
        }
    }

    let mut out = volume.clone();
    for (pos, label) in claims {
        out.voxels[pos] = label;
    }
    out
}

/// The full fusion pipeline: line matching, artefact absorption,
/// morphological closing (skipped when `closing_iterations` is 0), and
/// 2D reinsertion.
pub fn run_fusion_pipeline(stack: &SliceStack, config: &MatchConfig) -> Result<LabelVolume> {
    let matched = match_slices(stack, config)?;
    let absorbed = close_line_artefacts(&matched, stack, config);
    let closed = if config.closing_iterations > 0 {
        morphology(
            &absorbed,
            MorphOp::Close,
            Connectivity::Six,
            config.closing_iterations,
        )
    } else {
        absorbed
    };
    Ok(reinsert_2d_segments(&closed, stack, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::write_slice;

    fn paint_box(vol: &mut LabelVolume, lo: [usize; 3], hi: [usize; 3], label: u32) {
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    vol.set(x, y, z, label);
                }
            }
        }
    }

    /// Assert the two labellings induce the same partition of voxels
    /// (identical up to a bijective relabeling; background fixed).
    fn assert_same_partition(a: &LabelVolume, b: &LabelVolume) {
        assert_eq!(a.meta.dims, b.meta.dims);
        let mut fwd: HashMap<u32, u32> = HashMap::new();
        let mut bwd: HashMap<u32, u32> = HashMap::new();
        for (&va, &vb) in a.voxels.iter().zip(&b.voxels) {
            assert_eq!(va == 0, vb == 0, "foreground sets differ");
            if va == 0 {
                continue;
            }
            assert_eq!(*fwd.entry(va).or_insert(vb), vb, "label {va} split");
            assert_eq!(*bwd.entry(vb).or_insert(va), va, "label {vb} merged");
        }
    }

    #[test]
    fn single_cube_fuses_into_one_segment() {
        let mut reference = LabelVolume::zeros([8, 8, 8]);
        paint_box(&mut reference, [2, 2, 2], [5, 5, 5], 1);
        let stack = stack_from_global_labels(&reference);
        let fused = match_slices(&stack, &MatchConfig::default()).unwrap();
        assert_same_partition(&fused, &reference);
        let full = run_fusion_pipeline(&stack, &MatchConfig::default()).unwrap();
        assert_same_partition(&full, &reference);
    }

    #[test]
    fn two_disjoint_cubes_stay_separate() {
        // Two voxels clear of every volume face and of each other, so
        // the pipeline's closing step must not move any voxel.
        let mut reference = LabelVolume::zeros([12, 12, 12]);
        paint_box(&mut reference, [2, 2, 2], [4, 4, 4], 1);
        paint_box(&mut reference, [7, 7, 7], [9, 9, 9], 2);
        let stack = stack_from_global_labels(&reference);
        let fused = run_fusion_pipeline(&stack, &MatchConfig::default()).unwrap();
        assert_same_partition(&fused, &reference);
    }

    #[test]
    fn empty_stack_yields_empty_volume() {
        let meta = VolumeMeta::new([5, 6, 7], VoxelKind::LabelU32);
        let stack = SliceStack::empty(meta);
        let fused = run_fusion_pipeline(&stack, &MatchConfig::default()).unwrap();
        assert_eq!(fused.foreground_count(), 0);
    }

    #[test]
    fn output_foreground_equals_start_axis_foreground() {
        // Deliberately inconsistent stack: X and Y maps empty, Z maps
        // carry a square. The output must mirror the Z stack exactly.
        let meta = VolumeMeta::new([4, 4, 4], VoxelKind::LabelU32);
        let mut stack = SliceStack::empty(meta);
        for i in 0..4 {
            let map = stack.map_mut(Axis::Z, i);
            map.set(1, 1, 1);
            map.set(2, 1, 1);
        }
        let fused = match_slices(&stack, &MatchConfig::default()).unwrap();
        for z in 0..4 {
            for y in 0..4 {
                for x in 0..4 {
                    let expect = y == 1 && (x == 1 || x == 2);
                    assert_eq!(fused.get(x, y, z) != 0, expect);
                }
            }
        }
    }

    #[test]
    fn instances_missing_the_start_slice_still_fuse() {
        // Cube confined to low z; default start slice (z = 5) is empty.
        let mut reference = LabelVolume::zeros([10, 10, 10]);
        paint_box(&mut reference, [2, 2, 0], [5, 5, 2], 1);
        let stack = stack_from_global_labels(&reference);
        let fused = match_slices(&stack, &MatchConfig::default()).unwrap();
        assert_same_partition(&fused, &reference);
    }

    #[test]
    fn line_artefact_absorbed_into_surrounding_id() {
        // Matched volume: slices z 0,1,3 carry id 1, z 2 was left as id 7.
        let mut truth = LabelVolume::zeros([3, 3, 4]);
        paint_box(&mut truth, [0, 0, 0], [2, 2, 3], 1);
        let stack = stack_from_global_labels(&truth);
        let mut volume = truth.clone();
        paint_box(&mut volume, [0, 0, 2], [2, 2, 2], 7);
        let healed = close_line_artefacts(&volume, &stack, &MatchConfig::default());
        assert_eq!(healed.voxels, truth.voxels);
    }

    #[test]
    fn artefact_pass_is_a_fixpoint_without_artefacts() {
        let mut volume = LabelVolume::zeros([6, 6, 6]);
        paint_box(&mut volume, [1, 1, 1], [4, 4, 4], 3);
        let stack = stack_from_global_labels(&volume);
        let healed = close_line_artefacts(&volume, &stack, &MatchConfig::default());
        assert_eq!(healed.voxels, volume.voxels);
    }

    #[test]
    fn genuine_single_slice_object_survives_when_nothing_overlaps() {
        // A 1-voxel-thick sheet at z=2 with empty neighbours must not
        // be absorbed (no adjacent candidate overlaps it).
        let mut volume = LabelVolume::zeros([6, 6, 6]);
        paint_box(&mut volume, [0, 0, 2], [5, 5, 2], 4);
        paint_box(&mut volume, [0, 0, 4], [5, 5, 5], 9);
        let stack = stack_from_global_labels(&volume);
        let healed = close_line_artefacts(&volume, &stack, &MatchConfig::default());
        assert_eq!(healed.voxels, volume.voxels);
    }

    #[test]
    fn reinsertion_extends_segment_over_claimed_pixels() {
        // 3D segment 1 covers 12 of the 15 pixels of a Z-slice instance;
        // the remaining 3 voxels adopt label 1.
        let meta = VolumeMeta::new([6, 6, 3], VoxelKind::LabelU32);
        let mut volume = LabelVolume::zeros([6, 6, 3]);
        paint_box(&mut volume, [0, 0, 1], [3, 2, 1], 1);
        let mut stack = SliceStack::empty(meta);
        let map = stack.map_mut(Axis::Z, 1);
        for v in 0..3 {
            for u in 0..5 {
                map.set(u, v, 5);
            }
        }
        let out = reinsert_2d_segments(&volume, &stack, &MatchConfig::default());
        for v in 0..3 {
            assert_eq!(out.get(4, v, 1), 1, "claimed voxel x=4 y={v}");
        }
        assert_eq!(out.foreground_count(), 15);

        // Below the threshold nothing changes.
        let strict = MatchConfig {
            reinsert_overlap_threshold: 0.9,
            ..MatchConfig::default()
        };
        let untouched = reinsert_2d_segments(&volume, &stack, &strict);
        assert_eq!(untouched.voxels, volume.voxels);
    }

    #[test]
    fn reinsertion_is_idempotent_on_consistent_volume() {
        let mut volume = LabelVolume::zeros([8, 8, 8]);
        paint_box(&mut volume, [1, 1, 1], [4, 4, 4], 1);
        paint_box(&mut volume, [6, 6, 6], [7, 7, 7], 2);
        let stack = stack_from_global_labels(&volume);
        let out = reinsert_2d_segments(&volume, &stack, &MatchConfig::default());
        assert_eq!(out.voxels, volume.voxels);
    }

    #[test]
    fn contested_reinsertion_goes_to_larger_segment() {
        // A Z instance (dominant label 1, 6 voxels) and an X instance
        // (dominant label 2, 2 voxels) both claim voxel (3,0,1); the
        // larger segment wins it.
        let meta = VolumeMeta::new([4, 1, 3], VoxelKind::LabelU32);
        let mut volume = LabelVolume::zeros([4, 1, 3]);
        for z in 0..2 {
            for x in 0..3 {
                volume.set(x, 0, z, 1);
            }
        }
        volume.set(3, 0, 0, 2);
        volume.set(3, 0, 2, 2);

        let mut stack = SliceStack::empty(meta);
        let z_map = stack.map_mut(Axis::Z, 1);
        for u in 0..4 {
            z_map.set(u, 0, 8); // overlap 3/4 with label 1
        }
        let x_map = stack.map_mut(Axis::X, 3);
        for v in 0..3 {
            x_map.set(0, v, 9); // overlap 2/3 with label 2
        }

        let out = reinsert_2d_segments(&volume, &stack, &MatchConfig::default());
        assert_eq!(out.get(3, 0, 1), 1, "contested voxel goes to larger label");
        assert_eq!(out.get(3, 0, 0), 2);
        assert_eq!(out.get(3, 0, 2), 2);
        assert_eq!(out.foreground_count(), 9);
    }

    #[test]
    fn pipeline_deterministic_across_runs() {
        let mut reference = LabelVolume::zeros([9, 9, 9]);
        paint_box(&mut reference, [0, 0, 0], [3, 8, 2], 1);
        paint_box(&mut reference, [5, 2, 4], [8, 5, 8], 2);
        paint_box(&mut reference, [0, 5, 5], [2, 8, 8], 3);
        let stack = stack_from_global_labels(&reference);
        let a = run_fusion_pipeline(&stack, &MatchConfig::default()).unwrap();
        let b = run_fusion_pipeline(&stack, &MatchConfig::default()).unwrap();
        assert_eq!(a.voxels, b.voxels);
        assert_same_partition(&a, &reference);
    }

    #[test]
    fn partition_stable_under_local_id_permutation() {
        let mut reference = LabelVolume::zeros([8, 8, 8]);
        paint_box(&mut reference, [1, 1, 1], [3, 3, 6], 1);
        paint_box(&mut reference, [5, 5, 1], [7, 7, 6], 2);
        let stack = stack_from_global_labels(&reference);
        let mut permuted = stack.clone();
        for axis in Axis::ALL {
            for i in 0..8 {
                let map = permuted.map_mut(axis, i);
                // An arbitrary but per-slice-varying injection of ids.
                for p in map.pixels.iter_mut() {
                    if *p != 0 {
                        *p = *p * 7 + i as u32 % 3 + 1;
                    }
                }
            }
        }
        let a = run_fusion_pipeline(&stack, &MatchConfig::default()).unwrap();
        let b = run_fusion_pipeline(&permuted, &MatchConfig::default()).unwrap();
        assert_same_partition(&a, &b);
    }

    #[test]
    fn global_index_map_is_injective_and_never_reuses() {
        let mut map = GlobalIndexMap::new();
        let a = map.assign_fresh((Axis::Z, 0, 1));
        let b = map.assign_fresh((Axis::Z, 0, 2));
        assert_ne!(a, b);
        assert!(map.adopt((Axis::X, 3, 1), a));
        assert!(!map.adopt((Axis::X, 3, 1), b), "re-assignment must be refused");
        assert_eq!(map.get((Axis::X, 3, 1)), Some(a));
        assert_eq!(map.len(), 3);
    }

    #[test]
    fn threshold_validation_rejects_out_of_range() {
        let bad = MatchConfig {
            line_overlap_threshold: 0.0,
            ..MatchConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = MatchConfig {
            reinsert_overlap_threshold: 1.5,
            ..MatchConfig::default()
        };
        assert!(bad.validate().is_err());
        let given = MatchConfig {
            start_index_policy: StartIndexPolicy::Given(9),
            ..MatchConfig::default()
        };
        let stack = SliceStack::empty(VolumeMeta::new([4, 4, 4], VoxelKind::LabelU32));
        assert!(matches!(
            match_slices(&stack, &given),
            Err(Error::SliceIndexOutOfRange { .. })
        ));
    }

    #[test]
    fn stack_validation_errors() {
        let meta = VolumeMeta::new([4, 4, 4], VoxelKind::LabelU32);
        let mut stack = SliceStack::empty(meta);
        stack.maps[0].pop();
        assert!(matches!(
            stack.validate(),
            Err(Error::StackSliceCount { axis: "X", expected: 4, actual: 3 })
        ));
        let mut stack = SliceStack::empty(meta);
        stack.maps[2][1] = LabelMap2d::zeros(3, 4);
        assert!(matches!(stack.validate(), Err(Error::DimsMismatch { .. })));
    }

    #[test]
    fn write_slice_round_trip_through_stack_helper() {
        let mut volume = LabelVolume::zeros([5, 4, 3]);
        paint_box(&mut volume, [1, 1, 0], [3, 2, 2], 6);
        let stack = stack_from_global_labels(&volume);
        let mut rebuilt = LabelVolume::zeros([5, 4, 3]);
        for i in 0..3 {
            write_slice(&mut rebuilt, Axis::Z, i, stack.map(Axis::Z, i)).unwrap();
        }
        assert_eq!(rebuilt.voxels, volume.voxels);
    }
}
