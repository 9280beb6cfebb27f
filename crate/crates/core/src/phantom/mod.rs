//! Deterministic synthetic test scenes.
//!
//! A phantom is a labelled arrangement of simple industrial shapes
//! (sheets, pipes, rivets, brackets) plus a matching noisy intensity
//! volume. Everything is a pure function of the spec — in particular of
//! its seed — so generated fixtures are reproducible across runs,
//! platforms, and thread counts. Helpers derive pipeline inputs from
//! the reference labels: per-axis 2D instance stacks, randomly
//! corrupted stacks, and label volumes with randomly merged segments.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::SliceStack;
use crate::volume::{extract_slice, label_components_2d, Axis, LabelVolume, ScalarVolume};

/// Placement attempts per object before the spec is rejected.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 100;

/// Empty voxels kept between any object and the volume faces.
const BOUNDARY_GAP: usize = 2;

/// Random streams 0..dims[2] are reserved for per-slice noise; object
/// placement draws from a disjoint stream range.
const PLACEMENT_STREAM_BASE: u64 = 1 << 40;

/// Axis-aligned solid shapes. All are convex, so every planar
/// cross-section is a single connected 2D region and morphological
/// closing leaves them unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Thin plate: `thickness` voxels along `normal`, `extent` along the
    /// two remaining axes (ascending order).
    Sheet {
        thickness: usize,
        normal: Axis,
        extent: [usize; 2],
    },
    /// Solid rod along `axis`: voxels within `radius` of the axis line.
    Pipe {
        radius: usize,
        axis: Axis,
        length: usize,
    },
    /// Short vertical rod (a pipe along Z).
    Rivet { radius: usize, length: usize },
    /// Solid block.
    Bracket { dims: [usize; 3] },
}

impl Shape {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Shape::Sheet { .. } => "sheet",
            Shape::Pipe { .. } => "pipe",
            Shape::Rivet { .. } => "rivet",
            Shape::Bracket { .. } => "bracket",
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Sheet { thickness, extent, .. } => {
                thickness >= 1 && extent.iter().all(|&e| e >= 1)
            }
            Shape::Pipe { length, .. } => length >= 1,
            Shape::Rivet { length, .. } => length >= 1,
            Shape::Bracket { dims } => dims.iter().all(|&d| d >= 1),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "{} has a zero-sized dimension",
                self.kind_name()
            )))
        }
    }

    /// Voxel offsets relative to the shape center.
    fn offsets(&self) -> Vec<[i64; 3]> {
        fn centered(size: usize) -> std::ops::RangeInclusive<i64> {
            let lo = -((size as i64 - 1) / 2);
            lo..=(lo + size as i64 - 1)
        }
        let box_offsets = |sizes: [usize; 3]| -> Vec<[i64; 3]> {
            let mut out = Vec::with_capacity(sizes.iter().product());
            for z in centered(sizes[2]) {
                for y in centered(sizes[1]) {
                    for x in centered(sizes[0]) {
                        out.push([x, y, z]);
                    }
                }
            }
            out
        };
        let rod_offsets = |radius: usize, axis: Axis, length: usize| -> Vec<[i64; 3]> {
            let r = radius as i64;
            let [u, v] = axis.others();
            let mut out = Vec::new();
            for t in centered(length) {
                for dv in -r..=r {
                    for du in -r..=r {
                        if du * du + dv * dv <= r * r {
                            let mut p = [0i64; 3];
                            p[axis.index()] = t;
                            p[u.index()] = du;
                            p[v.index()] = dv;
                            out.push(p);
                        }
                    }
                }
            }
            out
        };
        match *self {
            Shape::Sheet {
                thickness,
                normal,
                extent,
            } => {
                let [u, v] = normal.others();
                let mut sizes = [0usize; 3];
                sizes[normal.index()] = thickness;
                sizes[u.index()] = extent[0];
                sizes[v.index()] = extent[1];
                box_offsets(sizes)
            }
            Shape::Pipe {
                radius,
                axis,
                length,
            } => rod_offsets(radius, axis, length),
            Shape::Rivet { radius, length } => rod_offsets(radius, Axis::Z, length),
            Shape::Bracket { dims } => box_offsets(dims),
        }
    }
}

fn default_contrast() -> f64 {
    1.0
}

/// One object of a phantom: shape, intensity, and optional fixed
/// placement (otherwise a seeded random position is searched).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub shape: Shape,
    /// Intensity of the object in the scalar volume, in (0, 1].
    #[serde(default = "default_contrast")]
    pub contrast: f64,
    #[serde(default)]
    pub center: Option<[usize; 3]>,
}

impl ObjectSpec {
    pub fn new(shape: Shape) -> Self {
        ObjectSpec {
            shape,
            contrast: default_contrast(),
            center: None,
        }
    }
}

fn default_min_separation() -> usize {
    2
}

/// Full description of a synthetic scene.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub seed: u64,
    pub objects: Vec<ObjectSpec>,
    /// Standard deviation of the additive Gaussian intensity noise.
    #[serde(default)]
    pub noise_sigma: f64,
    /// Minimum Chebyshev distance between voxels of distinct objects.
    #[serde(default = "default_min_separation")]
    pub min_separation: usize,
}

impl PhantomSpec {
    fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "phantom dims must all be >= 1, got {:?}",
                self.dims
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise_sigma must be a finite non-negative number, got {}",
                self.noise_sigma
            )));
        }
        for (i, obj) in self.objects.iter().enumerate() {
            obj.shape.validate()?;
            if !(obj.contrast > 0.0 && obj.contrast <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "object {i}: contrast must lie in (0, 1], got {}",
                    obj.contrast
                )));
            }
        }
        Ok(())
    }
}

fn bbox(offsets: &[[i64; 3]]) -> ([i64; 3], [i64; 3]) {
    let mut lo = [i64::MAX; 3];
    let mut hi = [i64::MIN; 3];
    for o in offsets {
        for a in 0..3 {
            lo[a] = lo[a].min(o[a]);
            hi[a] = hi[a].max(o[a]);
        }
    }
    (lo, hi)
}

/// True when every voxel of the candidate keeps Chebyshev distance
/// `separation` to all already-placed foreground.
fn placement_is_clear(labels: &LabelVolume, voxels: &[[i64; 3]], separation: usize) -> bool {
    let window = separation.saturating_sub(1) as i64;
    let dims = labels.meta.dims;
    voxels.iter().all(|&[x, y, z]| {
        for dz in -window..=window {
            for dy in -window..=window {
                for dx in -window..=window {
                    let (px, py, pz) = (x + dx, y + dy, z + dz);
                    if px < 0
                        || py < 0
                        || pz < 0
                        || px >= dims[0] as i64
                        || py >= dims[1] as i64
                        || pz >= dims[2] as i64
                    {
                        continue;
                    }
                    if labels.voxels[labels.meta.linear(px as usize, py as usize, pz as usize)] != 0
                    {
                        return false;
                    }
                }
            }
        }
        true
    })
}

/// Rasterize the spec into paired (intensity, label) volumes.
///
/// Labels are 1..K in object order. Objects are placed with at least
/// `min_separation` Chebyshev distance between them and two empty
/// voxels to every volume face; explicitly-centered objects must obey
/// the same rules. The intensity volume is each object's contrast plus
/// per-voxel Gaussian noise, clamped to [0, 1].
pub fn generate_phantom(spec: &PhantomSpec) -> Result<(ScalarVolume, LabelVolume)> {
    spec.validate()?;
    let dims = spec.dims;
    let mut labels = LabelVolume::zeros(dims);

    for (k, obj) in spec.objects.iter().enumerate() {
        let offsets = obj.shape.offsets();
        let (lo, hi) = bbox(&offsets);
        let shape_name = obj.shape.kind_name().to_string();
        // Valid center range so the shape plus boundary gap fits.
        let mut c_min = [0i64; 3];
        let mut c_max = [0i64; 3];
        for a in 0..3 {
            c_min[a] = BOUNDARY_GAP as i64 - lo[a];
            c_max[a] = dims[a] as i64 - 1 - BOUNDARY_GAP as i64 - hi[a];
            if c_min[a] > c_max[a] {
                return Err(Error::ObjectOutOfBounds {
                    index: k,
                    shape: shape_name,
                    dims,
                });
            }
        }

        let place = |labels: &mut LabelVolume, center: [i64; 3]| -> Option<Vec<[i64; 3]>> {
            let voxels: Vec<[i64; 3]> = offsets
                .iter()
                .map(|o| [center[0] + o[0], center[1] + o[1], center[2] + o[2]])
                .collect();
            if !placement_is_clear(labels, &voxels, spec.min_separation) {
                return None;
            }
            for &[x, y, z] in &voxels {
                let idx = labels.meta.linear(x as usize, y as usize, z as usize);
                labels.voxels[idx] = (k + 1) as u32;
            }
            Some(voxels)
        };

        match obj.center {
            Some(c) => {
                let c = [c[0] as i64, c[1] as i64, c[2] as i64];
                if (0..3).any(|a| c[a]< c_min[a] || c[a] > c_max[a]) {
                    return Err(Error::ObjectOutOfBounds {
                        index: k,
                        shape: shape_name,
                        dims,
                    });
                }
                if place(&mut labels, c).is_none() {
                    return Err(Error::UnplaceableObject {
                        index: k,
                        shape: shape_name,
                        attempts: 1,
                    });
                }
            }
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                rng.set_stream(PLACEMENT_STREAM_BASE + k as u64);
                let mut placed = false;
                for _ in 0..MAX_PLACEMENT_ATTEMPTS {
                    let c = [
                        rng.gen_range(c_min[0]..=c_max[0]),
                        rng.gen_range(c_min[1]..=c_max[1]),
                        rng.gen_range(c_min[2]..=c_max[2]),
                    ];
                    if place(&mut labels, c).is_some() {
                        placed = true;
                        break;
                    }
                }
                if !placed {
                    return Err(Error::UnplaceableObject {
                        index: k,
                        shape: shape_name,
                        attempts: MAX_PLACEMENT_ATTEMPTS,
                    });
                }
            }
        }
    }

    let contrast_of: Vec<f32> = std::iter::once(0.0)
        .chain(spec.objects.iter().map(|o| o.contrast as f32))
        .collect();
    let mut scalar = ScalarVolume::zeros(dims);
    let plane = dims[0] * dims[1];
    if spec.noise_sigma > 0.0 {
        let sigma = spec.noise_sigma;
        let seed = spec.seed;
        scalar
            .voxels
            .par_chunks_mut(plane)
            .zip(labels.voxels.par_chunks(plane))
            .enumerate()
            .for_each(|(z, (out, lab))| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(z as u64);
                let normal = Normal::new(0.0f64, sigma).expect("sigma validated");
                for (o, &l) in out.iter_mut().zip(lab) {
                    let v = contrast_of[l as usize] as f64 + normal.sample(&mut rng);
                    *o = v.clamp(0.0, 1.0) as f32;
                }
            });
    } else {
        for (o, &l) in scalar.voxels.iter_mut().zip(&labels.voxels) {
            *o = contrast_of[l as usize];
        }
    }
    Ok((scalar, labels))
}

/// Slice the reference along all three axes and relabel each slice with
/// 2D connected components (8-connectivity), so the local ids carry no
/// cross-slice information — exactly what a flawless per-slice 2D
/// instance segmenter would produce.
pub fn perfect_slice_stack(reference: &LabelVolume) -> SliceStack {
    let mut stack = SliceStack::empty(reference.meta);
    for axis in Axis::ALL {
        for i in 0..reference.meta.dims[axis.index()] {
            let slice = extract_slice(reference, axis, i).expect("slice in range");
            stack.maps[axis.index()][i] = label_components_2d(&slice);
        }
    }
    stack
}

/// Realized corruption counts of [`corrupt_stack_detailed`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CorruptionStats {
    /// 2D instances deleted outright.
    pub dropped: usize,
    /// 2D instances cut in two (each adds one instance).
    pub split: usize,
}

/// Randomly delete and split 2D instances, simulating an imperfect 2D
/// segmenter. Each instance is independently dropped with probability
/// `drop_rate`, otherwise split with probability `split_rate` along a
/// random axis-aligned cut through its bounding box.
pub fn corrupt_stack_detailed(
    stack: &SliceStack,
    seed: u64,
    split_rate: f64,
    drop_rate: f64,
) -> (SliceStack, CorruptionStats) {
    assert!((0.0..=1.0).contains(&split_rate), "split_rate in [0, 1]");
    assert!((0.0..=1.0).contains(&drop_rate), "drop_rate in [0, 1]");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = stack.clone();
    let mut stats = CorruptionStats::default();

    for axis in Axis::ALL {
        for i in 0..stack.meta.dims[axis.index()] {
            let map = out.map_mut(axis, i);
            let ids: BTreeSet<u32> = map.pixels.iter().copied().filter(|&p| p != 0).collect();
            let mut next_id = map.max_label() + 1;
            for id in ids {
                let roll: f64 = rng.gen();
                if roll < drop_rate {
                    for p in map.pixels.iter_mut() {
                        if *p == id {
                            *p = 0;
                        }
                    }
                    stats.dropped += 1;
                    continue;
                }
                let roll: f64 = rng.gen();
                if roll >= split_rate {
                    continue;
                }
                let pixels: Vec<(usize, usize)> = (0..map.pixels.len())
                    .filter(|&p| map.pixels[p] == id)
                    .map(|p| (p % map.width, p / map.width))
                    .collect();
                let (umin, umax) = match pixels.iter().map(|&(u, _)| u).fold(None, min_max) {
                    Some(b) => b,
                    None => continue,
                };
                let (vmin, vmax) = pixels
                    .iter()
                    .map(|&(_, v)| v)
                    .fold(None, min_max)
                    .expect("nonempty");
                // Prefer a random axis, fall back to the other when the
                // instance is one pixel wide along the choice.
                let cut_u: bool = rng.gen();
                let (along_u, lo, hi) = if cut_u && umin < umax {
                    (true, umin, umax)
                } else if vmin < vmax {
                    (false, vmin, vmax)
                } else if umin < umax {
                    (true, umin, umax)
                } else {
                    continue; // single pixel: nothing to split
                };
                let cut = rng.gen_range(lo + 1..=hi);
                for &(u, v) in &pixels {
                    let coord = if along_u { u } else { v };
                    if coord >= cut {
                        map.pixels[v * map.width + u] = next_id;
                    }
                }
                next_id += 1;
                stats.split += 1;
            }
        }
    }
    (out, stats)
}

fn min_max(acc: Option<(usize, usize)>, v: usize) -> Option<(usize, usize)> {
    Some(match acc {
        None => (v, v),
        Some((lo, hi)) => (lo.min(v), hi.max(v)),
    })
}

/// [`corrupt_stack_detailed`] without the counts.
pub fn corrupt_stack(stack: &SliceStack, seed: u64, split_rate: f64, drop_rate: f64) -> SliceStack {
    corrupt_stack_detailed(stack, seed, split_rate, drop_rate).0
}

/// Randomly merge pairs of segments (`merges` times), producing the
/// kind of under-segmented proposal that connected-component
/// postprocessing is meant to repair.
pub fn merge_random_segments(volume: &LabelVolume, seed: u64, merges: usize) -> LabelVolume {
    let mut groups: Vec<(u32, Vec<u32>)> = {
        let present: BTreeSet<u32> = volume.voxels.iter().copied().filter(|&v| v != 0).collect();
        present.into_iter().map(|l| (l, vec![l])).collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..merges {
        if groups.len() < 2 {
            break;
        }
        let i = rng.gen_range(0..groups.len());
        let mut j = rng.gen_range(0..groups.len() - 1);
        if j >= i {
            j += 1;
        }
        let (keep, absorb) = (i.min(j), i.max(j));
        let (_, members) = groups.remove(absorb);
        groups[keep].1.extend(members);
    }
    let mut remap: HashMap<u32, u32> = HashMap::new();
    for (name, members) in &groups {
        for &m in members {
            remap.insert(m, *name);
        }
    }
    LabelVolume::from_voxels(
        volume.meta,
        volume
            .voxels
            .iter()
            .map(|&v| if v == 0 { 0 } else { remap[&v] })
            .collect(),
    )
}
