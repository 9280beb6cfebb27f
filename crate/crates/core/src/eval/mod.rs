//! Segment-level assessment of a proposed instance segmentation
//! against a reference labelling.
//!
//! The central object is the correlation matrix: rows are reference
//! segments (largest first), columns are detected segments, cells hold
//! pairwise IoU. A greedy assignment pairs each reference row with at
//! most one detected segment; the paired cells form the main diagonal
//! whose statistics summarize segmentation quality.

mod export;

pub use export::{render_matrix_csv, render_matrix_heatmap, write_matrix_csv, write_matrix_heatmap};

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::volume::{connected_components, Connectivity, LabelVolume};

/// Intersection over union of two voxel sets given as sorted, duplicate-free
/// linear indices.
pub fn compute_iou(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySegment);
    }
    debug_assert!(a.windows(2).all(|w| w[0] < w[1]));
    debug_assert!(b.windows(2).all(|w| w[0] < w[1]));
    let mut inter = 0usize;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    Ok(inter as f64 / union as f64)
}

/// Voxel positions of every nonzero label, in scan order.
pub fn label_positions(volume: &LabelVolume) -> BTreeMap<u32, Vec<usize>> {
    let mut map: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &v) in volume.voxels.iter().enumerate() {
        if v != 0 {
            map.entry(v).or_default().push(i);
        }
    }
    map
}

/// Pairwise IoU between reference segments (rows) and detected segments
/// (columns), with the greedy row-to-column assignment.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    /// Row order: reference labels by voxel count descending, ties by
    /// smaller label.
    pub reference_labels: Vec<u32>,
    /// Column order: matched detected segments first (in row order),
    /// then unmatched ones by voxel count descending.
    pub detected_labels: Vec<u32>,
    /// `iou[row][col]`, all values in [0, 1].
    pub iou: Vec<Vec<f64>>,
    pub ref_voxel_counts: Vec<usize>,
    pub det_voxel_counts: Vec<usize>,
    /// Per row, the assigned column (if any). No column appears twice.
    pub diagonal_assignment: Vec<Option<usize>>,
}

impl CorrelationMatrix {
    pub fn rows(&self) -> usize {
        self.reference_labels.len()
    }

    pub fn cols(&self) -> usize {
        self.detected_labels.len()
    }

    /// Diagonal IoU per row; unmatched rows contribute 0.
    pub fn diagonal(&self) -> Vec<f64> {
        self.diagonal_assignment
            .iter()
            .enumerate()
            .map(|(row, col)| col.map_or(0.0, |c| self.iou[row][c]))
            .collect()
    }
}

/// Build the correlation matrix between `reference` and `proposal`.
///
/// Segments with fewer than `min_segment_voxels` voxels are excluded
/// from both sides before any ordering or assignment. The assignment is
/// greedy in row order: each row claims the unclaimed detected segment
/// with the highest positive IoU (ties: larger detected segment, then
/// smaller label).
pub fn build_correlation_matrix(
    reference: &LabelVolume,
    proposal: &LabelVolume,
    min_segment_voxels: usize,
) -> Result<CorrelationMatrix> {
    if reference.meta.dims != proposal.meta.dims {
        return Err(Error::DimsMismatch {
            left: reference.meta.dims,
            right: proposal.meta.dims,
        });
    }

    let mut ref_counts: HashMap<u32, usize> = HashMap::new();
    let mut det_counts: HashMap<u32, usize> = HashMap::new();
    let mut joint: HashMap<(u32, u32), usize> = HashMap::new();
    for (&r, &d) in reference.voxels.iter().zip(&proposal.voxels) {
        if r != 0 {
            *ref_counts.entry(r).or_insert(0) += 1;
        }
        if d != 0 {
            *det_counts.entry(d).or_insert(0) += 1;
        }
        if r != 0 && d != 0 {
            *joint.entry((r, d)).or_insert(0) += 1;
        }
    }
    ref_counts.retain(|_, &mut c| c >= min_segment_voxels.max(1));
    det_counts.retain(|_, &mut c| c >= min_segment_voxels.max(1));

    let mut rows: Vec<u32> = ref_counts.keys().copied().collect();
    rows.sort_by_key(|l| (std::cmp::Reverse(ref_counts[l]), *l));

    // Greedy assignment over the joint histogram.
    let mut claimed: HashMap<u32, usize> = HashMap::new(); // det label -> row
    let mut matched_per_row: Vec<Option<u32>> = Vec::with_capacity(rows.len());
    for &r in &rows {
        let rc = ref_counts[&r];
        let mut best: Option<(f64, usize, u32)> = None; // (iou, det count, det label)
        for (&(jr, jd), &inter) in &joint {
            if jr != r || claimed.contains_key(&jd) {
                continue;
            }
            let Some(&dc) = det_counts.get(&jd) else {
                continue;
            };
            let iou = inter as f64 / (rc + dc - inter) as f64;
            if iou <= 0.0 {
                continue;
            }
            let better = match best {
                None => true,
                Some((bi, bc, bl)) => {
                    iou > bi || (iou == bi && (dc > bc || (dc == bc && jd < bl)))
                }
            };
            if better {
                best = Some((iou, dc, jd));
            }
        }
        match best {
            Some((_, _, d)) => {
                claimed.insert(d, matched_per_row.len());
                matched_per_row.push(Some(d));
            }
            None => matched_per_row.push(None),
        }
    }

    let mut detected: Vec<u32> = matched_per_row.iter().flatten().copied().collect();
    let mut unmatched: Vec<u32> = det_counts
        .keys()
        .copied()
        .filter(|d| !claimed.contains_key(d))
        .collect();
    unmatched.sort_by_key(|l| (std::cmp::Reverse(det_counts[l]), *l));
    detected.extend(unmatched);

    let col_of: HashMap<u32, usize> = detected
        .iter()
        .enumerate()
        .map(|(i, &d)| (d, i))
        .collect();
    let mut iou = vec![vec![0.0f64; detected.len()]; rows.len()];
    for (i, &r) in rows.iter().enumerate() {
        let rc = ref_counts[&r];
        for (j, &d) in detected.iter().enumerate() {
            if let Some(&inter) = joint.get(&(r, d)) {
                iou[i][j] = inter as f64 / (rc + det_counts[&d] - inter) as f64;
            }
        }
    }
    let diagonal_assignment = matched_per_row
        .iter()
        .map(|m| m.map(|d| col_of[&d]))
        .collect();

    Ok(CorrelationMatrix {
        ref_voxel_counts: rows.iter().map(|l| ref_counts[l]).collect(),
        det_voxel_counts: detected.iter().map(|l| det_counts[l]).collect(),
        reference_labels: rows,
        detected_labels: detected,
        iou,
        diagonal_assignment,
    })
}

/// Re-split a proposal into connected components before evaluation, so
/// that spatially disjoint parts sharing a label become separate
/// segments.
pub fn cc_postprocess_proposal(proposal: &LabelVolume, connectivity: Connectivity) -> LabelVolume {
    connected_components(proposal, connectivity)
}

/// Max / mean / population standard deviation of a group of diagonal
/// values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupStats {
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

impl GroupStats {
    fn of(values: &[f64]) -> GroupStats {
        if values.is_empty() {
            return GroupStats {
                max: 0.0,
                mean: 0.0,
                std: 0.0,
            };
        }
        let n = values.len() as f64;
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        GroupStats {
            max,
            mean,
            std: var.sqrt(),
        }
    }
}

/// Diagonal statistics over all rows and over the front (large) and
/// back (small) halves of the row order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagonalStats {
    pub all: GroupStats,
    pub large: GroupStats,
    pub small: GroupStats,
}

/// Statistics of the matrix diagonal; rows without an assignment count
/// as 0. The large group is the first `ceil(n/2)` rows.
pub fn diagonal_stats(matrix: &CorrelationMatrix) -> Result<DiagonalStats> {
    if matrix.rows() == 0 {
        return Err(Error::EmptyMatrix);
    }
    let diag = matrix.diagonal();
    let split = matrix.rows().div_ceil(2);
    Ok(DiagonalStats {
        all: GroupStats::of(&diag),
        large: GroupStats::of(&diag[..split]),
        small: GroupStats::of(&diag[split..]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_labels(dims: [usize; 3], max_label: u32, seed: u64) -> LabelVolume {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vol = LabelVolume::zeros(dims);
        for v in vol.voxels.iter_mut() {
            *v = rng.gen_range(0..=max_label);
        }
        vol
    }

    #[test]
    fn iou_endpoints_and_formula() {
        let a: Vec<usize> = (0..50).collect();
        assert_eq!(compute_iou(&a, &a).unwrap(), 1.0);
        let b: Vec<usize> = (50..75).collect();
        assert_eq!(compute_iou(&a, &b).unwrap(), 0.0);
        let c: Vec<usize> = (0..100).collect();
        let d: Vec<usize> = (50..150).collect();
        let iou = compute_iou(&c, &d).unwrap();
        assert!((iou - 50.0 / 150.0).abs() < 1e-15);
        assert!(matches!(compute_iou(&[], &a), Err(Error::EmptySegment)));
    }

    #[test]
    fn iou_is_symmetric_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let mut a: Vec<usize> = (0..200).filter(|_| rng.gen_bool(0.3)).collect();
            let mut b: Vec<usize> = (0..200).filter(|_| rng.gen_bool(0.3)).collect();
            if a.is_empty() {
                a.push(0);
            }
            if b.is_empty() {
                b.push(1);
            }
            assert_eq!(compute_iou(&a, &b).unwrap(), compute_iou(&b, &a).unwrap());
        }
    }

    #[test]
    fn self_comparison_yields_identity_matrix() {
        let vol = random_labels([8, 8, 8], 5, 9);
        let m = build_correlation_matrix(&vol, &vol, 0).unwrap();
        assert_eq!(m.rows(), m.cols());
        for i in 0..m.rows() {
            assert_eq!(m.diagonal_assignment[i], Some(i));
            for j in 0..m.cols() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_eq!(m.iou[i][j], expect, "cell ({i},{j})");
            }
        }
        // Row ordering: counts descending, ties by smaller label.
        for w in m.ref_voxel_counts.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn all_background_proposal_has_no_columns() {
        let vol = random_labels([6, 6, 6], 3, 2);
        let empty = LabelVolume::zeros([6, 6, 6]);
        let m = build_correlation_matrix(&vol, &empty, 0).unwrap();
        assert!(m.rows() >= 1);
        assert_eq!(m.cols(), 0);
        assert!(m.diagonal_assignment.iter().all(|a| a.is_none()));
        assert!(m.diagonal().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn dims_mismatch_is_an_error() {
        let a = LabelVolume::zeros([4, 4, 4]);
        let b = LabelVolume::zeros([4, 4, 5]);
        assert!(matches!(
            build_correlation_matrix(&a, &b, 0),
            Err(Error::DimsMismatch { .. })
        ));
    }

    /// Independent oracle: recompute orderings and the greedy assignment
    /// from raw voxel sets with `compute_iou`.
    fn greedy_oracle(
        reference: &LabelVolume,
        proposal: &LabelVolume,
        min_voxels: usize,
    ) -> (Vec<u32>, Vec<Option<u32>>, Vec<f64>) {
        let min = min_voxels.max(1);
        let refs: BTreeMap<u32, Vec<usize>> = label_positions(reference)
            .into_iter()
            .filter(|(_, v)| v.len() >= min)
            .collect();
        let dets: BTreeMap<u32, Vec<usize>> = label_positions(proposal)
            .into_iter()
            .filter(|(_, v)| v.len() >= min)
            .collect();
        let mut rows: Vec<u32> = refs.keys().copied().collect();
        rows.sort_by_key(|l| (std::cmp::Reverse(refs[l].len()), *l));
        let mut claimed: Vec<u32> = Vec::new();
        let mut matches = Vec::new();
        let mut diag = Vec::new();
        for r in &rows {
            let mut best: Option<(f64, usize, u32)> = None;
            for (d, dv) in &dets {
                if claimed.contains(d) {
                    continue;
                }
                let iou = compute_iou(&refs[r], dv).unwrap();
                if iou <= 0.0 {
                    continue;
                }
                let key = (iou, dv.len(), *d);
                let better = match best {
                    None => true,
                    Some((bi, bc, bl)) => {
                        key.0 > bi || (key.0 == bi && (key.1 > bc || (key.1 == bc && key.2 < bl)))
                    }
                };
                if better {
                    best = Some(key);
                }
            }
            match best {
                Some((iou, _, d)) => {
                    claimed.push(d);
                    matches.push(Some(d));
                    diag.push(iou);
                }
                None => {
                    matches.push(None);
                    diag.push(0.0);
                }
            }
        }
        (rows, matches, diag)
    }

    #[test]
    fn matches_exhaustive_pairwise_greedy_oracle() {
        for seed in 0..10 {
            let reference = random_labels([8, 8, 8], 3, seed);
            let proposal = random_labels([8, 8, 8], 4, seed + 1000);
            let m = build_correlation_matrix(&reference, &proposal, 0).unwrap();
            let (rows, matches, diag) = greedy_oracle(&reference, &proposal, 0);
            assert_eq!(m.reference_labels, rows, "seed {seed}");
            let got_matches: Vec<Option<u32>> = m
                .diagonal_assignment
                .iter()
                .map(|a| a.map(|c| m.detected_labels[c]))
                .collect();
            assert_eq!(got_matches, matches, "seed {seed}");
            for (a, b) in m.diagonal().iter().zip(&diag) {
                assert!((a - b).abs() < 1e-12, "seed {seed}");
            }
        }
    }

    #[test]
    fn size_filter_excludes_both_sides() {
        // Segment 1: 99 voxels; segment 2: 100; segment 3: 136.
        let mut reference = LabelVolume::zeros([20, 20, 3]);
        let mut i = 0;
        for (label, count) in [(1u32, 99usize), (2, 100), (3, 136)] {
            for _ in 0..count {
                reference.voxels[i] = label;
                i += 1;
            }
        }
        let m = build_correlation_matrix(&reference, &reference, 100).unwrap();
        assert_eq!(m.reference_labels, vec![3, 2]);
        assert_eq!(m.detected_labels, vec![3, 2]);
        assert_eq!(m.ref_voxel_counts, vec![136, 100]);
        for i in 0..2 {
            assert_eq!(m.diagonal_assignment[i], Some(i));
            assert_eq!(m.iou[i][i], 1.0);
        }
    }

    #[test]
    fn proposal_relabeling_preserves_diagonal_and_structure() {
        let reference = random_labels([8, 8, 8], 3, 21);
        let proposal = random_labels([8, 8, 8], 4, 22);
        let permuted = LabelVolume::from_voxels(
            proposal.meta,
            proposal
                .voxels
                .iter()
                .map(|&v| if v == 0 { 0 } else { 10 + (5 - v) })
                .collect(),
        );
        let a = build_correlation_matrix(&reference, &proposal, 0).unwrap();
        let b = build_correlation_matrix(&reference, &permuted, 0).unwrap();
        assert_eq!(a.diagonal(), b.diagonal());
        assert_eq!(
            a.diagonal_assignment.iter().map(|x| x.is_some()).collect::<Vec<_>>(),
            b.diagonal_assignment.iter().map(|x| x.is_some()).collect::<Vec<_>>()
        );
        assert_eq!(a.reference_labels, b.reference_labels);
    }

    #[test]
    fn diagonal_is_row_max_unless_claimed_earlier() {
        for seed in 30..36 {
            let reference = random_labels([8, 8, 8], 4, seed);
            let proposal = random_labels([8, 8, 8], 3, seed + 50);
            let m = build_correlation_matrix(&reference, &proposal, 0).unwrap();
            let mut claimed_before: Vec<usize> = Vec::new();
            for row in 0..m.rows() {
                let row_max = m.iou[row].iter().copied().fold(0.0, f64::max);
                let diag = m.diagonal_assignment[row].map_or(0.0, |c| m.iou[row][c]);
                if diag < row_max {
                    // Some strictly better column must have been claimed
                    // by an earlier row.
                    let exists = (0..m.cols()).any(|c| {
                        m.iou[row][c] > diag && claimed_before.contains(&c)
                    });
                    assert!(exists, "seed {seed} row {row}");
                }
                if let Some(c) = m.diagonal_assignment[row] {
                    claimed_before.push(c);
                }
            }
        }
    }

    #[test]
    fn cc_postprocess_splits_disjoint_same_label_parts() {
        let mut vol = LabelVolume::zeros([8, 4, 4]);
        vol.set(0, 0, 0, 7);
        vol.set(7, 3, 3, 7);
        let out = cc_postprocess_proposal(&vol, Connectivity::TwentySix);
        assert_eq!(out.max_label(), 2);
        let connected = cc_postprocess_proposal(&out, Connectivity::TwentySix);
        assert_eq!(connected.max_label(), 2);
    }

    #[test]
    fn two_element_diagonal_statistics() {
        let m = CorrelationMatrix {
            reference_labels: vec![1, 2],
            detected_labels: vec![9],
            iou: vec![vec![1.0], vec![0.0]],
            ref_voxel_counts: vec![10, 5],
            det_voxel_counts: vec![10],
            diagonal_assignment: vec![Some(0), None],
        };
        let s = diagonal_stats(&m).unwrap();
        assert_eq!(s.all, GroupStats { max: 1.0, mean: 0.5, std: 0.5 });
        assert_eq!(s.large, GroupStats { max: 1.0, mean: 1.0, std: 0.0 });
        assert_eq!(s.small, GroupStats { max: 0.0, mean: 0.0, std: 0.0 });
    }

    #[test]
    fn stats_match_naive_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.gen_range(1..=20);
            let diag: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let matched: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.8)).collect();
            let m = CorrelationMatrix {
                reference_labels: (1..=n as u32).collect(),
                detected_labels: (1..=n as u32).collect(),
                iou: (0..n).map(|i| {
                    (0..n).map(|j| if i == j { diag[i] } else { 0.0 }).collect()
                }).collect(),
                ref_voxel_counts: vec![1; n],
                det_voxel_counts: vec![1; n],
                diagonal_assignment: matched
                    .iter()
                    .enumerate()
                    .map(|(i, &m)| m.then_some(i))
                    .collect(),
            };
            let s = diagonal_stats(&m).unwrap();
            let values: Vec<f64> = (0..n)
                .map(|i| if matched[i] { diag[i] } else { 0.0 })
                .collect();
            let naive = |vs: &[f64]| -> (f64, f64, f64) {
                if vs.is_empty() {
                    return (0.0, 0.0, 0.0);
                }
                let mx = vs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mean = vs.iter().sum::<f64>() / vs.len() as f64;
                let std = (vs.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                    / vs.len() as f64)
                    .sqrt();
                (mx, mean, std)
            };
            let split = n.div_ceil(2);
            for (got, vs) in [
                (s.all, &values[..]),
                (s.large, &values[..split]),
                (s.small, &values[split..]),
            ] {
                let (mx, mean, std) = naive(vs);
                assert!((got.max - mx).abs() < 1e-12);
                assert!((got.mean - mean).abs() < 1e-12);
                assert!((got.std - std).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_matrix_is_an_error() {
        let empty = LabelVolume::zeros([4, 4, 4]);
        let m = build_correlation_matrix(&empty, &empty, 0).unwrap();
        assert!(matches!(diagonal_stats(&m), Err(Error::EmptyMatrix)));
    }
}
