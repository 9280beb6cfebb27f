//! End-to-end flows across modules: synthetic scenes pushed through
//! slice fusion, marker watershed, denoising, and the correlation
//! matrix that scores the results.

use voxseg::eval::{build_correlation_matrix, cc_postprocess_proposal, diagonal_stats};
use voxseg::fusion::{run_fusion_pipeline, MatchConfig};
use voxseg::instancer::{run_watershed_pipeline, WatershedConfig};
use voxseg::phantom::{
    corrupt_stack, generate_phantom, merge_random_segments, perfect_slice_stack, ObjectSpec,
    PhantomSpec, Shape,
};
use voxseg::preprocess::{labels_to_three_class, tv_denoise};
use voxseg::volume::{Axis, Connectivity};

/// Five well-separated objects, all at least three voxels thick in
/// every direction so one erosion leaves a connected core.
fn scene(seed: u64) -> PhantomSpec {
    PhantomSpec {
        dims: [48, 48, 48],
        seed,
        objects: vec![
            ObjectSpec::new(Shape::Sheet {
                thickness: 3,
                normal: Axis::Z,
                extent: [20, 14],
            }),
            ObjectSpec::new(Shape::Pipe {
                radius: 2,
                axis: Axis::X,
                length: 24,
            }),
            ObjectSpec::new(Shape::Rivet { radius: 2, length: 8 }),
            ObjectSpec::new(Shape::Rivet { radius: 2, length: 8 }),
            ObjectSpec::new(Shape::Bracket { dims: [5, 6, 4] }),
        ],
        noise_sigma: 0.0,
        min_separation: 3,
    }
}

#[test]
fn perfect_stacks_fuse_back_to_the_reference() {
    for seed in [1, 2, 3] {
        let (_, reference) = generate_phantom(&scene(seed)).unwrap();
        let stack = perfect_slice_stack(&reference);
        let fused = run_fusion_pipeline(&stack, &MatchConfig::default()).unwrap();
        assert_eq!(fused.foreground_count(), reference.foreground_count());

        let matrix = build_correlation_matrix(&reference, &fused, 0).unwrap();
        assert_eq!(matrix.rows(), 5, "seed {seed}");
        assert_eq!(matrix.cols(), 5, "seed {seed}");
        for (row, iou) in matrix.diagonal().iter().enumerate() {
            assert_eq!(*iou, 1.0, "seed {seed}, row {row}");
        }
    }
}

#[test]
fn split_and_drop_corruption_fuses_to_near_perfect() {
    let (_, reference) = generate_phantom(&scene(9)).unwrap();
    let stack = perfect_slice_stack(&reference);
    let corrupted = corrupt_stack(&stack, 99, 0.1, 0.02);
    assert_ne!(corrupted, stack);
    let fused = run_fusion_pipeline(&corrupted, &MatchConfig::default()).unwrap();
    let matrix = build_correlation_matrix(&reference, &fused, 0).unwrap();
    let stats = diagonal_stats(&matrix).unwrap();
    assert!(
        stats.all.mean >= 0.85,
        "mean diagonal IoU {} below 0.85",
        stats.all.mean
    );
}

#[test]
fn watershed_recovers_separated_objects_exactly() {
    let (_, reference) = generate_phantom(&scene(5)).unwrap();
    let classes = labels_to_three_class(&reference, 1);
    let instances = run_watershed_pipeline(&classes, &WatershedConfig::default()).unwrap();
    let matrix = build_correlation_matrix(&reference, &instances, 0).unwrap();
    assert_eq!(matrix.cols(), 5);
    for (row, iou) in matrix.diagonal().iter().enumerate() {
        assert_eq!(*iou, 1.0, "row {row}");
    }
}

#[test]
fn cc_postprocess_repairs_random_merges() {
    let (_, reference) = generate_phantom(&scene(7)).unwrap();
    let merged = merge_random_segments(&reference, 17, 2);

    let before = build_correlation_matrix(&reference, &merged, 0).unwrap();
    assert_eq!(before.cols(), 3);
    let before_mean = diagonal_stats(&before).unwrap().all.mean;
    assert!(before_mean < 1.0);

    let repaired = cc_postprocess_proposal(&merged, Connectivity::TwentySix);
    let after = build_correlation_matrix(&reference, &repaired, 0).unwrap();
    assert_eq!(after.cols(), 5);
    let stats = diagonal_stats(&after).unwrap();
    assert_eq!(stats.all.mean, 1.0);
    assert!(stats.all.mean > before_mean);
}

#[test]
fn denoising_pulls_the_thresholded_mask_back_to_the_reference() {
    let mut spec = scene(21);
    spec.dims = [32, 32, 32];
    spec.objects.truncate(3);
    spec.noise_sigma = 0.25;
    let (noisy, reference) = generate_phantom(&spec).unwrap();
    let denoised = tv_denoise(&noisy, 0.1, 100, 1e-4).unwrap();

    let errors = |volume: &voxseg::volume::ScalarVolume| -> usize {
        volume
            .voxels
            .iter()
            .zip(&reference.voxels)
            .filter(|(&v, &l)| (v > 0.5) != (l != 0))
            .count()
    };
    let raw_errors = errors(&noisy);
    let denoised_errors = errors(&denoised);
    assert!(raw_errors > 0, "noise should corrupt the raw threshold");
    assert!(
        denoised_errors <= raw_errors,
        "denoising made the mask worse: {denoised_errors} > {raw_errors}"
    );
    let rate = denoised_errors as f64 / reference.voxels.len() as f64;
    assert!(rate < 0.01, "mask error rate {rate} above 1%");
}
