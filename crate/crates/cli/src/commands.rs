//! Subcommand implementations. Each loads its inputs, runs one
//! pipeline stage, writes its outputs, and leaves a manifest next to
//! them — with the error recorded when the run fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use voxseg::eval::{
    build_correlation_matrix, cc_postprocess_proposal, diagonal_stats, write_matrix_csv,
    write_matrix_heatmap, DiagonalStats,
};
use voxseg::fusion::{load_stack, run_fusion_pipeline, MatchConfig, StartIndexPolicy};
use voxseg::instancer::{run_watershed_pipeline, WatershedConfig};
use voxseg::phantom::{corrupt_stack, generate_phantom, perfect_slice_stack, PhantomSpec};
use voxseg::preprocess::{labels_to_three_class, tv_denoise, ThreeClassVolume};
use voxseg::volume::{
    load_volume, save_volume, segment_table, sidecar_path, SegmentEntry, VolumeReport,
};

use crate::manifest::{write_manifest, ManifestBuilder, MANIFEST_NAME};
use crate::{
    Command, DenoiseArgs, EvaluateArgs, FuseArgs, PhantomArgs, StatsArgs, WatershedArgs,
};

/// Run one command end to end: execute, write the manifest (also on
/// failure), and map any error to a single-line diagnostic plus a
/// nonzero exit code.
pub fn execute(command: &Command) -> ExitCode {
    let mut builder = ManifestBuilder::new(command_name(command));
    record_parameters(command, &mut builder);
    let result = run(command, &mut builder);
    let manifest = builder.finish(result.as_ref().err().map(|e| format!("{e:#}")));
    let manifest_result = write_manifest(&manifest, &manifest_path(command));

    let mut code = ExitCode::SUCCESS;
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        code = ExitCode::FAILURE;
    }
    if let Err(e) = manifest_result {
        eprintln!("error: {e:#}");
        code = ExitCode::FAILURE;
    }
    code
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Phantom(_) => "phantom",
        Command::Fuse(_) => "fuse",
        Command::Watershed(_) => "watershed",
        Command::Evaluate(_) => "evaluate",
        Command::Denoise(_) => "denoise",
        Command::Stats(_) => "stats",
    }
}

/// Commands owning a directory put `manifest.json` inside it; commands
/// writing a single artifact put `<stem>.manifest.json` beside it.
fn manifest_path(command: &Command) -> PathBuf {
    match command {
        Command::Phantom(a) => a.out_dir.join(MANIFEST_NAME),
        Command::Evaluate(a) => a.out_dir.join(MANIFEST_NAME),
        Command::Fuse(a) => sibling_manifest(&a.out),
        Command::Watershed(a) => sibling_manifest(&a.out),
        Command::Denoise(a) => sibling_manifest(&a.out),
        Command::Stats(a) => {
            let stem = a.out.to_string_lossy();
            PathBuf::from(format!("{}.manifest.json", stem.trim_end_matches(".json")))
        }
    }
}

fn sibling_manifest(out: &Path) -> PathBuf {
    let stem = sidecar_path(out);
    let stem = stem.to_string_lossy();
    PathBuf::from(format!("{}.manifest.json", stem.trim_end_matches(".vol.json")))
}

fn record_parameters(command: &Command, m: &mut ManifestBuilder) {
    let path = |p: &Path| p.display().to_string();
    match command {
        Command::Phantom(a) => {
            m.param("spec", path(&a.spec));
            m.param("out_dir", path(&a.out_dir));
            m.param("stack", a.stack.as_deref().map(path));
            m.param("split_rate", a.split_rate);
            m.param("drop_rate", a.drop_rate);
            m.param("corrupt_seed", a.corrupt_seed);
            m.param("three_class", a.three_class.as_deref().map(path));
            m.param("border_thickness", a.border_thickness);
        }
        Command::Fuse(a) => {
            m.param("stack_dir", path(&a.stack_dir));
            m.param("out", path(&a.out));
            m.param("line_overlap_threshold", a.line_overlap_threshold);
            m.param("reinsert_overlap_threshold", a.reinsert_overlap_threshold);
            m.param("start_axis", a.start_axis.name());
            m.param("start_index", a.start_index);
            m.param("closing_iterations", a.closing_iterations);
        }
        Command::Watershed(a) => {
            m.param("classes", path(&a.classes));
            m.param("out", path(&a.out));
            m.param("min_marker_size", a.min_marker_size);
            m.param("connectivity", a.connectivity.degree());
        }
        Command::Evaluate(a) => {
            m.param("reference", path(&a.reference));
            m.param("proposal", path(&a.proposal));
            m.param("out_dir", path(&a.out_dir));
            m.param("min_voxels", a.min_voxels);
            m.param("cc_postprocess", a.cc_postprocess);
            m.param("connectivity", a.connectivity.degree());
        }
        Command::Denoise(a) => {
            m.param("input", path(&a.input));
            m.param("out", path(&a.out));
            m.param("weight", a.weight);
            m.param("iterations", a.iterations);
            m.param("tolerance", a.tolerance);
        }
        Command::Stats(a) => {
            m.param("volume", path(&a.volume));
            m.param("out", path(&a.out));
        }
    }
}

fn run(command: &Command, m: &mut ManifestBuilder) -> Result<()> {
    match command {
        Command::Phantom(a) => cmd_phantom(a, m),
        Command::Fuse(a) => cmd_fuse(a, m),
        Command::Watershed(a) => cmd_watershed(a, m),
        Command::Evaluate(a) => cmd_evaluate(a, m),
        Command::Denoise(a) => cmd_denoise(a, m),
        Command::Stats(a) => cmd_stats(a, m),
    }
}

fn cmd_phantom(args: &PhantomArgs, m: &mut ManifestBuilder) -> Result<()> {
    for (name, rate) in [("split-rate", args.split_rate), ("drop-rate", args.drop_rate)] {
        if !(0.0..=1.0).contains(&rate) {
            bail!("--{name} must lie in [0, 1], got {rate}");
        }
    }
    m.input_file(&args.spec)?;
    let text = fs::read_to_string(&args.spec)
        .with_context(|| format!("reading {}", args.spec.display()))?;
    let spec: PhantomSpec = serde_json::from_str(&text)
        .with_context(|| format!("invalid phantom spec {}", args.spec.display()))?;
    let (intensity, labels) = generate_phantom(&spec)?;

    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let intensity_path = args.out_dir.join("intensity");
    save_volume(&intensity.into(), &intensity_path)?;
    m.output_volume(&intensity_path);
    let labels_path = args.out_dir.join("labels");
    save_volume(&labels.clone().into(), &labels_path)?;
    m.output_volume(&labels_path);

    if let Some(stack_dir) = &args.stack {
        let mut stack = perfect_slice_stack(&labels);
        if args.split_rate > 0.0 || args.drop_rate > 0.0 {
            stack = corrupt_stack(&stack, args.corrupt_seed, args.split_rate, args.drop_rate);
        }
        voxseg::fusion::save_stack(&stack, stack_dir)?;
        m.output(stack_dir);
    }
    if let Some(classes_path) = &args.three_class {
        if args.border_thickness == 0 {
            bail!("--border-thickness must be >= 1");
        }
        let classes = labels_to_three_class(&labels, args.border_thickness);
        save_volume(&classes.to_label_volume().into(), classes_path)?;
        m.output_volume(classes_path);
    }
    Ok(())
}

fn cmd_fuse(args: &FuseArgs, m: &mut ManifestBuilder) -> Result<()> {
    m.input_dir(&args.stack_dir)?;
    let stack = load_stack(&args.stack_dir)?;
    let config = MatchConfig {
        line_overlap_threshold: args.line_overlap_threshold,
        reinsert_overlap_threshold: args.reinsert_overlap_threshold,
        start_axis: args.start_axis,
        start_index_policy: match args.start_index {
            Some(i) => StartIndexPolicy::Given(i),
            None => StartIndexPolicy::Middle,
        },
        closing_iterations: args.closing_iterations,
    };
    let fused = run_fusion_pipeline(&stack, &config)?;
    save_volume(&fused.into(), &args.out)?;
    m.output_volume(&args.out);
    Ok(())
}

fn cmd_watershed(args: &WatershedArgs, m: &mut ManifestBuilder) -> Result<()> {
    m.input_volume(&args.classes)?;
    let volume = load_volume(&args.classes)?.into_label()?;
    let classes = ThreeClassVolume::from_label_volume(&volume)?;
    let config = WatershedConfig {
        min_marker_size: args.min_marker_size,
        connectivity: args.connectivity,
    };
    let instances = run_watershed_pipeline(&classes, &config)?;
    save_volume(&instances.into(), &args.out)?;
    m.output_volume(&args.out);
    Ok(())
}

/// Matrix shape, per-row diagonal, and summary statistics, as written
/// to `stats.json`.
#[derive(Serialize)]
struct EvaluationReport {
    rows: usize,
    cols: usize,
    reference_labels: Vec<u32>,
    detected_labels: Vec<u32>,
    diagonal: Vec<f64>,
    stats: DiagonalStats,
}

fn cmd_evaluate(args: &EvaluateArgs, m: &mut ManifestBuilder) -> Result<()> {
    m.input_volume(&args.reference)?;
    m.input_volume(&args.proposal)?;
    let reference = load_volume(&args.reference)?.into_label()?;
    let mut proposal = load_volume(&args.proposal)?.into_label()?;
    if args.cc_postprocess {
        proposal = cc_postprocess_proposal(&proposal, args.connectivity);
    }
    let matrix = build_correlation_matrix(&reference, &proposal, args.min_voxels)?;
    let report = EvaluationReport {
        rows: matrix.rows(),
        cols: matrix.cols(),
        reference_labels: matrix.reference_labels.clone(),
        detected_labels: matrix.detected_labels.clone(),
        diagonal: matrix.diagonal(),
        stats: diagonal_stats(&matrix)?,
    };

    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let csv_path = args.out_dir.join("matrix.csv");
    write_matrix_csv(&matrix, &csv_path)?;
    m.output(&csv_path);
    let heatmap_path = args.out_dir.join("heatmap.pgm");
    write_matrix_heatmap(&matrix, &heatmap_path)?;
    m.output(&heatmap_path);
    let stats_path = args.out_dir.join("stats.json");
    write_json(&report, &stats_path)?;
    m.output(&stats_path);
    Ok(())
}

fn cmd_denoise(args: &DenoiseArgs, m: &mut ManifestBuilder) -> Result<()> {
    if !(args.weight > 0.0 && args.weight.is_finite()) {
        bail!("--weight must be a positive finite number, got {}", args.weight);
    }
    if args.iterations == 0 {
        bail!("--iterations must be >= 1");
    }
    if !(args.tolerance >= 0.0 && args.tolerance.is_finite()) {
        bail!("--tolerance must be a finite non-negative number, got {}", args.tolerance);
    }
    m.input_volume(&args.input)?;
    let noisy = load_volume(&args.input)?.into_scalar()?;
    let denoised = tv_denoise(&noisy, args.weight, args.iterations, args.tolerance)?;
    save_volume(&denoised.into(), &args.out)?;
    m.output_volume(&args.out);
    Ok(())
}

/// Per-segment table plus the volume summary, as written by `stats`.
#[derive(Serialize)]
struct StatsReport {
    report: VolumeReport,
    segments: BTreeMap<u32, SegmentEntry>,
}

fn cmd_stats(args: &StatsArgs, m: &mut ManifestBuilder) -> Result<()> {
    m.input_volume(&args.volume)?;
    let volume = load_volume(&args.volume)?.into_label()?;
    let table = segment_table(&volume);
    let doc = StatsReport {
        report: table.report(volume.meta.len()),
        segments: table.entries,
    };
    write_json(&doc, &args.out)?;
    m.output(&args.out);
    Ok(())
}

fn write_json(value: &impl Serialize, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    let text = serde_json::to_string_pretty(value).expect("reports are plain data");
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}
