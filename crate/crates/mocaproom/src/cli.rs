//! The `mocaproom` command line: generate, validate, stats, eval, preview
//! and export-coco.
//!
//! Exit codes: 0 success, 1 validation failures (or invalid dataset data),
//! 2 usage/config errors, 3 IO errors.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::anim::clip_stats;
use crate::config::{load_clip, ConfigError, RunConfig};
use crate::dataset::{
    export_coco, generate_dataset, load_backgrounds, read_dataset, render_sample,
    validate_dataset, DatasetError, GenerateError, GenerateOptions, SampleRecord,
};
use crate::metrics::{align_predictions, load_predictions, mpjpe, pck, MetricsError, PoseEvalResult};

#[derive(Parser)]
#[command(name = "mocaproom", version, about = "Virtual mocap room: synthetic multi-view pose datasets from keyframe animations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset from a config file
    Generate(GenerateArgs),
    /// Check a dataset; exits 1 if any violation is found
    Validate {
        /// Dataset root (the directory holding manifest.json)
        dataset: PathBuf,
    },
    /// Summarize a clip file or a dataset
    Stats(StatsArgs),
    /// Score a predictions file against dataset ground truth
    Eval(EvalArgs),
    /// Render a single annotated sample for visual inspection
    Preview(PreviewArgs),
    /// Export 2D labels as a COCO-keypoints-compatible JSON document
    ExportCoco {
        /// Dataset root
        dataset: PathBuf,
        /// Output JSON path
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct GenerateArgs {
    /// Run configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the worker count (0 = one per core)
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct StatsArgs {
    /// Clip file (.bvh / .json) or dataset root
    #[arg(required_unless_present = "show_config")]
    path: Option<PathBuf>,
    /// Print the default run configuration and exit
    #[arg(long)]
    show_config: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Dataset root
    dataset: PathBuf,
    /// Predictions JSON (array of {clip_id, frame_index, camera_id, keypoints2d?, joints3d_view?})
    #[arg(long)]
    predictions: PathBuf,
    /// PCK thresholds as fractions of the bbox diagonal (repeatable)
    #[arg(long, default_values_t = [0.2])]
    alpha: Vec<f64>,
    /// Subtract the root joint before measuring MPJPE
    #[arg(long)]
    root_aligned: bool,
    /// Also write the scores as a JSON report
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct PreviewArgs {
    /// Run configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Clip index into the resolved clip list
    #[arg(long, default_value_t = 0)]
    clip: usize,
    /// Frame index
    #[arg(long, default_value_t = 0)]
    frame: usize,
    /// Camera index into the ring
    #[arg(long, default_value_t = 0)]
    camera: usize,
    /// Output prefix; writes <prefix>.png and <prefix>.json
    #[arg(long)]
    out: PathBuf,
}

struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> CliError {
        CliError { code: 2, message: message.into() }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> CliError {
        CliError { code: 2, message: e.to_string() }
    }
}

impl From<GenerateError> for CliError {
    fn from(e: GenerateError) -> CliError {
        let code = match &e {
            GenerateError::Io(_) | GenerateError::Serialize(_) | GenerateError::JournalCorrupt { .. } => 3,
            GenerateError::Render(
                crate::render::RenderError::Io(_) | crate::render::RenderError::Decode(_),
            ) => 3,
            GenerateError::Render(_) => 2,
            GenerateError::Dataset(d) => dataset_code(d),
            _ => 2,
        };
        CliError { code, message: e.to_string() }
    }
}

fn dataset_code(e: &DatasetError) -> i32 {
    match e {
        DatasetError::Io(_) => 3,
        DatasetError::CorruptManifest(_) | DatasetError::VersionMismatch { .. } => 1,
        DatasetError::ManifestMissing(_)
        | DatasetError::BadRatios { .. }
        | DatasetError::NotEnoughClips { .. } => 2,
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> CliError {
        CliError { code: dataset_code(&e), message: e.to_string() }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> CliError {
        CliError { code: 2, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError { code: 3, message: e.to_string() }
    }
}

/// Parses the process arguments and runs one command; returns the exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Validate { dataset } => cmd_validate(&dataset),
        Command::Stats(args) => cmd_stats(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Preview(args) => cmd_preview(args),
        Command::ExportCoco { dataset, out } => cmd_export_coco(&dataset, &out),
    }
}

fn generate_options(cfg: &RunConfig) -> Result<GenerateOptions, CliError> {
    Ok(GenerateOptions {
        rig: cfg.rig.clone(),
        augmentation: cfg.augmentation.clone(),
        grayscale: cfg.grayscale,
        background_dir: cfg.background_dir.clone(),
        seed: cfg.seed,
        workers: cfg.effective_workers()?,
        split: cfg.split,
        style: crate::render::RenderStyle::default(),
    })
}

fn cmd_generate(args: GenerateArgs) -> Result<i32, CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(out) = args.out {
        cfg.out = out;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = args.workers {
        cfg.workers = Some(workers);
    }
    let clips = cfg.resolve_clips()?;
    let opts = generate_options(&cfg)?;
    let manifest = generate_dataset(&clips, &opts, &cfg.out)?;
    println!(
        "generated {} samples ({} clips x {} cameras) in {}",
        manifest.total_samples,
        manifest.clips.len(),
        manifest.camera_count,
        cfg.out.display()
    );
    Ok(0)
}

fn cmd_validate(dataset: &Path) -> Result<i32, CliError> {
    let report = validate_dataset(dataset)?;
    if report.is_clean() {
        println!("OK: {} samples, no violations", report.checked_samples);
        Ok(0)
    } else {
        for v in &report.violations {
            println!("FAIL [{}] {}: {}", v.rule, v.sample, v.message);
        }
        println!(
            "FAILED: {} violation(s) across {} samples",
            report.violations.len(),
            report.checked_samples
        );
        Ok(1)
    }
}

fn cmd_stats(args: StatsArgs) -> Result<i32, CliError> {
    if args.show_config {
        let defaults = RunConfig::default();
        println!("{}", serde_json::to_string_pretty(&defaults).expect("config serializes"));
        return Ok(0);
    }
    let path = args.path.expect("clap guarantees a path");
    if path.join("manifest.json").exists() {
        let (manifest, _) = read_dataset(&path)?;
        println!("dataset       {}", path.display());
        println!("samples       {}", manifest.total_samples);
        println!("clips         {}", manifest.clips.len());
        println!("cameras       {}", manifest.camera_count);
        println!("joints        {}", manifest.skeleton.joint_count());
        println!("image size    {}x{}", manifest.rig.width, manifest.rig.height_px);
        println!("seed          {}", manifest.seed);
        println!("augmentation  {}", if manifest.augmentation.is_some() { "on" } else { "off" });
        println!("grayscale     {}", if manifest.grayscale { "on" } else { "off" });
        if let Some(splits) = &manifest.splits {
            for name in ["train", "val", "test"] {
                let clips: Vec<&str> = splits
                    .iter()
                    .filter(|(_, s)| s.as_str() == name)
                    .map(|(c, _)| c.as_str())
                    .collect();
                let samples: usize = manifest
                    .clips
                    .iter()
                    .filter(|c| clips.contains(&c.clip_id.as_str()))
                    .map(|c| c.frame_count * manifest.camera_count)
                    .sum();
                println!("split {name:<8}{} clips, {samples} samples", clips.len());
            }
        }
    } else if path.is_dir() {
        return Err(CliError::usage(format!(
            "{} is a directory without a manifest.json",
            path.display()
        )));
    } else {
        let clip = load_clip(&path)?;
        let stats = clip_stats(&clip);
        println!("clip          {}", path.display());
        println!("joints        {}", stats.joint_count);
        println!("frames        {}", stats.frame_count);
        println!("frame time    {} s", stats.frame_time);
        println!("duration      {} s", stats.duration_seconds);
        println!(
            "root bbox     [{:.3}, {:.3}, {:.3}] .. [{:.3}, {:.3}, {:.3}]",
            stats.root_min.x, stats.root_min.y, stats.root_min.z,
            stats.root_max.x, stats.root_max.y, stats.root_max.z
        );
    }
    Ok(0)
}

fn print_eval(name: &str, result: &Option<PoseEvalResult>, joints: &[String]) {
    match result {
        None => println!("{name:<16} no data"),
        Some(r) => {
            println!("{name:<16} mean {:.6}  ({} samples)", r.mean, r.sample_count);
            for (i, score) in r.per_joint.iter().enumerate() {
                let label = joints.get(i).map(String::as_str).unwrap_or("?");
                match score {
                    Some(s) => println!("    {label:<14} {s:.6}  (n={})", r.per_joint_evaluated[i]),
                    None => println!("    {label:<14} -"),
                }
            }
        }
    }
}

fn cmd_eval(args: EvalArgs) -> Result<i32, CliError> {
    let (manifest, samples) = read_dataset(&args.dataset)?;
    let mut records: Vec<SampleRecord> = Vec::new();
    for item in samples {
        match item {
            Ok(r) => records.push(r),
            Err(issue) => eprintln!("warning: skipping {issue}"),
        }
    }
    let predictions = load_predictions(&args.predictions)?;
    let (pred2d, pred3d) = align_predictions(&records, &predictions)?;

    let joint_names: Vec<String> =
        manifest.skeleton.joints().iter().map(|j| j.name.clone()).collect();
    let mut report = serde_json::Map::new();

    if let Some(p2d) = &pred2d {
        let mut pck_reports = Vec::new();
        for alpha in &args.alpha {
            let result = pck(p2d, &records, *alpha)?;
            print_eval(&format!("PCK@{alpha}"), &result, &joint_names);
            pck_reports.push(serde_json::json!({
                "alpha": alpha,
                "result": result,
            }));
        }
        report.insert("pck".into(), serde_json::Value::Array(pck_reports));
    }
    if let Some(p3d) = &pred3d {
        let result = mpjpe(p3d, &records, args.root_aligned)?;
        let name = if args.root_aligned { "MPJPE (root-aligned)" } else { "MPJPE" };
        print_eval(name, &result, &joint_names);
        report.insert(
            "mpjpe".into(),
            serde_json::json!({ "root_aligned": args.root_aligned, "result": result }),
        );
    }
    if pred2d.is_none() && pred3d.is_none() {
        return Err(CliError::usage(
            "predictions carry neither complete keypoints2d nor joints3d_view arrays",
        ));
    }

    if let Some(path) = &args.report {
        let mut bytes =
            serde_json::to_vec_pretty(&serde_json::Value::Object(report)).expect("report serializes");
        bytes.push(b'\n');
        std::fs::write(path, bytes)?;
        println!("report written to {}", path.display());
    }
    Ok(0)
}

fn cmd_preview(args: PreviewArgs) -> Result<i32, CliError> {
    let cfg = RunConfig::load(&args.config)?;
    let clips = cfg.resolve_clips()?;
    let named = clips
        .get(args.clip)
        .ok_or_else(|| CliError::usage(format!("clip index {} out of range (have {})", args.clip, clips.len())))?;
    if args.frame >= named.clip.frame_count() {
        return Err(CliError::usage(format!(
            "frame {} out of range; clip {:?} has {} frames",
            args.frame,
            named.id,
            named.clip.frame_count()
        )));
    }
    let opts = generate_options(&cfg)?;
    let cameras = crate::dataset::resolve_rig(&named.clip, &opts.rig)?;
    let camera = cameras.get(args.camera).ok_or_else(|| {
        CliError::usage(format!("camera index {} out of range (rig has {})", args.camera, cameras.len()))
    })?;
    let backgrounds = load_backgrounds(cfg.background_dir.as_deref());
    let (image, record) =
        render_sample(named, camera, args.camera, args.frame, &opts, &backgrounds)?;

    let png_path = args.out.with_extension("png");
    let json_path = args.out.with_extension("json");
    image.save_png(&png_path).map_err(GenerateError::Render)?;
    let mut bytes = serde_json::to_vec_pretty(&record).expect("record serializes");
    bytes.push(b'\n');
    std::fs::write(&json_path, bytes)?;

    let visible = record.keypoints2d.iter().filter(|k| k.visible).count();
    println!(
        "wrote {} and {} ({} of {} joints visible)",
        png_path.display(),
        json_path.display(),
        visible,
        record.keypoints2d.len()
    );
    Ok(0)
}

fn cmd_export_coco(dataset: &Path, out: &Path) -> Result<i32, CliError> {
    let summary = export_coco(dataset, out)?;
    println!("exported {} images to {}", summary.images, out.display());
    if summary.skipped > 0 {
        eprintln!("warning: {} sample(s) skipped", summary.skipped);
    }
    Ok(0)
}
