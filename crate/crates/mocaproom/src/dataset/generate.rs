//! The generation loop: for each clip, frame and camera, run forward
//! kinematics, project, render, composite, augment and write one sample.
//!
//! Work is a parallel map over (clip, frame) jobs; every random decision is
//! keyed by sample identity, so worker count never changes the output bytes.
//! Each sample is written atomically (temp file + rename) and logged to a
//! journal, making interrupted runs resumable. The manifest is written last
//! and the journal removed; a dataset with a manifest is complete.

use std::collections::{BTreeMap, HashSet};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::anim::AnimationClip;
use crate::augment::{apply_geometric, apply_photometric, sample_params, AugmentError, AugmentationSpec};
use crate::camera::{build_ring_rig, Camera, CameraError, CameraIntrinsics};
use crate::math::Vec3;
use crate::projection::project_joints;
use crate::render::{composite, render_skeleton, to_grayscale, Image, RenderError, RenderStyle};
use crate::rng::{SampleKey, StreamRng, STREAM_BACKGROUND, STREAM_PIXEL_NOISE};
use crate::skeleton::{forward_kinematics, FkError};

use super::{
    annotation_rel, expected_total, image_rel, sample_rel, split_clips, CameraParams, DatasetError,
    Manifest, ManifestClip, SampleDigests, SampleRecord, SplitRatios, DATASET_FORMAT_VERSION,
};

/// Camera-ring configuration. `radius` and `height` default to automatic
/// per-clip values derived from the subject's extent (2.5× and 0.8× the
/// root-trajectory bounding-sphere radius plus skeletal reach), so the
/// subject stays in frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RigConfig {
    pub count: usize,
    pub radius: Option<f64>,
    pub height: Option<f64>,
    pub fov_deg: f64,
    pub width: u32,
    pub height_px: u32,
    pub near: f64,
    pub far: f64,
    pub track_root: bool,
}

impl Default for RigConfig {
    fn default() -> Self {
        RigConfig {
            count: 12,
            radius: None,
            height: None,
            fov_deg: 45.0,
            width: 640,
            height_px: 480,
            near: 0.1,
            far: 10_000.0,
            track_root: false,
        }
    }
}

impl RigConfig {
    pub fn intrinsics(&self) -> CameraIntrinsics {
        CameraIntrinsics {
            vertical_fov_deg: self.fov_deg,
            image_width: self.width,
            image_height: self.height_px,
            near: self.near,
            far: self.far,
        }
    }
}

/// A clip plus the id it will carry in the dataset.
#[derive(Debug, Clone)]
pub struct NamedClip {
    pub id: String,
    pub clip: AnimationClip,
}

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    pub rig: RigConfig,
    pub augmentation: Option<AugmentationSpec>,
    /// Convert final images to grayscale (also triggered by
    /// `augmentation.grayscale`).
    pub grayscale: bool,
    pub background_dir: Option<PathBuf>,
    pub seed: u64,
    /// 0 means one worker per available core.
    pub workers: usize,
    pub split: Option<SplitRatios>,
    pub style: RenderStyle,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions {
            rig: RigConfig::default(),
            augmentation: None,
            grayscale: false,
            background_dir: None,
            seed: crate::config::DEFAULT_SEED,
            workers: 0,
            split: None,
            style: RenderStyle::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("no input clips")]
    NoClips,
    #[error("clip id {0:?} is not usable as a path segment (allowed: A-Z a-z 0-9 . _ -)")]
    InvalidClipId(String),
    #[error("duplicate clip id {0:?}")]
    DuplicateClipId(String),
    #[error("clip {clip_id:?} uses a different skeleton than the first clip")]
    SkeletonMismatch { clip_id: String },
    #[error("ring rig needs at least one camera")]
    EmptyRig,
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Fk(#[from] FkError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Serialize(#[from] serde_json::Error),
    #[error("journal at {path} was written by a different configuration; delete the output directory or restore the original config to resume")]
    JournalMismatch { path: PathBuf },
    #[error("corrupt journal at {path}: {message}")]
    JournalCorrupt { path: PathBuf, message: String },
}

fn valid_clip_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
}

/// Subject extent of a clip: root-trajectory centroid, trajectory radius and
/// maximum skeletal reach from the root, over all frames.
struct ClipBounds {
    centroid: Vec3,
    trajectory_radius: f64,
    reach: f64,
}

fn clip_bounds(clip: &AnimationClip) -> Result<ClipBounds, FkError> {
    let mut roots = Vec::with_capacity(clip.frame_count());
    let mut reach = 0.0f64;
    for frame in clip.frames() {
        let world = forward_kinematics(clip.skeleton(), frame)?;
        let root = world.positions[0];
        roots.push(root);
        for p in &world.positions {
            reach = reach.max((*p - root).length());
        }
    }
    let n = roots.len() as f64;
    let centroid = roots.iter().fold(Vec3::ZERO, |acc, p| acc + *p) * (1.0 / n);
    let trajectory_radius =
        roots.iter().map(|p| (*p - centroid).length()).fold(0.0f64, f64::max);
    Ok(ClipBounds { centroid, trajectory_radius, reach })
}

/// Resolves the ring for one clip: explicit values win, otherwise 2.5x /
/// 0.8x the subject extent.
pub fn resolve_rig(clip: &AnimationClip, rig: &RigConfig) -> Result<Vec<Camera>, GenerateError> {
    if rig.count < 1 {
        return Err(GenerateError::EmptyRig);
    }
    rig.intrinsics().validate()?;
    let bounds = clip_bounds(clip)?;
    let extent = (bounds.trajectory_radius + bounds.reach).max(1e-3);
    let radius = rig.radius.unwrap_or(2.5 * extent);
    let height = rig.height.unwrap_or(0.8 * extent);
    Ok(build_ring_rig(bounds.centroid, radius, height, rig.count, &rig.intrinsics())?)
}

/// Loads the background pool: decodable PNG/JPEG files of `dir` in sorted
/// order, or a single flat-gray image when the directory is absent, empty or
/// unreadable (with a warning).
pub fn load_backgrounds(dir: Option<&Path>) -> Vec<Image> {
    let fallback = || vec![Image::filled(8, 8, [128, 128, 128, 255])];
    let Some(dir) = dir else {
        return fallback();
    };
    let entries = match std::fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) => {
            eprintln!(
                "warning: background directory {} is unreadable ({e}); using flat gray",
                dir.display()
            );
            return fallback();
        }
    };
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    let mut images = Vec::new();
    for file in files {
        match Image::load(&file) {
            Ok(img) => images.push(img),
            Err(e) => eprintln!("warning: skipping background {}: {e}", file.display()),
        }
    }
    if images.is_empty() {
        eprintln!(
            "warning: no usable background images in {}; using flat gray",
            dir.display()
        );
        return fallback();
    }
    images
}

/// Builds one sample in memory: the final image and its annotation record.
///
/// This is the exact path `generate_dataset` runs per sample; `preview`
/// shares it so previews match generated data byte for byte.
pub fn render_sample(
    named: &NamedClip,
    base_camera: &Camera,
    camera_index: usize,
    frame_index: usize,
    opts: &GenerateOptions,
    backgrounds: &[Image],
) -> Result<(Image, SampleRecord), GenerateError> {
    let clip = &named.clip;
    let skeleton = clip.skeleton();
    let world = forward_kinematics(skeleton, &clip.frames()[frame_index])?;

    let mut camera = base_camera.clone();
    if opts.rig.track_root {
        camera.extrinsics.focal_point = world.positions[0];
    }

    let key = SampleKey { clip_id: &named.id, frame_index, camera_index };
    let (mut keypoints, joints_view) = project_joints(&world, &camera)?;

    let fg = render_skeleton(skeleton, &world, &camera, &opts.style)?;
    let mut bg_rng = StreamRng::for_sample(opts.seed, key, STREAM_BACKGROUND);
    let bg = &backgrounds[bg_rng.index(backgrounds.len())];
    let mut img = composite(&fg, bg);

    let mut applied = None;
    let mut grayscale = opts.grayscale;
    if let Some(spec) = &opts.augmentation {
        let params = sample_params(spec, opts.seed, key);
        let (warped, kps) = apply_geometric(&img, &keypoints, &params, &spec.flip_pairs);
        let mut noise = StreamRng::for_sample(opts.seed, key, STREAM_PIXEL_NOISE);
        img = apply_photometric(&warped, &params, &mut noise);
        keypoints = kps;
        grayscale = grayscale || spec.grayscale;
        applied = Some(params);
    }
    if grayscale {
        img = to_grayscale(&img);
    }

    let record = SampleRecord {
        clip_id: named.id.clone(),
        frame_index,
        camera_id: camera.id.clone(),
        image: image_rel(&named.id, &camera.id, frame_index),
        keypoints2d: keypoints,
        joints3d_view: joints_view,
        camera: CameraParams::from_camera(&camera)?,
        augmentation: applied,
    };
    Ok((img, record))
}

#[derive(Serialize, Deserialize)]
struct JournalHeader {
    config_digest: String,
}

#[derive(Serialize, Deserialize)]
struct JournalEntry {
    sample: String,
}

fn sha_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Fingerprint of everything that influences output bytes; a resumed run
/// must match it exactly.
fn config_digest(
    clips: &[NamedClip],
    rigs: &[Vec<Camera>],
    opts: &GenerateOptions,
    backgrounds: &[Image],
) -> Result<String, GenerateError> {
    let mut hasher = Sha256::new();
    hasher.update(opts.seed.to_le_bytes());
    for named in clips {
        hasher.update(named.id.as_bytes());
        let mut buf = Vec::new();
        crate::anim::write_clip(&named.clip, &mut buf).map_err(|e| {
            GenerateError::Io(std::io::Error::other(format!("clip serialization: {e}")))
        })?;
        hasher.update(&buf);
    }
    hasher.update(serde_json::to_vec(rigs)?);
    hasher.update(serde_json::to_vec(&opts.rig)?);
    hasher.update(serde_json::to_vec(&opts.augmentation)?);
    hasher.update([opts.grayscale as u8]);
    hasher.update(serde_json::to_vec(&(
        &opts.style.bone_thickness,
        &opts.style.joint_radius,
        &opts.style.bone_color,
        &opts.style.joint_color,
    ))?);
    for bg in backgrounds {
        hasher.update(bg.pixels());
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

fn read_journal(path: &Path, expected_digest: &str) -> Result<HashSet<String>, GenerateError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: JournalHeader = match lines.next() {
        Some(first) => serde_json::from_str(first).map_err(|e| GenerateError::JournalCorrupt {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?,
        None => return Ok(HashSet::new()),
    };
    if header.config_digest != expected_digest {
        return Err(GenerateError::JournalMismatch { path: path.to_path_buf() });
    }
    let mut done = HashSet::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        // A torn final line (crash mid-append) is not corruption; that
        // sample is simply redone.
        if let Ok(entry) = serde_json::from_str::<JournalEntry>(line) {
            done.insert(entry.sample);
        }
    }
    Ok(done)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

/// Generates the full dataset under `out` and returns the manifest.
///
/// Exactly `frames × cameras` samples are produced per clip. Two runs with
/// identical inputs and seed produce identical bytes, regardless of worker
/// count.
pub fn generate_dataset(
    clips: &[NamedClip],
    opts: &GenerateOptions,
    out: &Path,
) -> Result<Manifest, GenerateError> {
    if clips.is_empty() {
        return Err(GenerateError::NoClips);
    }
    let mut seen = HashSet::new();
    for named in clips {
        if !valid_clip_id(&named.id) {
            return Err(GenerateError::InvalidClipId(named.id.clone()));
        }
        if !seen.insert(named.id.as_str()) {
            return Err(GenerateError::DuplicateClipId(named.id.clone()));
        }
    }
    let skeleton = clips[0].clip.skeleton().clone();
    for named in &clips[1..] {
        if named.clip.skeleton() != &skeleton {
            return Err(GenerateError::SkeletonMismatch { clip_id: named.id.clone() });
        }
    }
    if let Some(spec) = &opts.augmentation {
        spec.validate(Some(skeleton.joint_count()))?;
    }
    let clip_ids: Vec<String> = clips.iter().map(|c| c.id.clone()).collect();
    let splits = match opts.split {
        Some(ratios) => Some(split_clips(&clip_ids, ratios, opts.seed)?),
        None => None,
    };

    let rigs: Vec<Vec<Camera>> = clips
        .iter()
        .map(|c| resolve_rig(&c.clip, &opts.rig))
        .collect::<Result<_, _>>()?;
    let backgrounds = load_backgrounds(opts.background_dir.as_deref());

    std::fs::create_dir_all(out)?;
    let digest = config_digest(clips, &rigs, opts, &backgrounds)?;
    let journal_path = out.join("journal.jsonl");
    let done: HashSet<String> = if journal_path.exists() {
        read_journal(&journal_path, &digest)?
    } else {
        HashSet::new()
    };
    let journal_file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&journal_path)?;
    let journal = Mutex::new(std::io::BufWriter::new(journal_file));
    if done.is_empty() {
        let header = serde_json::to_string(&JournalHeader { config_digest: digest })?;
        let mut j = journal.lock().expect("journal lock");
        writeln!(j, "{header}")?;
        j.flush()?;
    }

    // One job per (clip, frame); FK runs once, all cameras reuse it.
    let jobs: Vec<(usize, usize)> = clips
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| (0..c.clip.frame_count()).map(move |f| (ci, f)))
        .collect();

    let workers = if opts.workers == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        opts.workers
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| GenerateError::Io(std::io::Error::other(e)))?;

    let run_job = |&(ci, frame): &(usize, usize)| -> Result<Vec<(String, SampleDigests)>, GenerateError> {
        let named = &clips[ci];
        let mut results = Vec::with_capacity(rigs[ci].len());
        for (cam_index, base_camera) in rigs[ci].iter().enumerate() {
            let rel = sample_rel(&named.id, &base_camera.id, frame);
            let img_path = out.join(image_rel(&named.id, &base_camera.id, frame));
            let ann_path = out.join(annotation_rel(&named.id, &base_camera.id, frame));

            if done.contains(&rel) && img_path.exists() && ann_path.exists() {
                results.push((
                    rel,
                    SampleDigests {
                        annotation: sha_hex(&std::fs::read(&ann_path)?),
                        image: sha_hex(&std::fs::read(&img_path)?),
                    },
                ));
                continue;
            }

            let (img, record) = render_sample(named, base_camera, cam_index, frame, opts, &backgrounds)?;
            let png = img.encode_png()?;
            let mut ann = serde_json::to_vec_pretty(&record)?;
            ann.push(b'\n');
            write_atomic(&img_path, &png)?;
            write_atomic(&ann_path, &ann)?;
            {
                let line = serde_json::to_string(&JournalEntry { sample: rel.clone() })?;
                let mut j = journal.lock().expect("journal lock");
                writeln!(j, "{line}")?;
                j.flush()?;
            }
            results.push((rel, SampleDigests { annotation: sha_hex(&ann), image: sha_hex(&png) }));
        }
        Ok(results)
    };

    use rayon::prelude::*;
    let nested: Vec<Vec<(String, SampleDigests)>> =
        pool.install(|| jobs.par_iter().map(run_job).collect::<Result<_, _>>())?;
    let mut sample_digests = BTreeMap::new();
    for group in nested {
        for (rel, digests) in group {
            sample_digests.insert(rel, digests);
        }
    }

    let manifest = Manifest {
        format_version: DATASET_FORMAT_VERSION,
        seed: opts.seed,
        skeleton,
        rig: opts.rig.clone(),
        camera_count: opts.rig.count,
        clips: clips
            .iter()
            .zip(&rigs)
            .map(|(c, rig)| ManifestClip {
                clip_id: c.id.clone(),
                frame_count: c.clip.frame_count(),
                frame_time: c.clip.frame_time(),
                cameras: rig.clone(),
            })
            .collect(),
        augmentation: opts.augmentation.clone(),
        grayscale: opts.grayscale,
        splits,
        total_samples: expected_total(
            &clips.iter().map(|c| c.clip.frame_count()).collect::<Vec<_>>(),
            opts.rig.count,
        ),
        sample_digests,
    };
    let mut manifest_bytes = serde_json::to_vec_pretty(&manifest)?;
    manifest_bytes.push(b'\n');
    write_atomic(&out.join("manifest.json"), &manifest_bytes)?;
    drop(journal);
    std::fs::remove_file(&journal_path)?;
    Ok(manifest)
}
