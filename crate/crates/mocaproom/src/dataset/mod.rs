//! Dataset assembly: sample records, the manifest, deterministic splits,
//! streaming reads and validation.
//!
//! On-disk layout, all paths relative to the dataset root:
//!
//! ```text
//! manifest.json
//! images/<clip>/<camera>/<frame>.png
//! ann/<clip>/<camera>/<frame>.json
//! ```
//!
//! Every sample is self-contained: its annotation stores the full camera
//! (parameters and matrices) next to the keypoints, so records can be
//! consumed without the manifest. The manifest additionally records a SHA-256
//! digest per file; `validate` therefore catches any byte-level corruption.

mod coco;
mod generate;
mod validate;

pub use coco::export_coco;
pub use generate::{
    generate_dataset, load_backgrounds, render_sample, resolve_rig, GenerateError,
    GenerateOptions, NamedClip, RigConfig,
};
pub use validate::{validate_dataset, ValidationReport, Violation};

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{AppliedAugmentation, AugmentationSpec};
use crate::camera::{Camera, CameraError, CameraIntrinsics};
use crate::math::{Mat4, Vec3};
use crate::projection::{JointView3D, Keypoint2D};
use crate::rng::clip_split_hash;
use crate::skeleton::Skeleton;

/// Version of the manifest and annotation documents.
pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no manifest found at {0}")]
    ManifestMissing(PathBuf),
    #[error("corrupt manifest: {0}")]
    CorruptManifest(#[from] serde_json::Error),
    #[error("unsupported dataset format version {got}; this build reads version {expected}")]
    VersionMismatch { expected: u32, got: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("split ratios must be nonnegative and sum to 1, got ({train}, {val}, {test})")]
    BadRatios { train: f64, val: f64, test: f64 },
    #[error("{clips} clip(s) cannot fill {splits} nonzero splits")]
    NotEnoughClips { clips: usize, splits: usize },
}

/// Full camera parameters stored with every sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraParams {
    pub eye: Vec3,
    pub focal_point: Vec3,
    pub up: Vec3,
    pub fov_deg: f64,
    pub width: u32,
    pub height: u32,
    pub near: f64,
    pub far: f64,
    pub view_matrix: Mat4,
    pub projection_matrix: Mat4,
}

impl CameraParams {
    pub fn from_camera(camera: &Camera) -> Result<CameraParams, CameraError> {
        Ok(CameraParams {
            eye: camera.extrinsics.eye,
            focal_point: camera.extrinsics.focal_point,
            up: camera.extrinsics.up,
            fov_deg: camera.intrinsics.vertical_fov_deg,
            width: camera.intrinsics.image_width,
            height: camera.intrinsics.image_height,
            near: camera.intrinsics.near,
            far: camera.intrinsics.far,
            view_matrix: camera.view_matrix()?,
            projection_matrix: camera.projection_matrix(),
        })
    }

    pub fn intrinsics(&self) -> CameraIntrinsics {
        CameraIntrinsics {
            vertical_fov_deg: self.fov_deg,
            image_width: self.width,
            image_height: self.height,
            near: self.near,
            far: self.far,
        }
    }
}

/// One (clip, frame, camera) datum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub clip_id: String,
    pub frame_index: usize,
    pub camera_id: String,
    /// Image path relative to the dataset root.
    pub image: String,
    pub keypoints2d: Vec<Keypoint2D>,
    pub joints3d_view: Vec<JointView3D>,
    pub camera: CameraParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmentation: Option<AppliedAugmentation>,
}

/// SHA-256 hex digests of one sample's files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDigests {
    pub annotation: String,
    pub image: String,
}

/// One clip's entry in the manifest, including its resolved camera ring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestClip {
    pub clip_id: String,
    pub frame_count: usize,
    pub frame_time: f64,
    pub cameras: Vec<Camera>,
}

/// The dataset's table of contents, written last during generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub seed: u64,
    pub skeleton: Skeleton,
    pub rig: RigConfig,
    pub camera_count: usize,
    pub clips: Vec<ManifestClip>,
    pub augmentation: Option<AugmentationSpec>,
    pub grayscale: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub splits: Option<BTreeMap<String, String>>,
    pub total_samples: usize,
    /// Keyed by `<clip>/<camera>/<frame>`.
    pub sample_digests: BTreeMap<String, SampleDigests>,
}

/// Sample identity in path form: `<clip>/<camera>/<zero-padded frame>`.
pub fn sample_rel(clip_id: &str, camera_id: &str, frame_index: usize) -> String {
    format!("{clip_id}/{camera_id}/{frame_index:06}")
}

pub fn image_rel(clip_id: &str, camera_id: &str, frame_index: usize) -> String {
    format!("images/{}.png", sample_rel(clip_id, camera_id, frame_index))
}

pub fn annotation_rel(clip_id: &str, camera_id: &str, frame_index: usize) -> String {
    format!("ann/{}.json", sample_rel(clip_id, camera_id, frame_index))
}

/// The dataset counting formula: Σ over clips (frame count) × camera count.
pub fn expected_total(frame_counts: &[usize], camera_count: usize) -> usize {
    frame_counts.iter().sum::<usize>() * camera_count
}

impl Manifest {
    pub fn load(root: &Path) -> Result<Manifest, DatasetError> {
        let path = root.join("manifest.json");
        if !path.exists() {
            return Err(DatasetError::ManifestMissing(path));
        }
        let mut text = String::new();
        std::fs::File::open(&path)?.read_to_string(&mut text)?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if manifest.format_version != DATASET_FORMAT_VERSION {
            return Err(DatasetError::VersionMismatch {
                expected: DATASET_FORMAT_VERSION,
                got: manifest.format_version,
            });
        }
        Ok(manifest)
    }

    /// The counting formula applied to this manifest's clips.
    pub fn expected_total(&self) -> usize {
        let frames: Vec<usize> = self.clips.iter().map(|c| c.frame_count).collect();
        expected_total(&frames, self.camera_count)
    }

    /// Sample identities in generation order: clip, then frame, then camera.
    pub fn sample_keys(&self) -> Vec<(String, String, usize)> {
        let mut keys = Vec::with_capacity(self.expected_total());
        for clip in &self.clips {
            for frame in 0..clip.frame_count {
                for cam in &clip.cameras {
                    keys.push((clip.clip_id.clone(), cam.id.clone(), frame));
                }
            }
        }
        keys
    }
}

/// Train/val/test proportions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let vals = [self.train, self.val, self.test];
        let sum: f64 = vals.iter().sum();
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(DatasetError::BadRatios { train: self.train, val: self.val, test: self.test });
        }
        Ok(())
    }

    fn nonzero_count(&self) -> usize {
        [self.train, self.val, self.test].iter().filter(|v| **v > 0.0).count()
    }
}

/// Assigns whole clips to splits, deterministically from `(seed, clip_id)`.
///
/// Clips are ordered by hash and cut at largest-remainder quotas, so all
/// samples of one clip land in one split and proportions are approached at
/// clip granularity.
pub fn split_clips(
    clip_ids: &[String],
    ratios: SplitRatios,
    seed: u64,
) -> Result<BTreeMap<String, String>, DatasetError> {
    ratios.validate()?;
    if clip_ids.len() < ratios.nonzero_count() {
        return Err(DatasetError::NotEnoughClips {
            clips: clip_ids.len(),
            splits: ratios.nonzero_count(),
        });
    }

    let mut ordered: Vec<&String> = clip_ids.iter().collect();
    ordered.sort_by_cached_key(|id| (clip_split_hash(seed, id), (*id).clone()));

    let n = ordered.len();
    let raw = [ratios.train * n as f64, ratios.val * n as f64, ratios.test * n as f64];
    let mut quota: [usize; 3] = [raw[0] as usize, raw[1] as usize, raw[2] as usize];
    let assigned: usize = quota.iter().sum();
    // Distribute the remainder by largest fractional part (ties: train, val, test).
    let mut fracs: Vec<(usize, f64)> =
        raw.iter().enumerate().map(|(i, r)| (i, r - r.floor())).collect();
    fracs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for k in 0..(n - assigned) {
        quota[fracs[k % 3].0] += 1;
    }

    let names = ["train", "val", "test"];
    let mut out = BTreeMap::new();
    let mut cursor = 0usize;
    for (which, q) in quota.iter().enumerate() {
        for id in ordered.iter().skip(cursor).take(*q) {
            out.insert((*id).clone(), names[which].to_string());
        }
        cursor += q;
    }
    Ok(out)
}

/// Split assignment for an existing manifest.
pub fn split_dataset(
    manifest: &Manifest,
    ratios: SplitRatios,
    seed: u64,
) -> Result<BTreeMap<String, String>, DatasetError> {
    let ids: Vec<String> = manifest.clips.iter().map(|c| c.clip_id.clone()).collect();
    split_clips(&ids, ratios, seed)
}

/// A per-sample problem found while reading; iteration continues past it.
#[derive(Debug, Clone)]
pub struct SampleIssue {
    pub sample: String,
    pub message: String,
}

impl std::fmt::Display for SampleIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.sample, self.message)
    }
}

/// Streaming reader over every record the manifest references.
pub struct SampleIter {
    root: PathBuf,
    keys: std::vec::IntoIter<(String, String, usize)>,
}

impl Iterator for SampleIter {
    type Item = Result<SampleRecord, SampleIssue>;

    fn next(&mut self) -> Option<Self::Item> {
        let (clip, cam, frame) = self.keys.next()?;
        let sample = sample_rel(&clip, &cam, frame);
        let ann_path = self.root.join(annotation_rel(&clip, &cam, frame));
        let text = match std::fs::read_to_string(&ann_path) {
            Ok(t) => t,
            Err(e) => {
                return Some(Err(SampleIssue {
                    sample,
                    message: format!("cannot read annotation {}: {e}", ann_path.display()),
                }))
            }
        };
        let record: SampleRecord = match serde_json::from_str(&text) {
            Ok(r) => r,
            Err(e) => {
                return Some(Err(SampleIssue { sample, message: format!("corrupt annotation: {e}") }))
            }
        };
        let image_path = self.root.join(&record.image);
        if !image_path.exists() {
            return Some(Err(SampleIssue {
                sample,
                message: format!("image file missing: {}", record.image),
            }));
        }
        Some(Ok(record))
    }
}

/// Opens a dataset: loads the manifest and returns a lazy record iterator.
/// Per-sample problems come back as items, not hard errors.
pub fn read_dataset(root: &Path) -> Result<(Manifest, SampleIter), DatasetError> {
    let manifest = Manifest::load(root)?;
    let keys = manifest.sample_keys().into_iter();
    Ok((manifest, SampleIter { root: root.to_path_buf(), keys }))
}

impl SampleRecord {
    /// Reprojects the stored view-space joints through the stored camera and
    /// compares against the stored keypoints, over visible joints.
    /// Returns `None` when no joint is visible.
    pub fn reprojection_errors(&self) -> Option<(f64, f64)> {
        let intr = self.camera.intrinsics();
        let proj = &self.camera.projection_matrix;
        let mut max = 0.0f64;
        let mut sum = 0.0f64;
        let mut n = 0usize;
        for (kp, v3) in self.keypoints2d.iter().zip(&self.joints3d_view) {
            if !kp.visible {
                continue;
            }
            let re = crate::projection::view_to_image(v3, proj, &intr);
            let err = ((re.x - kp.x).powi(2) + (re.y - kp.y).powi(2)).sqrt();
            max = max.max(err);
            sum += err;
            n += 1;
        }
        if n == 0 {
            None
        } else {
            Some((max, sum / n as f64))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("clip{i:02}")).collect()
    }

    #[test]
    fn counting_formula() {
        assert_eq!(expected_total(&[100], 12), 1200);
        assert_eq!(expected_total(&[10, 20, 30], 4), 240);
        assert_eq!(expected_total(&[], 12), 0);
    }

    #[test]
    fn all_train_when_ratio_is_one() {
        let splits = split_clips(&ids(5), SplitRatios { train: 1.0, val: 0.0, test: 0.0 }, 7).unwrap();
        assert!(splits.values().all(|s| s == "train"));
        assert_eq!(splits.len(), 5);
    }

    #[test]
    fn split_is_deterministic_and_clip_granular() {
        let ratios = SplitRatios { train: 0.8, val: 0.1, test: 0.1 };
        let a = split_clips(&ids(10), ratios, 42).unwrap();
        let b = split_clips(&ids(10), ratios, 42).unwrap();
        assert_eq!(a, b);
        // 10 clips at (0.8, 0.1, 0.1): quotas are exactly 8/1/1.
        let count = |name: &str| a.values().filter(|v| *v == name).count();
        assert_eq!(count("train"), 8);
        assert_eq!(count("val"), 1);
        assert_eq!(count("test"), 1);
    }

    #[test]
    fn split_changes_with_seed() {
        let ratios = SplitRatios { train: 0.5, val: 0.25, test: 0.25 };
        let a = split_clips(&ids(20), ratios, 1).unwrap();
        let b = split_clips(&ids(20), ratios, 2).unwrap();
        assert_ne!(a, b, "different seeds should shuffle clips differently");
    }

    #[test]
    fn too_few_clips_is_an_error() {
        let ratios = SplitRatios { train: 0.8, val: 0.1, test: 0.1 };
        let err = split_clips(&ids(2), ratios, 0).unwrap_err();
        assert!(matches!(err, DatasetError::NotEnoughClips { clips: 2, splits: 3 }));
    }

    #[test]
    fn bad_ratios_are_rejected() {
        assert!(SplitRatios { train: 0.5, val: 0.2, test: 0.2 }.validate().is_err());
        assert!(SplitRatios { train: -0.1, val: 0.6, test: 0.5 }.validate().is_err());
        assert!(SplitRatios { train: 0.8, val: 0.1, test: 0.1 }.validate().is_ok());
    }

    #[test]
    fn sample_paths_are_zero_padded() {
        assert_eq!(sample_rel("walk", "cam03", 7), "walk/cam03/000007");
        assert_eq!(image_rel("walk", "cam03", 7), "images/walk/cam03/000007.png");
        assert_eq!(annotation_rel("walk", "cam03", 7), "ann/walk/cam03/000007.json");
    }
}
