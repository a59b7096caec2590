//! Whole-dataset validation: manifest bookkeeping, file digests, per-record
//! joint counts, reprojection closure and image decodability.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{annotation_rel, image_rel, sample_rel, DatasetError, Manifest, SampleRecord};
use crate::render::Image;

/// Maximum allowed reprojection error for un-augmented records, in pixels.
pub const REPROJECTION_TOLERANCE_PX: f64 = 1e-3;

/// One failed check, tied to a sample (or to the manifest itself).
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub sample: String,
    pub rule: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checked_samples: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

fn sha_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Validates every sample the manifest references. Only an unreadable
/// manifest is a hard error; everything else lands in the report.
pub fn validate_dataset(root: &Path) -> Result<ValidationReport, DatasetError> {
    let manifest = Manifest::load(root)?;
    let mut violations = Vec::new();
    let mut violation = |sample: String, rule: &'static str, message: String| {
        violations.push(Violation { sample, rule, message });
    };

    let expected = manifest.expected_total();
    if manifest.total_samples != expected {
        violation(
            "manifest".into(),
            "total-count",
            format!(
                "manifest claims {} samples but clips x cameras = {expected}",
                manifest.total_samples
            ),
        );
    }
    if manifest.sample_digests.len() != expected {
        violation(
            "manifest".into(),
            "digest-count",
            format!("{} digests for {expected} samples", manifest.sample_digests.len()),
        );
    }
    if let Some(splits) = &manifest.splits {
        for clip in &manifest.clips {
            if !splits.contains_key(&clip.clip_id) {
                violation(
                    "manifest".into(),
                    "split-coverage",
                    format!("clip {:?} has no split assignment", clip.clip_id),
                );
            }
        }
    }

    let joint_count = manifest.skeleton.joint_count();
    let mut checked = 0usize;
    for (clip_id, camera_id, frame) in manifest.sample_keys() {
        checked += 1;
        let rel = sample_rel(&clip_id, &camera_id, frame);
        let ann_rel = annotation_rel(&clip_id, &camera_id, frame);
        let img_rel = image_rel(&clip_id, &camera_id, frame);
        let digests = manifest.sample_digests.get(&rel);
        if digests.is_none() {
            violation(rel.clone(), "digest-missing", "sample not in manifest digests".into());
        }

        // Annotation file: present, digest-clean, parseable.
        let ann_bytes = match std::fs::read(root.join(&ann_rel)) {
            Ok(b) => b,
            Err(e) => {
                violation(rel.clone(), "annotation-missing", format!("{ann_rel}: {e}"));
                continue;
            }
        };
        if let Some(d) = digests {
            if sha_hex(&ann_bytes) != d.annotation {
                violation(
                    rel.clone(),
                    "annotation-digest",
                    format!("{ann_rel} does not match its manifest digest"),
                );
                continue;
            }
        }
        let record: SampleRecord = match serde_json::from_slice(&ann_bytes) {
            Ok(r) => r,
            Err(e) => {
                violation(rel.clone(), "annotation-parse", format!("{ann_rel}: {e}"));
                continue;
            }
        };

        if record.clip_id != clip_id || record.camera_id != camera_id || record.frame_index != frame
        {
            violation(
                rel.clone(),
                "identity-mismatch",
                format!(
                    "annotation says ({}, {}, {})",
                    record.clip_id, record.camera_id, record.frame_index
                ),
            );
        }
        if record.keypoints2d.len() != joint_count {
            violation(
                rel.clone(),
                "joint-count-2d",
                format!("{} keypoints for {joint_count} joints", record.keypoints2d.len()),
            );
        }
        if record.joints3d_view.len() != joint_count {
            violation(
                rel.clone(),
                "joint-count-3d",
                format!("{} view joints for {joint_count} joints", record.joints3d_view.len()),
            );
        }

        if record.augmentation.is_none()
            && record.keypoints2d.len() == record.joints3d_view.len()
        {
            if let Some((max, _mean)) = record.reprojection_errors() {
                if max > REPROJECTION_TOLERANCE_PX {
                    let joint = worst_joint(&record);
                    violation(
                        rel.clone(),
                        "reprojection",
                        format!("max reprojection error {max:.6} px at joint index {joint}"),
                    );
                }
            }
        }

        // Image file: present, digest-clean, decodable, right size.
        let img_bytes = match std::fs::read(root.join(&img_rel)) {
            Ok(b) => b,
            Err(e) => {
                violation(rel.clone(), "image-missing", format!("{img_rel}: {e}"));
                continue;
            }
        };
        if let Some(d) = digests {
            if sha_hex(&img_bytes) != d.image {
                violation(
                    rel.clone(),
                    "image-digest",
                    format!("{img_rel} does not match its manifest digest"),
                );
                continue;
            }
        }
        match Image::decode(&img_bytes) {
            Ok(img) => {
                if img.width() != record.camera.width || img.height() != record.camera.height {
                    violation(
                        rel.clone(),
                        "image-size",
                        format!(
                            "image is {}x{} but the camera says {}x{}",
                            img.width(),
                            img.height(),
                            record.camera.width,
                            record.camera.height
                        ),
                    );
                }
            }
            Err(e) => violation(rel.clone(), "image-decode", format!("{img_rel}: {e}")),
        }
    }

    Ok(ValidationReport { checked_samples: checked, violations })
}

fn worst_joint(record: &SampleRecord) -> usize {
    let intr = record.camera.intrinsics();
    let mut worst = (0usize, -1.0f64);
    for (i, (kp, v3)) in record.keypoints2d.iter().zip(&record.joints3d_view).enumerate() {
        if !kp.visible {
            continue;
        }
        let re = crate::projection::view_to_image(v3, &record.camera.projection_matrix, &intr);
        let err = ((re.x - kp.x).powi(2) + (re.y - kp.y).powi(2)).sqrt();
        if err > worst.1 {
            worst = (i, err);
        }
    }
    worst.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_dataset, GenerateOptions, NamedClip, RigConfig};
    use crate::demo::demo_clip;

    fn small_dataset(dir: &Path) {
        let clips = [NamedClip { id: "walk".into(), clip: demo_clip(2, 1.0 / 30.0) }];
        let opts = GenerateOptions {
            rig: RigConfig { count: 2, width: 96, height_px: 72, ..Default::default() },
            ..Default::default()
        };
        generate_dataset(&clips, &opts, dir).unwrap();
    }

    #[test]
    fn fresh_dataset_is_clean() {
        let dir = tempfile::tempdir().unwrap();
        small_dataset(dir.path());
        let report = validate_dataset(dir.path()).unwrap();
        assert!(report.is_clean(), "unexpected violations: {:?}", report.violations);
        assert_eq!(report.checked_samples, 4);
    }

    #[test]
    fn single_byte_annotation_corruption_is_caught() {
        let dir = tempfile::tempdir().unwrap();
        small_dataset(dir.path());
        let ann = dir.path().join("ann/walk/cam01/000001.json");
        let mut bytes = std::fs::read(&ann).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x01;
        std::fs::write(&ann, &bytes).unwrap();

        let report = validate_dataset(dir.path()).unwrap();
        assert!(!report.is_clean());
        assert!(report.violations.iter().any(|v| v.sample == "walk/cam01/000001"));
    }

    #[test]
    fn deleted_image_is_reported_by_name() {
        let dir = tempfile::tempdir().unwrap();
        small_dataset(dir.path());
        std::fs::remove_file(dir.path().join("images/walk/cam00/000000.png")).unwrap();
        let report = validate_dataset(dir.path()).unwrap();
        let hits: Vec<_> =
            report.violations.iter().filter(|v| v.rule == "image-missing").collect();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].sample, "walk/cam00/000000");
    }

    #[test]
    fn corrupted_keypoint_fails_reprojection() {
        let dir = tempfile::tempdir().unwrap();
        small_dataset(dir.path());
        let ann_path = dir.path().join("ann/walk/cam00/000000.json");
        let text = std::fs::read_to_string(&ann_path).unwrap();
        let mut record: SampleRecord = serde_json::from_str(&text).unwrap();
        let target = record.keypoints2d.iter_mut().find(|kp| kp.visible).expect("a visible joint");
        target.x += 2.0;
        let mut bytes = serde_json::to_vec_pretty(&record).unwrap();
        bytes.push(b'\n');
        std::fs::write(&ann_path, &bytes).unwrap();

        // Refresh the digest so the perturbation reaches the reprojection check.
        let mut manifest = Manifest::load(dir.path()).unwrap();
        manifest.sample_digests.get_mut("walk/cam00/000000").unwrap().annotation =
            sha_hex(&bytes);
        let mut mbytes = serde_json::to_vec_pretty(&manifest).unwrap();
        mbytes.push(b'\n');
        std::fs::write(dir.path().join("manifest.json"), &mbytes).unwrap();

        let report = validate_dataset(dir.path()).unwrap();
        let hit = report
            .violations
            .iter()
            .find(|v| v.rule == "reprojection")
            .expect("reprojection violation");
        assert!(hit.message.contains("joint index"));
        assert!(hit.message.contains("2.0") || hit.message.contains("1.9"));
    }

    #[test]
    fn missing_manifest_is_a_hard_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            validate_dataset(dir.path()),
            Err(DatasetError::ManifestMissing(_))
        ));
    }
}
