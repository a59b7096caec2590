//! Pose-prediction scoring against ground truth: PCK for 2D keypoints,
//! MPJPE for 3D view-space joints, and per-record reprojection error.
//!
//! PCK counts a predicted joint as correct when its distance to the visible
//! ground-truth joint is at most `alpha` times that sample's reference
//! length, the diagonal of the visible keypoints' bounding box. MPJPE is the
//! mean Euclidean distance in view space, optionally after root alignment.
//! Aggregation is order-independent, so samples may be scored in parallel
//! and merged.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::SampleRecord;
use crate::math::Vec3;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("{pred} predictions for {gt} ground-truth samples")]
    SampleCountMismatch { pred: usize, gt: usize },
    #[error("sample {sample}: {pred} predicted joints for {gt} ground-truth joints")]
    JointCountMismatch { sample: String, pred: usize, gt: usize },
    #[error("alpha must be a positive finite fraction, got {0}")]
    BadAlpha(f64),
    #[error("reprojection error is defined for un-augmented records only")]
    AugmentedRecord,
    #[error("cannot read predictions {path}: {message}")]
    PredictionLoad { path: std::path::PathBuf, message: String },
    #[error("prediction {index}: keypoint entries must be [x, y] or [x, y, v], got {got} values")]
    BadKeypointArity { index: usize, got: usize },
    #[error("no prediction for sample {0}")]
    MissingPrediction(String),
}

/// Per-joint and mean scores over an evaluation run.
///
/// `per_joint[j]` is `None` when joint j was never evaluated (e.g. never
/// visible). The mean is evaluation-weighted, so it always lies within the
/// per-joint score range.
#[derive(Debug, Clone, Serialize)]
pub struct PoseEvalResult {
    pub mean: f64,
    pub per_joint: Vec<Option<f64>>,
    pub per_joint_evaluated: Vec<usize>,
    pub joint_count: usize,
    pub sample_count: usize,
}

/// Percentage of Correct Keypoints at threshold `alpha` × bbox diagonal.
///
/// Invisible ground-truth joints are excluded. Samples with no visible
/// joints contribute nothing; `Ok(None)` means nothing was evaluated at all.
pub fn pck(
    pred: &[Vec<[f64; 2]>],
    gt: &[SampleRecord],
    alpha: f64,
) -> Result<Option<PoseEvalResult>, MetricsError> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(MetricsError::BadAlpha(alpha));
    }
    if pred.len() != gt.len() {
        return Err(MetricsError::SampleCountMismatch { pred: pred.len(), gt: gt.len() });
    }
    let joint_count = gt.first().map(|r| r.keypoints2d.len()).unwrap_or(0);
    let mut correct = vec![0usize; joint_count];
    let mut evaluated = vec![0usize; joint_count];

    for (p, record) in pred.iter().zip(gt) {
        if p.len() != record.keypoints2d.len() {
            return Err(MetricsError::JointCountMismatch {
                sample: sample_name(record),
                pred: p.len(),
                gt: record.keypoints2d.len(),
            });
        }
        let visible: Vec<usize> = (0..record.keypoints2d.len())
            .filter(|i| record.keypoints2d[*i].visible)
            .collect();
        if visible.is_empty() {
            continue;
        }
        let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
        let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &i in &visible {
            let kp = &record.keypoints2d[i];
            min_x = min_x.min(kp.x);
            min_y = min_y.min(kp.y);
            max_x = max_x.max(kp.x);
            max_y = max_y.max(kp.y);
        }
        let reference = ((max_x - min_x).powi(2) + (max_y - min_y).powi(2)).sqrt();
        let threshold = alpha * reference;
        for &i in &visible {
            let kp = &record.keypoints2d[i];
            let d = ((p[i][0] - kp.x).powi(2) + (p[i][1] - kp.y).powi(2)).sqrt();
            evaluated[i] += 1;
            if d <= threshold {
                correct[i] += 1;
            }
        }
    }

    let total_eval: usize = evaluated.iter().sum();
    if total_eval == 0 {
        return Ok(None);
    }
    let total_correct: usize = correct.iter().sum();
    Ok(Some(PoseEvalResult {
        mean: total_correct as f64 / total_eval as f64,
        per_joint: correct
            .iter()
            .zip(&evaluated)
            .map(|(c, e)| if *e == 0 { None } else { Some(*c as f64 / *e as f64) })
            .collect(),
        per_joint_evaluated: evaluated,
        joint_count,
        sample_count: gt.len(),
    }))
}

/// Mean Per-Joint Position Error in view space, dataset units. With
/// `root_aligned`, the root joint (index 0) is subtracted from prediction
/// and ground truth before measuring.
pub fn mpjpe(
    pred: &[Vec<[f64; 3]>],
    gt: &[SampleRecord],
    root_aligned: bool,
) -> Result<Option<PoseEvalResult>, MetricsError> {
    if pred.len() != gt.len() {
        return Err(MetricsError::SampleCountMismatch { pred: pred.len(), gt: gt.len() });
    }
    let joint_count = gt.first().map(|r| r.joints3d_view.len()).unwrap_or(0);
    let mut sums = vec![0.0f64; joint_count];
    let mut counts = vec![0usize; joint_count];

    for (p, record) in pred.iter().zip(gt) {
        if p.len() != record.joints3d_view.len() {
            return Err(MetricsError::JointCountMismatch {
                sample: sample_name(record),
                pred: p.len(),
                gt: record.joints3d_view.len(),
            });
        }
        if p.is_empty() {
            continue;
        }
        let (pred_root, gt_root) = if root_aligned {
            (Vec3::from(p[0]), record.joints3d_view[0].to_vec3())
        } else {
            (Vec3::ZERO, Vec3::ZERO)
        };
        for (i, (pj, gj)) in p.iter().zip(&record.joints3d_view).enumerate() {
            let d = ((Vec3::from(*pj) - pred_root) - (gj.to_vec3() - gt_root)).length();
            sums[i] += d;
            counts[i] += 1;
        }
    }

    let total_eval: usize = counts.iter().sum();
    if total_eval == 0 {
        return Ok(None);
    }
    let total_sum: f64 = sums.iter().sum();
    Ok(Some(PoseEvalResult {
        mean: total_sum / total_eval as f64,
        per_joint: sums
            .iter()
            .zip(&counts)
            .map(|(s, c)| if *c == 0 { None } else { Some(s / *c as f64) })
            .collect(),
        per_joint_evaluated: counts,
        joint_count,
        sample_count: gt.len(),
    }))
}

/// Max and mean pixel error of reprojecting a record's stored 3D joints
/// through its stored camera, over visible joints.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReprojectionStats {
    pub max: f64,
    pub mean: f64,
}

/// Reprojection error of one un-augmented record; `Ok(None)` when no joint
/// is visible.
pub fn reprojection_error(record: &SampleRecord) -> Result<Option<ReprojectionStats>, MetricsError> {
    if record.augmentation.is_some() {
        return Err(MetricsError::AugmentedRecord);
    }
    Ok(record.reprojection_errors().map(|(max, mean)| ReprojectionStats { max, mean }))
}

fn sample_name(record: &SampleRecord) -> String {
    format!("{}/{}/{:06}", record.clip_id, record.camera_id, record.frame_index)
}

/// One entry of a predictions file: sample identity plus predicted 2D
/// keypoints and/or 3D view-space joints, mirroring the annotation arrays.
/// 2D entries may be `[x, y]` or `[x, y, v]`; a predicted v is ignored.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub clip_id: String,
    pub frame_index: usize,
    pub camera_id: String,
    #[serde(default)]
    pub keypoints2d: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub joints3d_view: Option<Vec<[f64; 3]>>,
}

pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>, MetricsError> {
    let text = std::fs::read_to_string(path).map_err(|e| MetricsError::PredictionLoad {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let records: Vec<PredictionRecord> =
        serde_json::from_str(&text).map_err(|e| MetricsError::PredictionLoad {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    for (index, r) in records.iter().enumerate() {
        if let Some(kps) = &r.keypoints2d {
            for kp in kps {
                if kp.len() != 2 && kp.len() != 3 {
                    return Err(MetricsError::BadKeypointArity { index, got: kp.len() });
                }
            }
        }
    }
    Ok(records)
}

/// Predicted 2D keypoints per sample, aligned with a record list.
pub type Aligned2D = Vec<Vec<[f64; 2]>>;
/// Predicted 3D view-space joints per sample, aligned with a record list.
pub type Aligned3D = Vec<Vec<[f64; 3]>>;

/// Matches predictions to ground-truth records by (clip, frame, camera) and
/// returns them in record order: 2D arrays where present, 3D arrays where
/// present. Every record must have a prediction.
pub fn align_predictions(
    records: &[SampleRecord],
    predictions: &[PredictionRecord],
) -> Result<(Option<Aligned2D>, Option<Aligned3D>), MetricsError> {
    let mut by_key: HashMap<(&str, usize, &str), &PredictionRecord> = HashMap::new();
    for p in predictions {
        by_key.insert((p.clip_id.as_str(), p.frame_index, p.camera_id.as_str()), p);
    }
    let mut all2d = Vec::with_capacity(records.len());
    let mut all3d = Vec::with_capacity(records.len());
    let mut have2d = true;
    let mut have3d = true;
    for r in records {
        let p = by_key
            .get(&(r.clip_id.as_str(), r.frame_index, r.camera_id.as_str()))
            .ok_or_else(|| MetricsError::MissingPrediction(sample_name(r)))?;
        match &p.keypoints2d {
            Some(kps) => all2d.push(kps.iter().map(|k| [k[0], k[1]]).collect::<Vec<_>>()),
            None => have2d = false,
        }
        match &p.joints3d_view {
            Some(js) => all3d.push(js.clone()),
            None => have3d = false,
        }
    }
    Ok((have2d.then_some(all2d), have3d.then_some(all3d)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::CameraParams;
    use crate::math::{Mat3, Mat4};
    use crate::projection::{JointView3D, Keypoint2D};
    use crate::rng::StreamRng;

    fn record(kps: Vec<(f64, f64, bool)>, joints: Vec<[f64; 3]>) -> SampleRecord {
        let cam = crate::camera::Camera {
            id: "cam00".into(),
            extrinsics: crate::camera::CameraExtrinsics {
                eye: Vec3::new(0.0, 0.0, 10.0),
                focal_point: Vec3::ZERO,
                up: Vec3::new(0.0, 1.0, 0.0),
            },
            intrinsics: crate::camera::CameraIntrinsics::default(),
        };
        SampleRecord {
            clip_id: "clip".into(),
            frame_index: 0,
            camera_id: "cam00".into(),
            image: "images/clip/cam00/000000.png".into(),
            keypoints2d: kps
                .into_iter()
                .map(|(x, y, visible)| Keypoint2D { x, y, visible })
                .collect(),
            joints3d_view: joints
                .into_iter()
                .map(|[x, y, z]| JointView3D { x, y, z })
                .collect(),
            camera: CameraParams::from_camera(&cam).unwrap(),
            augmentation: None,
        }
    }

    fn gt_pred(record: &SampleRecord) -> Vec<[f64; 2]> {
        record.keypoints2d.iter().map(|k| [k.x, k.y]).collect()
    }

    #[test]
    fn perfect_prediction_scores_one_at_any_alpha() {
        let gt = vec![record(
            vec![(10.0, 10.0, true), (50.0, 80.0, true), (200.0, 40.0, true)],
            vec![],
        )];
        let pred = vec![gt_pred(&gt[0])];
        for alpha in [1e-6, 0.05, 0.5, 2.0] {
            let r = pck(&pred, &gt, alpha).unwrap().unwrap();
            assert_eq!(r.mean, 1.0, "alpha {alpha}");
        }
    }

    #[test]
    fn just_over_threshold_scores_zero() {
        let gt = vec![record(vec![(0.0, 0.0, true), (30.0, 40.0, true)], vec![])];
        // Reference diagonal is 50; threshold at alpha 0.1 is 5.
        let eps = 1e-9;
        let pred = vec![vec![[5.0 + eps, 0.0], [35.0 + eps, 40.0]]];
        let r = pck(&pred, &gt, 0.1).unwrap().unwrap();
        assert_eq!(r.mean, 0.0);
        // At exactly the threshold the joint counts as correct.
        let pred = vec![vec![[5.0, 0.0], [25.0, 40.0]]];
        let r = pck(&pred, &gt, 0.1).unwrap().unwrap();
        assert_eq!(r.mean, 1.0);
    }

    #[test]
    fn half_correct_scores_half() {
        let gt = vec![record(
            vec![(0.0, 0.0, true), (100.0, 0.0, true), (0.0, 100.0, true), (100.0, 100.0, true)],
            vec![],
        )];
        let mut pred = gt_pred(&gt[0]);
        pred[2] = [500.0, 500.0];
        pred[3] = [-500.0, 500.0];
        let r = pck(&[pred], &gt, 0.1).unwrap().unwrap();
        assert_eq!(r.mean, 0.5);
        assert_eq!(r.per_joint[0], Some(1.0));
        assert_eq!(r.per_joint[2], Some(0.0));
    }

    #[test]
    fn invisible_joints_are_excluded() {
        let gt = vec![record(vec![(0.0, 0.0, true), (60.0, 80.0, true), (9.0, 9.0, false)], vec![])];
        let pred = vec![vec![[0.0, 0.0], [60.0, 80.0], [99999.0, 0.0]]];
        let r = pck(&pred, &gt, 0.05).unwrap().unwrap();
        assert_eq!(r.mean, 1.0);
        assert_eq!(r.per_joint[2], None);
        assert_eq!(r.per_joint_evaluated[2], 0);
    }

    #[test]
    fn no_visible_joints_yields_no_data() {
        let gt = vec![record(vec![(0.0, 0.0, false)], vec![])];
        let pred = vec![vec![[0.0, 0.0]]];
        assert!(pck(&pred, &gt, 0.2).unwrap().is_none());
    }

    #[test]
    fn bad_alpha_is_rejected() {
        let gt = vec![record(vec![(0.0, 0.0, true)], vec![])];
        let pred = vec![vec![[0.0, 0.0]]];
        assert!(matches!(pck(&pred, &gt, 0.0), Err(MetricsError::BadAlpha(_))));
        assert!(matches!(pck(&pred, &gt, -1.0), Err(MetricsError::BadAlpha(_))));
    }

    #[test]
    fn pck_is_monotone_in_alpha() {
        let mut rng = StreamRng::from_key(31);
        let joints: Vec<(f64, f64, bool)> =
            (0..10).map(|_| (rng.uniform_in(0.0, 640.0), rng.uniform_in(0.0, 480.0), true)).collect();
        let gt = vec![record(joints.clone(), vec![])];
        let pred: Vec<Vec<[f64; 2]>> = vec![joints
            .iter()
            .map(|(x, y, _)| [x + rng.uniform_in(-40.0, 40.0), y + rng.uniform_in(-40.0, 40.0)])
            .collect()];
        let mut last = 0.0;
        for alpha in [0.01, 0.02, 0.05, 0.1, 0.2, 0.4, 0.8] {
            let r = pck(&pred, &gt, alpha).unwrap().unwrap();
            assert!(r.mean >= last, "PCK fell from {last} to {} at alpha {alpha}", r.mean);
            last = r.mean;
        }
    }

    #[test]
    fn mpjpe_zero_for_identical() {
        let gt = vec![record(vec![], vec![[1.0, 2.0, -10.0], [0.0, -1.0, -12.0]])];
        let pred = vec![vec![[1.0, 2.0, -10.0], [0.0, -1.0, -12.0]]];
        let r = mpjpe(&pred, &gt, false).unwrap().unwrap();
        assert_eq!(r.mean, 0.0);
    }

    #[test]
    fn mpjpe_pythagorean_offset() {
        let gt = vec![record(vec![], vec![[0.0, 0.0, -5.0], [1.0, 1.0, -6.0]])];
        let pred: Vec<Vec<[f64; 3]>> = vec![gt[0]
            .joints3d_view
            .iter()
            .map(|j| [j.x + 3.0, j.y + 4.0, j.z])
            .collect()];
        let r = mpjpe(&pred, &gt, false).unwrap().unwrap();
        assert!((r.mean - 5.0).abs() < 1e-12);
        assert_eq!(r.per_joint[0], Some(5.0));
    }

    #[test]
    fn root_alignment_cancels_constant_offsets() {
        let gt = vec![record(vec![], vec![[0.0, 0.0, -5.0], [1.0, 1.0, -6.0], [2.0, 0.0, -7.0]])];
        let pred: Vec<Vec<[f64; 3]>> = vec![gt[0]
            .joints3d_view
            .iter()
            .map(|j| [j.x + 17.0, j.y - 4.0, j.z + 2.5])
            .collect()];
        let r = mpjpe(&pred, &gt, true).unwrap().unwrap();
        assert!(r.mean.abs() < 1e-12);
        let r = mpjpe(&pred, &gt, false).unwrap().unwrap();
        assert!(r.mean > 10.0);
    }

    #[test]
    fn mpjpe_invariant_under_global_rotation() {
        let mut rng = StreamRng::from_key(99);
        let joints: Vec<[f64; 3]> = (0..8)
            .map(|_| [rng.uniform_in(-5.0, 5.0), rng.uniform_in(-5.0, 5.0), rng.uniform_in(-20.0, -10.0)])
            .collect();
        let pred_raw: Vec<[f64; 3]> = joints
            .iter()
            .map(|j| [j[0] + rng.uniform_in(-1.0, 1.0), j[1] + rng.uniform_in(-1.0, 1.0), j[2]])
            .collect();
        let gt = vec![record(vec![], joints.clone())];
        let base = mpjpe(std::slice::from_ref(&pred_raw), &gt, false).unwrap().unwrap();

        let rot = Mat3::rot_y_deg(37.0) * Mat3::rot_x_deg(-71.0) * Mat3::rot_z_deg(12.0);
        let spin = |v: &[f64; 3]| {
            let r = rot.mul_vec(Vec3::new(v[0], v[1], v[2]));
            [r.x, r.y, r.z]
        };
        let gt_rot = vec![record(vec![], joints.iter().map(spin).collect())];
        let pred_rot: Vec<[f64; 3]> = pred_raw.iter().map(spin).collect();
        let rotated = mpjpe(&[pred_rot], &gt_rot, false).unwrap().unwrap();
        assert!((base.mean - rotated.mean).abs() < 1e-9);
    }

    #[test]
    fn metrics_are_permutation_invariant() {
        let mut rng = StreamRng::from_key(17);
        let mut gt = Vec::new();
        let mut pred2d = Vec::new();
        for _ in 0..6 {
            let joints: Vec<(f64, f64, bool)> =
                (0..5).map(|_| (rng.uniform_in(0.0, 600.0), rng.uniform_in(0.0, 400.0), true)).collect();
            pred2d.push(
                joints
                    .iter()
                    .map(|(x, y, _)| [x + rng.uniform_in(-30.0, 30.0), y + rng.uniform_in(-30.0, 30.0)])
                    .collect::<Vec<_>>(),
            );
            gt.push(record(joints, vec![]));
        }
        let forward = pck(&pred2d, &gt, 0.15).unwrap().unwrap();
        let mut rev_pred = pred2d.clone();
        rev_pred.reverse();
        let mut rev_gt = gt.clone();
        rev_gt.reverse();
        let reversed = pck(&rev_pred, &rev_gt, 0.15).unwrap().unwrap();
        assert_eq!(forward.mean, reversed.mean);
        assert_eq!(forward.per_joint, reversed.per_joint);
    }

    #[test]
    fn mean_lies_within_per_joint_range() {
        let mut rng = StreamRng::from_key(55);
        let mut gt = Vec::new();
        let mut pred = Vec::new();
        for _ in 0..10 {
            let joints: Vec<(f64, f64, bool)> =
                (0..6).map(|_| (rng.uniform_in(0.0, 600.0), rng.uniform_in(0.0, 400.0), rng.chance(0.8))).collect();
            pred.push(
                joints
                    .iter()
                    .map(|(x, y, _)| [x + rng.uniform_in(-50.0, 50.0), y + rng.uniform_in(-50.0, 50.0)])
                    .collect::<Vec<_>>(),
            );
            gt.push(record(joints, vec![]));
        }
        if let Some(r) = pck(&pred, &gt, 0.12).unwrap() {
            let scored: Vec<f64> = r.per_joint.iter().flatten().copied().collect();
            let lo = scored.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = scored.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(r.mean >= lo - 1e-12 && r.mean <= hi + 1e-12);
        }
    }

    #[test]
    fn reprojection_error_rejects_augmented_records() {
        let mut r = record(vec![(1.0, 1.0, true)], vec![[0.0, 0.0, -5.0]]);
        r.augmentation = Some(crate::augment::sample_params(
            &crate::augment::AugmentationSpec::default(),
            1,
            crate::rng::SampleKey { clip_id: "x", frame_index: 0, camera_index: 0 },
        ));
        assert!(matches!(reprojection_error(&r), Err(MetricsError::AugmentedRecord)));
    }

    #[test]
    fn reprojection_of_perturbed_keypoint_measures_the_perturbation() {
        // Build a consistent record, then shift one stored keypoint by 2 px.
        let view = Mat4::IDENTITY;
        let _ = view;
        let intr = crate::camera::CameraIntrinsics::default();
        let proj = crate::camera::projection_matrix(&intr);
        let joints = vec![[0.5, -0.3, -8.0], [1.0, 1.0, -12.0]];
        let kps: Vec<(f64, f64, bool)> = joints
            .iter()
            .map(|[x, y, z]| {
                let kp = crate::projection::view_to_image(
                    &JointView3D { x: *x, y: *y, z: *z },
                    &proj,
                    &intr,
                );
                (kp.x, kp.y, true)
            })
            .collect();
        let clean = record(kps.clone(), joints.clone());
        let stats = reprojection_error(&clean).unwrap().unwrap();
        assert!(stats.max < 1e-9);

        let mut perturbed_kps = kps;
        perturbed_kps[1].0 += 2.0;
        let dirty = record(perturbed_kps, joints);
        let stats = reprojection_error(&dirty).unwrap().unwrap();
        assert!((stats.max - 2.0).abs() < 1e-9, "max {}", stats.max);
    }

    #[test]
    fn reprojection_with_no_visible_joints_is_no_data() {
        let r = record(vec![(1.0, 1.0, false)], vec![[0.0, 0.0, -5.0]]);
        assert!(reprojection_error(&r).unwrap().is_none());
    }

    #[test]
    fn align_matches_by_identity() {
        let gt = vec![record(vec![(1.0, 2.0, true)], vec![[0.0, 0.0, -5.0]])];
        let preds = vec![PredictionRecord {
            clip_id: "clip".into(),
            frame_index: 0,
            camera_id: "cam00".into(),
            keypoints2d: Some(vec![vec![1.5, 2.5]]),
            joints3d_view: None,
        }];
        let (p2d, p3d) = align_predictions(&gt, &preds).unwrap();
        assert_eq!(p2d.unwrap()[0][0], [1.5, 2.5]);
        assert!(p3d.is_none());

        let missing = vec![PredictionRecord {
            clip_id: "other".into(),
            frame_index: 0,
            camera_id: "cam00".into(),
            keypoints2d: None,
            joints3d_view: None,
        }];
        assert!(matches!(
            align_predictions(&gt, &missing),
            Err(MetricsError::MissingPrediction(_))
        ));
    }
}
