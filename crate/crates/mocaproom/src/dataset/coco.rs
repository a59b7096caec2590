//! COCO-keypoints-compatible export of the 2D labels, for training code
//! that already speaks that schema.
//!
//! Mapping: visible joints get v = 2 (labeled and visible); out-of-frustum
//! joints get v = 0 with zeroed coordinates, the customary sentinel. The
//! category's `skeleton` lists parent-child bone pairs with 1-based joint
//! indices.

use std::path::Path;

use serde::Serialize;

use super::{read_dataset, DatasetError};

#[derive(Serialize)]
struct CocoDoc {
    info: CocoInfo,
    licenses: Vec<serde_json::Value>,
    categories: Vec<CocoCategory>,
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
}

#[derive(Serialize)]
struct CocoInfo {
    description: String,
    version: String,
}

#[derive(Serialize)]
struct CocoCategory {
    id: u32,
    name: String,
    supercategory: String,
    keypoints: Vec<String>,
    skeleton: Vec<[usize; 2]>,
}

#[derive(Serialize)]
struct CocoImage {
    id: u64,
    file_name: String,
    width: u32,
    height: u32,
}

#[derive(Serialize)]
struct CocoAnnotation {
    id: u64,
    image_id: u64,
    category_id: u32,
    iscrowd: u8,
    num_keypoints: usize,
    keypoints: Vec<f64>,
    bbox: [f64; 4],
    area: f64,
}

/// Summary of what was written.
#[derive(Debug, Clone, Serialize)]
pub struct CocoExport {
    pub images: usize,
    pub skipped: usize,
}

/// Writes `<out>` as a COCO keypoints document covering every readable
/// record; unreadable samples are skipped and counted.
pub fn export_coco(root: &Path, out: &Path) -> Result<CocoExport, DatasetError> {
    let (manifest, samples) = read_dataset(root)?;

    let keypoints: Vec<String> =
        manifest.skeleton.joints().iter().map(|j| j.name.clone()).collect();
    let skeleton: Vec<[usize; 2]> = manifest
        .skeleton
        .joints()
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.parent.map(|p| [p + 1, i + 1]))
        .collect();
    let category = CocoCategory {
        id: 1,
        name: "subject".into(),
        supercategory: "animal".into(),
        keypoints,
        skeleton,
    };

    let mut images = Vec::new();
    let mut annotations = Vec::new();
    let mut skipped = 0usize;
    for (idx, item) in samples.enumerate() {
        let record = match item {
            Ok(r) => r,
            Err(issue) => {
                eprintln!("warning: skipping {issue}");
                skipped += 1;
                continue;
            }
        };
        let id = idx as u64 + 1;
        images.push(CocoImage {
            id,
            file_name: record.image.clone(),
            width: record.camera.width,
            height: record.camera.height,
        });

        let mut flat = Vec::with_capacity(record.keypoints2d.len() * 3);
        let mut num_visible = 0usize;
        let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
        let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for kp in &record.keypoints2d {
            if kp.visible {
                flat.extend_from_slice(&[kp.x, kp.y, 2.0]);
                num_visible += 1;
                min_x = min_x.min(kp.x);
                min_y = min_y.min(kp.y);
                max_x = max_x.max(kp.x);
                max_y = max_y.max(kp.y);
            } else {
                flat.extend_from_slice(&[0.0, 0.0, 0.0]);
            }
        }
        let bbox = if num_visible > 0 {
            [min_x, min_y, max_x - min_x, max_y - min_y]
        } else {
            [0.0, 0.0, 0.0, 0.0]
        };
        annotations.push(CocoAnnotation {
            id,
            image_id: id,
            category_id: 1,
            iscrowd: 0,
            num_keypoints: num_visible,
            keypoints: flat,
            bbox,
            area: bbox[2] * bbox[3],
        });
    }

    let doc = CocoDoc {
        info: CocoInfo { description: "mocaproom synthetic pose dataset".into(), version: "1.0".into() },
        licenses: Vec::new(),
        categories: vec![category],
        images,
        annotations,
    };
    let exported = CocoExport { images: doc.images.len(), skipped };
    let mut bytes = serde_json::to_vec_pretty(&doc).map_err(DatasetError::CorruptManifest)?;
    bytes.push(b'\n');
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(out, bytes)?;
    Ok(exported)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_dataset, GenerateOptions, NamedClip, RigConfig};
    use crate::demo::demo_clip;

    #[test]
    fn export_covers_every_sample() {
        let dir = tempfile::tempdir().unwrap();
        let clips = [NamedClip { id: "walk".into(), clip: demo_clip(2, 1.0 / 30.0) }];
        let opts = GenerateOptions {
            rig: RigConfig { count: 3, width: 96, height_px: 72, ..Default::default() },
            ..Default::default()
        };
        generate_dataset(&clips, &opts, dir.path()).unwrap();

        let out = dir.path().join("coco.json");
        let summary = export_coco(dir.path(), &out).unwrap();
        assert_eq!(summary.images, 6);
        assert_eq!(summary.skipped, 0);

        let doc: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(doc["images"].as_array().unwrap().len(), 6);
        assert_eq!(doc["annotations"].as_array().unwrap().len(), 6);
        let kps = doc["annotations"][0]["keypoints"].as_array().unwrap();
        assert_eq!(kps.len(), 37 * 3);
        assert_eq!(doc["categories"][0]["keypoints"].as_array().unwrap().len(), 37);
        // 36 bones for 37 joints.
        assert_eq!(doc["categories"][0]["skeleton"].as_array().unwrap().len(), 36);
    }
}
