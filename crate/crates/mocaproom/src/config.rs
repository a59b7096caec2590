//! Run configuration: the JSON config file driving `generate` and `preview`.
//!
//! Unknown fields are rejected so typos fail loudly. Flags override file
//! values; `stats --show-config` prints the defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anim::{bvh::parse_bvh, read_clip, AnimationClip};
use crate::augment::AugmentationSpec;
use crate::dataset::{NamedClip, RigConfig, SplitRatios};

/// Seed used when neither the config file nor the command line sets one.
pub const DEFAULT_SEED: u64 = 1729;

/// Environment variable consulted for the default worker count.
pub const WORKERS_ENV: &str = "MOCAPROOM_WORKERS";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("config lists no input clips")]
    NoClips,
    #[error("clip path {0} does not exist")]
    MissingClipPath(PathBuf),
    #[error("no clips found under {0}")]
    EmptyClipDir(PathBuf),
    #[error("cannot load clip {path}: {message}")]
    ClipLoad { path: PathBuf, message: String },
    #[error("{0} is not valid in {1}")]
    BadValue(String, &'static str),
    #[error("environment variable {WORKERS_ENV} is not a number: {0:?}")]
    BadWorkersEnv(String),
}

/// Everything a generation run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Clip files (`.bvh` or internal `.json`) or directories to scan.
    pub clips: Vec<PathBuf>,
    pub rig: RigConfig,
    pub augmentation: Option<AugmentationSpec>,
    /// Convert final images to grayscale.
    pub grayscale: bool,
    /// Directory of PNG/JPEG backgrounds; flat gray when absent.
    pub background_dir: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
    pub split: Option<SplitRatios>,
    /// Worker count; absent means `MOCAPROOM_WORKERS` or all cores.
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            clips: Vec::new(),
            rig: RigConfig::default(),
            augmentation: None,
            grayscale: false,
            background_dir: None,
            seed: DEFAULT_SEED,
            out: PathBuf::from("dataset"),
            split: None,
            workers: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        serde_json::from_str(&text)
            .map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })
    }

    /// Referenced paths must exist at load time.
    pub fn validate_paths(&self) -> Result<(), ConfigError> {
        if self.clips.is_empty() {
            return Err(ConfigError::NoClips);
        }
        for clip in &self.clips {
            if !clip.exists() {
                return Err(ConfigError::MissingClipPath(clip.clone()));
            }
        }
        Ok(())
    }

    /// Resolved worker count: explicit config, then the environment
    /// variable, then 0 (one per core).
    pub fn effective_workers(&self) -> Result<usize, ConfigError> {
        if let Some(w) = self.workers {
            return Ok(w);
        }
        match std::env::var(WORKERS_ENV) {
            Ok(v) => v.trim().parse::<usize>().map_err(|_| ConfigError::BadWorkersEnv(v)),
            Err(_) => Ok(0),
        }
    }

    /// Expands clip paths (files or directories, recursively) and parses
    /// every clip. Ids are file stems; directories are scanned in sorted
    /// order for `.bvh` and `.json` files.
    pub fn resolve_clips(&self) -> Result<Vec<NamedClip>, ConfigError> {
        self.validate_paths()?;
        let mut files: Vec<PathBuf> = Vec::new();
        for path in &self.clips {
            if path.is_dir() {
                let mut found: Vec<PathBuf> = walkdir::WalkDir::new(path)
                    .sort_by_file_name()
                    .into_iter()
                    .filter_map(|e| e.ok())
                    .filter(|e| e.file_type().is_file())
                    .map(|e| e.into_path())
                    .filter(|p| {
                        p.extension()
                            .and_then(|e| e.to_str())
                            .map(|e| matches!(e.to_ascii_lowercase().as_str(), "bvh" | "json"))
                            .unwrap_or(false)
                    })
                    .collect();
                if found.is_empty() {
                    return Err(ConfigError::EmptyClipDir(path.clone()));
                }
                files.append(&mut found);
            } else {
                files.push(path.clone());
            }
        }

        let mut clips = Vec::with_capacity(files.len());
        for file in files {
            let clip = load_clip(&file)?;
            let id = file
                .file_stem()
                .and_then(|s| s.to_str())
                .map(str::to_string)
                .ok_or_else(|| ConfigError::ClipLoad {
                    path: file.clone(),
                    message: "file name is not valid UTF-8".into(),
                })?;
            clips.push(NamedClip { id, clip });
        }
        Ok(clips)
    }
}

/// Loads one clip file, dispatching on extension: `.bvh` is parsed as BVH,
/// anything else as the internal clip document.
pub fn load_clip(path: &Path) -> Result<AnimationClip, ConfigError> {
    let is_bvh = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.eq_ignore_ascii_case("bvh"))
        .unwrap_or(false);
    if is_bvh {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        parse_bvh(&text)
            .map_err(|e| ConfigError::ClipLoad { path: path.to_path_buf(), message: e.to_string() })
    } else {
        let file = std::fs::File::open(path)
            .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        read_clip(std::io::BufReader::new(file))
            .map_err(|e| ConfigError::ClipLoad { path: path.to_path_buf(), message: e.to_string() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults_match_documented_values() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.seed, DEFAULT_SEED);
        assert_eq!(cfg.rig.count, 12);
        assert_eq!(cfg.rig.width, 640);
        assert_eq!(cfg.rig.height_px, 480);
        assert!(cfg.augmentation.is_none());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"clips": [], "rigg": {}}"#).unwrap();
        let err = RunConfig::load(&path).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { .. }));
        assert!(err.to_string().contains("rigg"));
    }

    #[test]
    fn partial_config_fills_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"clips": ["a.bvh"], "rig": {"count": 4}}"#).unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.rig.count, 4);
        assert_eq!(cfg.rig.fov_deg, 45.0);
        assert_eq!(cfg.seed, DEFAULT_SEED);
    }

    #[test]
    fn missing_clip_paths_fail_validation() {
        let cfg = RunConfig { clips: vec![PathBuf::from("/no/such/clip.bvh")], ..Default::default() };
        assert!(matches!(cfg.validate_paths(), Err(ConfigError::MissingClipPath(_))));
        let empty = RunConfig::default();
        assert!(matches!(empty.validate_paths(), Err(ConfigError::NoClips)));
    }

    #[test]
    fn resolve_scans_directories_in_sorted_order() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["b_second.bvh", "a_first.bvh"] {
            let mut f = std::fs::File::create(dir.path().join(name)).unwrap();
            let clip = crate::demo::demo_clip(2, 0.04);
            f.write_all(crate::anim::bvh::format_bvh(&clip).as_bytes()).unwrap();
        }
        let cfg = RunConfig { clips: vec![dir.path().to_path_buf()], ..Default::default() };
        let clips = cfg.resolve_clips().unwrap();
        assert_eq!(clips.len(), 2);
        assert_eq!(clips[0].id, "a_first");
        assert_eq!(clips[1].id, "b_second");
        assert_eq!(clips[0].clip.skeleton().joint_count(), 37);
    }

    #[test]
    fn internal_clip_files_load_too() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("walk.json");
        let clip = crate::demo::demo_clip(3, 0.04);
        let mut buf = Vec::new();
        crate::anim::write_clip(&clip, &mut buf).unwrap();
        std::fs::write(&path, &buf).unwrap();
        let loaded = load_clip(&path).unwrap();
        assert_eq!(loaded.frame_count(), 3);
    }
}
