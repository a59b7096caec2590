//! Animation clips: the BVH parser, the internal clip document and clip
//! summaries.
//!
//! The internal format is a JSON document holding the skeleton definition,
//! the frame time and every frame's channel values. Reading back a written
//! clip reproduces all values bit-exactly.

pub mod bvh;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::Vec3;
use crate::skeleton::{forward_kinematics, Channel, Joint, LocalPose, Skeleton, SkeletonError};

/// Version of the internal clip document.
pub const CLIP_FORMAT_VERSION: u32 = 1;

/// A parsed animation: a skeleton plus one [`LocalPose`] per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AnimationClip {
    skeleton: Skeleton,
    frame_time: f64,
    frames: Vec<LocalPose>,
}

#[derive(Debug, Error)]
pub enum ClipError {
    #[error("frame time must be a finite positive number of seconds, got {0}")]
    BadFrameTime(f64),
    #[error("clip has no frames")]
    NoFrames,
    #[error("frame {index} has {got} channel values but the skeleton declares {expected}")]
    FrameChannelMismatch { index: usize, expected: usize, got: usize },
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
    #[error("malformed clip document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("unsupported clip format version {got}; this build reads version {expected}")]
    VersionMismatch { expected: u32, got: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("frame {index} contains a non-finite channel value")]
    NonFiniteChannel { index: usize },
}

impl AnimationClip {
    pub fn new(skeleton: Skeleton, frame_time: f64, frames: Vec<LocalPose>) -> Result<AnimationClip, ClipError> {
        if !(frame_time.is_finite() && frame_time > 0.0) {
            return Err(ClipError::BadFrameTime(frame_time));
        }
        if frames.is_empty() {
            return Err(ClipError::NoFrames);
        }
        for (index, frame) in frames.iter().enumerate() {
            if frame.len() != skeleton.total_channels() {
                return Err(ClipError::FrameChannelMismatch {
                    index,
                    expected: skeleton.total_channels(),
                    got: frame.len(),
                });
            }
            if frame.values().iter().any(|v| !v.is_finite()) {
                return Err(ClipError::NonFiniteChannel { index });
            }
        }
        Ok(AnimationClip { skeleton, frame_time, frames })
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn frame_time(&self) -> f64 {
        self.frame_time
    }

    pub fn frames(&self) -> &[LocalPose] {
        &self.frames
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.frames.len() as f64 * self.frame_time
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ClipDoc {
    format_version: u32,
    skeleton: SkeletonDoc,
    frame_time: f64,
    frames: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SkeletonDoc {
    units: String,
    joints: Vec<JointDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JointDoc {
    name: String,
    parent: Option<usize>,
    offset: [f64; 3],
    channels: Vec<Channel>,
}

/// Writes the internal clip document.
pub fn write_clip<W: Write>(clip: &AnimationClip, mut sink: W) -> Result<(), ClipError> {
    let doc = ClipDoc {
        format_version: CLIP_FORMAT_VERSION,
        skeleton: SkeletonDoc {
            units: clip.skeleton.units().to_string(),
            joints: clip
                .skeleton
                .joints()
                .iter()
                .map(|j| JointDoc {
                    name: j.name.clone(),
                    parent: j.parent,
                    offset: j.rest_offset.into(),
                    channels: j.channels.clone(),
                })
                .collect(),
        },
        frame_time: clip.frame_time,
        frames: clip.frames.iter().map(|f| f.values().to_vec()).collect(),
    };
    let text = serde_json::to_string_pretty(&doc)?;
    sink.write_all(text.as_bytes())?;
    sink.write_all(b"\n")?;
    Ok(())
}

/// Reads the internal clip document back.
pub fn read_clip<R: Read>(mut source: R) -> Result<AnimationClip, ClipError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let doc: ClipDoc = serde_json::from_str(&text)?;
    if doc.format_version != CLIP_FORMAT_VERSION {
        return Err(ClipError::VersionMismatch { expected: CLIP_FORMAT_VERSION, got: doc.format_version });
    }
    let joints = doc
        .skeleton
        .joints
        .into_iter()
        .map(|j| Joint::new(j.name, j.parent, Vec3::from(j.offset), j.channels))
        .collect();
    let skeleton = Skeleton::new(joints, doc.skeleton.units)?;
    let frames = doc.frames.into_iter().map(LocalPose::new).collect();
    AnimationClip::new(skeleton, doc.frame_time, frames)
}

/// Summary of a clip: counts, duration and the root trajectory's bounding box.
#[derive(Debug, Clone, Serialize)]
pub struct ClipStats {
    pub joint_count: usize,
    pub frame_count: usize,
    pub frame_time: f64,
    pub duration_seconds: f64,
    pub root_min: Vec3,
    pub root_max: Vec3,
}

/// Computes summary statistics; the root bounding box comes from forward
/// kinematics over every frame.
pub fn clip_stats(clip: &AnimationClip) -> ClipStats {
    let mut min = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut max = Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for frame in clip.frames() {
        // Clip invariants guarantee the channel counts match.
        let world = forward_kinematics(clip.skeleton(), frame).expect("clip invariant");
        let p = world.positions[0];
        min = Vec3::new(min.x.min(p.x), min.y.min(p.y), min.z.min(p.z));
        max = Vec3::new(max.x.max(p.x), max.y.max(p.y), max.z.max(p.z));
    }
    ClipStats {
        joint_count: clip.skeleton().joint_count(),
        frame_count: clip.frame_count(),
        frame_time: clip.frame_time(),
        duration_seconds: clip.duration_seconds(),
        root_min: min,
        root_max: max,
    }
}
