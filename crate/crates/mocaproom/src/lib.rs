//! mocaproom — a virtual mocap room.
//!
//! Generates multi-view synthetic training datasets for 2D/3D pose
//! estimation from skeletal keyframe animations. The pipeline:
//!
//! 1. **anim** – parse BVH clips (or the internal clip format).
//! 2. **skeleton** – forward kinematics: per-frame world joint transforms.
//! 3. **camera** – a ring of pinhole cameras around the subject.
//! 4. **projection** – world → view → image coordinates with visibility.
//! 5. **render** – stick-figure raster over a composited background.
//! 6. **augment** – keypoint-consistent geometric and photometric jitter.
//! 7. **dataset** – sample records, manifest, splits, validation.
//! 8. **metrics** – PCK / MPJPE / reprojection error against ground truth.
//!
//! The long-form guide lives in `book/`; its code snippets run as doctests.

pub mod anim;
pub mod augment;
pub mod camera;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod demo;
pub mod math;
pub mod metrics;
pub mod projection;
pub mod render;
pub mod rng;
pub mod skeleton;

pub use anim::{clip_stats, read_clip, write_clip, AnimationClip};
pub use camera::{build_ring_rig, projection_matrix, view_matrix, Camera, CameraExtrinsics, CameraIntrinsics};
pub use projection::{project_joints, world_to_view, JointView3D, Keypoint2D};
pub use render::{composite, render_skeleton, to_grayscale, Image, RenderStyle};
pub use skeleton::{bone_lengths, forward_kinematics, LocalPose, Skeleton, WorldPose};
