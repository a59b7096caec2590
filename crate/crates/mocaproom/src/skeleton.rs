//! Joint hierarchies and forward kinematics.
//!
//! A [`Skeleton`] is a flat, topologically ordered joint list: every joint's
//! parent appears earlier, so world transforms can be computed in one pass.
//! Rotation channels are intrinsic Euler rotations applied in each joint's
//! declared channel order (the BVH convention); angles are degrees. The world
//! frame is right-handed, Y-up.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{Mat3, Vec3};

/// One animatable degree of freedom of a joint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    Xpos,
    Ypos,
    Zpos,
    Xrot,
    Yrot,
    Zrot,
}

impl Channel {
    pub fn is_rotation(self) -> bool {
        matches!(self, Channel::Xrot | Channel::Yrot | Channel::Zrot)
    }
}

/// One joint: a name, an optional parent (index into the skeleton's joint
/// list), a rest offset from the parent, and the animated channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    pub rest_offset: Vec3,
    pub channels: Vec<Channel>,
}

impl Joint {
    pub fn new(name: impl Into<String>, parent: Option<usize>, rest_offset: Vec3, channels: Vec<Channel>) -> Joint {
        Joint { name: name.into(), parent, rest_offset, channels }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    /// Violates a skeleton invariant; such skeletons are rejected.
    Error,
    /// Suspicious but permitted (e.g. zero-length bones on marker joints).
    Warning,
}

/// One finding from [`validate_joints`].
#[derive(Debug, Clone)]
pub struct Diagnostic {
    pub severity: Severity,
    pub joint_index: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.severity {
            Severity::Error => write!(f, "error: {}", self.message),
            Severity::Warning => write!(f, "warning: {}", self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum SkeletonError {
    #[error("invalid skeleton: {}", format_diags(.0))]
    Invalid(Vec<Diagnostic>),
}

fn format_diags(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .filter(|d| d.severity == Severity::Error)
        .map(|d| d.message.clone())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Checks the joint-list invariants and reports every violation.
///
/// Errors: empty list, duplicate names, missing or repeated root, a parent
/// index at or after its child (topological order), non-finite offsets.
/// Warnings: zero-length rest offsets on non-root joints.
pub fn validate_joints(joints: &[Joint]) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    fn err(diags: &mut Vec<Diagnostic>, idx: Option<usize>, message: String) {
        diags.push(Diagnostic { severity: Severity::Error, joint_index: idx, message });
    }

    if joints.is_empty() {
        err(&mut diags, None, "skeleton has no joints".to_string());
        return diags;
    }

    let mut seen = std::collections::HashSet::new();
    let mut roots = 0usize;
    for (i, joint) in joints.iter().enumerate() {
        if !seen.insert(joint.name.as_str()) {
            err(&mut diags, Some(i), format!("duplicate joint name \"{}\"", joint.name));
        }
        match joint.parent {
            None => roots += 1,
            Some(p) if p >= i => err(
                &mut diags,
                Some(i),
                format!(
                    "joint \"{}\" (index {i}) references parent index {p}, which is not earlier in the list",
                    joint.name
                ),
            ),
            Some(_) => {}
        }
        if !joint.rest_offset.is_finite() {
            err(&mut diags, Some(i), format!("joint \"{}\" has a non-finite rest offset", joint.name));
        } else if joint.parent.is_some() && joint.rest_offset.length() == 0.0 {
            diags.push(Diagnostic {
                severity: Severity::Warning,
                joint_index: Some(i),
                message: format!("joint \"{}\" has a zero-length bone (degenerate)", joint.name),
            });
        }
    }
    if roots == 0 {
        err(&mut diags, None, "skeleton has no root joint".to_string());
    } else if roots > 1 {
        err(&mut diags, None, format!("skeleton has {roots} root joints; exactly one is required"));
    }
    diags
}

/// An immutable joint hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SkeletonData", into = "SkeletonData")]
pub struct Skeleton {
    joints: Vec<Joint>,
    units: String,
    /// Per-joint (first channel index, channel count) into a flat pose.
    layout: Vec<(usize, usize)>,
    total_channels: usize,
}

/// Raw serialized form; validated on the way in.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SkeletonData {
    units: String,
    joints: Vec<Joint>,
}

impl TryFrom<SkeletonData> for Skeleton {
    type Error = SkeletonError;
    fn try_from(d: SkeletonData) -> Result<Skeleton, SkeletonError> {
        Skeleton::new(d.joints, d.units)
    }
}

impl From<Skeleton> for SkeletonData {
    fn from(s: Skeleton) -> SkeletonData {
        SkeletonData { units: s.units, joints: s.joints }
    }
}

impl Skeleton {
    /// Validates the joint list and builds the channel layout.
    pub fn new(joints: Vec<Joint>, units: impl Into<String>) -> Result<Skeleton, SkeletonError> {
        let diags = validate_joints(&joints);
        if diags.iter().any(|d| d.severity == Severity::Error) {
            return Err(SkeletonError::Invalid(diags));
        }
        let mut layout = Vec::with_capacity(joints.len());
        let mut total = 0usize;
        for j in &joints {
            layout.push((total, j.channels.len()));
            total += j.channels.len();
        }
        Ok(Skeleton { joints, units: units.into(), layout, total_channels: total })
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    pub fn units(&self) -> &str {
        &self.units
    }

    pub fn total_channels(&self) -> usize {
        self.total_channels
    }

    /// (first channel index, channel count) of joint `i` in a flat pose.
    pub fn channel_span(&self, i: usize) -> (usize, usize) {
        self.layout[i]
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    /// Diagnostics for this (already valid) skeleton; only warnings remain.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        validate_joints(&self.joints)
    }
}

/// Per-frame channel values, flat in skeleton channel order.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPose {
    values: Vec<f64>,
}

impl LocalPose {
    pub fn new(values: Vec<f64>) -> LocalPose {
        LocalPose { values }
    }

    /// A pose with every channel at zero (the skeleton's rest pose).
    pub fn rest(skeleton: &Skeleton) -> LocalPose {
        LocalPose { values: vec![0.0; skeleton.total_channels()] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sets the channel `ch` of joint `joint` if that joint declares it.
    pub fn set_channel(&mut self, skeleton: &Skeleton, joint: usize, ch: Channel, value: f64) {
        let (start, _) = skeleton.channel_span(joint);
        if let Some(pos) = skeleton.joints()[joint].channels.iter().position(|c| *c == ch) {
            self.values[start + pos] = value;
        }
    }
}

/// World-space result of forward kinematics: one position and one orientation
/// per joint, in skeleton order.
#[derive(Debug, Clone)]
pub struct WorldPose {
    pub positions: Vec<Vec3>,
    pub orientations: Vec<Mat3>,
}

#[derive(Debug, Error)]
pub enum FkError {
    #[error("pose has {got} channel values but the skeleton declares {expected}")]
    ChannelCountMismatch { expected: usize, got: usize },
}

/// Composes local joint transforms down the hierarchy.
///
/// The local transform of a joint is the translation `rest_offset + positional
/// channels` followed by its rotation channels applied intrinsically in
/// declared order. Translation channels add component-wise regardless of where
/// they appear in the channel list.
pub fn forward_kinematics(skeleton: &Skeleton, pose: &LocalPose) -> Result<WorldPose, FkError> {
    if pose.len() != skeleton.total_channels() {
        return Err(FkError::ChannelCountMismatch {
            expected: skeleton.total_channels(),
            got: pose.len(),
        });
    }

    let n = skeleton.joint_count();
    let mut positions = Vec::with_capacity(n);
    let mut orientations = Vec::with_capacity(n);

    for (i, joint) in skeleton.joints().iter().enumerate() {
        let (start, count) = skeleton.channel_span(i);
        let values = &pose.values()[start..start + count];

        let mut translation = joint.rest_offset;
        let mut rotation = Mat3::IDENTITY;
        for (ch, v) in joint.channels.iter().zip(values) {
            match ch {
                Channel::Xpos => translation.x += v,
                Channel::Ypos => translation.y += v,
                Channel::Zpos => translation.z += v,
                Channel::Xrot => rotation = rotation * Mat3::rot_x_deg(*v),
                Channel::Yrot => rotation = rotation * Mat3::rot_y_deg(*v),
                Channel::Zrot => rotation = rotation * Mat3::rot_z_deg(*v),
            }
        }

        let (parent_pos, parent_rot) = match joint.parent {
            Some(p) => (positions[p], orientations[p]),
            None => (Vec3::ZERO, Mat3::IDENTITY),
        };
        positions.push(parent_pos + parent_rot.mul_vec(translation));
        orientations.push(parent_rot * rotation);
    }

    Ok(WorldPose { positions, orientations })
}

/// Rest-pose bone lengths of the non-root joints, in skeleton order.
pub fn bone_lengths(skeleton: &Skeleton) -> Vec<(String, f64)> {
    skeleton
        .joints()
        .iter()
        .filter(|j| j.parent.is_some())
        .map(|j| (j.name.clone(), j.rest_offset.length()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn chain2() -> Skeleton {
        Skeleton::new(
            vec![
                Joint::new("root", None, Vec3::ZERO, vec![Channel::Zrot, Channel::Xrot, Channel::Yrot]),
                Joint::new("child", Some(0), Vec3::new(0.0, 1.0, 0.0), vec![Channel::Zrot, Channel::Xrot, Channel::Yrot]),
            ],
            "cm",
        )
        .unwrap()
    }

    #[test]
    fn identity_pose_sums_rest_offsets() {
        let skel = Skeleton::new(
            vec![
                Joint::new("a", None, Vec3::new(1.0, 0.0, 0.0), vec![]),
                Joint::new("b", Some(0), Vec3::new(0.0, 2.0, 0.0), vec![Channel::Zrot]),
                Joint::new("c", Some(1), Vec3::new(0.0, 0.0, 3.0), vec![Channel::Xrot]),
            ],
            "cm",
        )
        .unwrap();
        let world = forward_kinematics(&skel, &LocalPose::rest(&skel)).unwrap();
        assert_eq!(world.positions[2], Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn root_z_rotation_swings_child() {
        // Hand-multiplied oracle: Rz(90) * (0, 1, 0) = (-1, 0, 0).
        let skel = chain2();
        let mut pose = LocalPose::rest(&skel);
        pose.set_channel(&skel, 0, Channel::Zrot, 90.0);
        let world = forward_kinematics(&skel, &pose).unwrap();
        assert_relative_eq!(world.positions[1].x, -1.0, epsilon = 1e-9);
        assert_relative_eq!(world.positions[1].y, 0.0, epsilon = 1e-9);
        assert_relative_eq!(world.positions[1].z, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn root_translation_shifts_everything() {
        let skel = Skeleton::new(
            vec![
                Joint::new("root", None, Vec3::ZERO, vec![
                    Channel::Xpos, Channel::Ypos, Channel::Zpos,
                    Channel::Zrot, Channel::Xrot, Channel::Yrot,
                ]),
                Joint::new("child", Some(0), Vec3::new(0.5, 1.0, -2.0), vec![Channel::Yrot]),
            ],
            "cm",
        )
        .unwrap();
        let mut pose = LocalPose::rest(&skel);
        pose.set_channel(&skel, 0, Channel::Zrot, 31.0);
        pose.set_channel(&skel, 1, Channel::Yrot, -77.0);
        let base = forward_kinematics(&skel, &pose).unwrap();

        let t = Vec3::new(4.0, -7.0, 11.0);
        pose.set_channel(&skel, 0, Channel::Xpos, t.x);
        pose.set_channel(&skel, 0, Channel::Ypos, t.y);
        pose.set_channel(&skel, 0, Channel::Zpos, t.z);
        let moved = forward_kinematics(&skel, &pose).unwrap();

        for i in 0..2 {
            let shifted = base.positions[i] + t;
            assert_relative_eq!(moved.positions[i].x, shifted.x, epsilon = 1e-12);
            assert_relative_eq!(moved.positions[i].y, shifted.y, epsilon = 1e-12);
            assert_relative_eq!(moved.positions[i].z, shifted.z, epsilon = 1e-12);
        }
    }

    #[test]
    fn channel_count_mismatch_is_an_error() {
        let skel = chain2();
        let err = forward_kinematics(&skel, &LocalPose::new(vec![0.0; 5])).unwrap_err();
        assert!(matches!(err, FkError::ChannelCountMismatch { expected: 6, got: 5 }));
    }

    #[test]
    fn bone_lengths_pythagoras() {
        let skel = Skeleton::new(
            vec![
                Joint::new("root", None, Vec3::new(9.0, 9.0, 9.0), vec![]),
                Joint::new("child", Some(0), Vec3::new(3.0, 4.0, 0.0), vec![]),
            ],
            "cm",
        )
        .unwrap();
        let lengths = bone_lengths(&skel);
        assert_eq!(lengths.len(), 1); // root excluded
        assert_eq!(lengths[0].0, "child");
        assert_eq!(lengths[0].1, 5.0);
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let result = Skeleton::new(
            vec![
                Joint::new("a", None, Vec3::ZERO, vec![]),
                Joint::new("a", Some(0), Vec3::new(1.0, 0.0, 0.0), vec![]),
            ],
            "cm",
        );
        let Err(SkeletonError::Invalid(diags)) = result else {
            panic!("expected duplicate-name rejection")
        };
        assert!(diags.iter().any(|d| d.message.contains("duplicate") && d.message.contains("\"a\"")));
    }

    #[test]
    fn forward_parent_reference_is_rejected() {
        let joints = vec![
            Joint::new("a", None, Vec3::ZERO, vec![]),
            Joint::new("b", Some(2), Vec3::ZERO, vec![]),
            Joint::new("c", Some(0), Vec3::ZERO, vec![]),
        ];
        let diags = validate_joints(&joints);
        assert!(diags
            .iter()
            .any(|d| d.severity == Severity::Error && d.message.contains("not earlier")));
    }

    #[test]
    fn zero_length_bone_is_a_warning_only() {
        let skel = Skeleton::new(
            vec![
                Joint::new("root", None, Vec3::ZERO, vec![]),
                Joint::new("marker", Some(0), Vec3::ZERO, vec![]),
            ],
            "cm",
        )
        .expect("zero-length bones are permitted");
        let diags = skel.diagnostics();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].severity, Severity::Warning);
        assert!(diags[0].message.contains("marker"));
    }

    #[test]
    fn bone_length_conservation_under_rotation() {
        let skel = chain2();
        let lengths = bone_lengths(&skel);
        let mut pose = LocalPose::rest(&skel);
        let mut rng = crate::rng::StreamRng::from_key(0xb04e);
        for _ in 0..100 {
            for v in pose.values_mut() {
                *v = rng.uniform_in(-180.0, 180.0);
            }
            let world = forward_kinematics(&skel, &pose).unwrap();
            let d = (world.positions[1] - world.positions[0]).length();
            assert_relative_eq!(d, lengths[0].1, max_relative = 1e-6);
        }
    }

    #[test]
    fn root_rotation_equivariance() {
        // Pre-rotating the root rotates all world positions about the root.
        let skel = Skeleton::new(
            vec![
                Joint::new("root", None, Vec3::new(1.0, 2.0, 3.0), vec![Channel::Zrot, Channel::Xrot, Channel::Yrot]),
                Joint::new("b", Some(0), Vec3::new(0.0, 2.0, 0.0), vec![Channel::Xrot]),
                Joint::new("c", Some(1), Vec3::new(1.0, 0.5, 0.25), vec![Channel::Yrot, Channel::Zrot]),
            ],
            "cm",
        )
        .unwrap();
        let mut rng = crate::rng::StreamRng::from_key(42);
        for _ in 0..50 {
            let mut pose = LocalPose::rest(&skel);
            pose.set_channel(&skel, 1, Channel::Xrot, rng.uniform_in(-90.0, 90.0));
            pose.set_channel(&skel, 2, Channel::Yrot, rng.uniform_in(-90.0, 90.0));
            pose.set_channel(&skel, 2, Channel::Zrot, rng.uniform_in(-90.0, 90.0));
            let base = forward_kinematics(&skel, &pose).unwrap();

            let (az, ax, ay) = (
                rng.uniform_in(-180.0, 180.0),
                rng.uniform_in(-180.0, 180.0),
                rng.uniform_in(-180.0, 180.0),
            );
            pose.set_channel(&skel, 0, Channel::Zrot, az);
            pose.set_channel(&skel, 0, Channel::Xrot, ax);
            pose.set_channel(&skel, 0, Channel::Yrot, ay);
            let rotated = forward_kinematics(&skel, &pose).unwrap();

            let r = Mat3::rot_z_deg(az) * Mat3::rot_x_deg(ax) * Mat3::rot_y_deg(ay);
            let root = base.positions[0];
            for i in 0..skel.joint_count() {
                let expect = root + r.mul_vec(base.positions[i] - root);
                let got = rotated.positions[i];
                assert_relative_eq!(got.x, expect.x, epsilon = 1e-9);
                assert_relative_eq!(got.y, expect.y, epsilon = 1e-9);
                assert_relative_eq!(got.z, expect.z, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn orientations_stay_orthonormal() {
        let skel = chain2();
        let mut pose = LocalPose::rest(&skel);
        let mut rng = crate::rng::StreamRng::from_key(3);
        for _ in 0..50 {
            for v in pose.values_mut() {
                *v = rng.uniform_in(-360.0, 360.0);
            }
            let world = forward_kinematics(&skel, &pose).unwrap();
            for m in &world.orientations {
                assert!(m.orthonormality_error() < 1e-6);
            }
        }
    }
}
