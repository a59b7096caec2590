//! Bundled demo rig: a 37-joint quadruped skeleton (a cougar-like stand-in;
//! the joint names and hierarchy are this project's choice, not recovered
//! from any reference rig) plus a procedural walk clip for tests, previews
//! and quickstarts.

use crate::anim::AnimationClip;
use crate::math::Vec3;
use crate::skeleton::{Channel, Joint, LocalPose, Skeleton};

/// Joint count of the demo rig.
pub const DEMO_JOINT_COUNT: usize = 37;

const ROT3: [Channel; 3] = [Channel::Zrot, Channel::Xrot, Channel::Yrot];

struct RigBuilder {
    joints: Vec<Joint>,
}

impl RigBuilder {
    fn root(name: &str, offset: [f64; 3], channels: &[Channel]) -> RigBuilder {
        RigBuilder { joints: vec![Joint::new(name, None, Vec3::from(offset), channels.to_vec())] }
    }

    fn add(&mut self, name: &str, parent: &str, offset: [f64; 3], channels: &[Channel]) {
        let p = self
            .joints
            .iter()
            .position(|j| j.name == parent)
            .unwrap_or_else(|| panic!("unknown parent {parent}"));
        self.joints.push(Joint::new(name, Some(p), Vec3::from(offset), channels.to_vec()));
    }

    fn leg(&mut self, prefix: &str, attach: &str, segments: &[(&str, [f64; 3])]) {
        let mut parent = attach.to_string();
        for (i, (part, offset)) in segments.iter().enumerate() {
            let name = format!("{prefix}_{part}");
            let channels: &[Channel] = if i + 1 == segments.len() { &[] } else { &ROT3 };
            self.add(&name, &parent, *offset, channels);
            parent = name;
        }
    }
}

/// The 37-joint demo quadruped. Lengths are centimeters; the animal faces
/// +X with its left side toward +Z. Leaf joints (nose, tail tip, toes) carry
/// no channels, so the rig round-trips through BVH End Sites.
pub fn demo_skeleton() -> Skeleton {
    let root_channels = [
        Channel::Xpos,
        Channel::Ypos,
        Channel::Zpos,
        Channel::Zrot,
        Channel::Xrot,
        Channel::Yrot,
    ];
    let mut rig = RigBuilder::root("hips", [0.0, 60.0, 0.0], &root_channels);

    rig.add("spine_01", "hips", [12.0, 2.0, 0.0], &ROT3);
    rig.add("spine_02", "spine_01", [12.0, 2.0, 0.0], &ROT3);
    rig.add("spine_03", "spine_02", [12.0, 1.0, 0.0], &ROT3);
    rig.add("chest", "spine_03", [12.0, 0.0, 0.0], &ROT3);
    rig.add("neck", "chest", [10.0, 4.0, 0.0], &ROT3);
    rig.add("head", "neck", [10.0, 6.0, 0.0], &ROT3);
    rig.add("head_end", "head", [13.0, -2.0, 0.0], &[]);

    rig.add("tail_01", "hips", [-10.0, 2.0, 0.0], &ROT3);
    rig.add("tail_02", "tail_01", [-9.0, -1.0, 0.0], &ROT3);
    rig.add("tail_03", "tail_02", [-9.0, -1.0, 0.0], &ROT3);
    rig.add("tail_04", "tail_03", [-9.0, -1.0, 0.0], &ROT3);
    rig.add("tail_05", "tail_04", [-9.0, -1.0, 0.0], &ROT3);
    rig.add("tail_06", "tail_05", [-9.0, -1.0, 0.0], &ROT3);
    rig.add("tail_06_end", "tail_06", [-8.0, -1.0, 0.0], &[]);

    for (prefix, side) in [("fl", 1.0), ("fr", -1.0)] {
        rig.leg(
            prefix,
            "chest",
            &[
                ("scapula", [2.0, 4.0, 9.0 * side]),
                ("upper_leg", [3.0, -12.0, 1.0 * side]),
                ("lower_leg", [1.0, -22.0, 0.0]),
                ("carpus", [0.0, -20.0, 0.0]),
                ("paw", [2.0, -9.0, 0.0]),
                ("paw_end", [6.0, -3.0, 0.0]),
            ],
        );
    }
    for (prefix, side) in [("hl", 1.0), ("hr", -1.0)] {
        rig.leg(
            prefix,
            "hips",
            &[
                ("upper_leg", [-4.0, -2.0, 8.0 * side]),
                ("lower_leg", [2.0, -20.0, 0.0]),
                ("tarsus", [-6.0, -18.0, 0.0]),
                ("paw", [2.0, -14.0, 0.0]),
                ("paw_end", [6.0, -3.0, 0.0]),
            ],
        );
    }

    Skeleton::new(rig.joints, "cm").expect("demo rig is valid")
}

/// Left/right joint index pairs of the demo rig, for flip augmentation.
pub fn demo_flip_pairs(skeleton: &Skeleton) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for joint in skeleton.joints() {
        if let Some(rest) = joint.name.strip_prefix("fl_").or_else(|| joint.name.strip_prefix("hl_")) {
            let left = &joint.name;
            let right = format!("{}r_{rest}", &left[..1]);
            if let (Some(l), Some(r)) = (skeleton.joint_index(left), skeleton.joint_index(&right)) {
                pairs.push((l, r));
            }
        }
    }
    pairs
}

/// A procedural walk: forward drift, vertical bob, alternating leg swings,
/// tail sway and small spine motion.
pub fn demo_clip(frame_count: usize, frame_time: f64) -> AnimationClip {
    let skeleton = demo_skeleton();
    let stride_hz = 1.4;
    let speed = 45.0; // cm/s

    let mut frames = Vec::with_capacity(frame_count);
    for i in 0..frame_count {
        let t = i as f64 * frame_time;
        let phase = std::f64::consts::TAU * stride_hz * t;
        let mut pose = LocalPose::rest(&skeleton);
        let mut set = |name: &str, ch: Channel, v: f64| {
            let idx = skeleton.joint_index(name).expect("demo joint");
            pose.set_channel(&skeleton, idx, ch, v);
        };

        set("hips", Channel::Xpos, speed * t);
        set("hips", Channel::Ypos, 2.0 * (2.0 * phase).sin());
        set("hips", Channel::Yrot, 2.5 * phase.sin());

        set("spine_01", Channel::Yrot, 2.0 * phase.sin());
        set("spine_02", Channel::Yrot, 1.5 * (phase + 0.4).sin());
        set("spine_03", Channel::Zrot, 1.5 * (2.0 * phase).sin());
        set("neck", Channel::Zrot, 4.0 * (2.0 * phase + 0.8).sin());
        set("head", Channel::Zrot, -3.0 * (2.0 * phase + 0.8).sin());

        // Lateral-sequence walk: each leg offset a quarter cycle.
        let legs = [("fl", 0.0), ("hr", 0.25), ("fr", 0.5), ("hl", 0.75)];
        for (prefix, offset) in legs {
            let p = phase + std::f64::consts::TAU * offset;
            set(&format!("{prefix}_upper_leg"), Channel::Zrot, 24.0 * p.sin());
            set(&format!("{prefix}_lower_leg"), Channel::Zrot, -14.0 * (p + 0.9).sin());
            let ankle = if prefix.starts_with('f') { "carpus" } else { "tarsus" };
            set(&format!("{prefix}_{ankle}"), Channel::Zrot, 10.0 * (p + 1.6).sin());
        }

        for (j, name) in ["tail_01", "tail_02", "tail_03", "tail_04", "tail_05", "tail_06"]
            .iter()
            .enumerate()
        {
            set(name, Channel::Yrot, 7.0 * (0.5 * phase + 0.5 * j as f64).sin());
            set(name, Channel::Zrot, 3.0 * (0.5 * phase + 0.7 * j as f64).cos());
        }

        frames.push(pose);
    }

    AnimationClip::new(skeleton, frame_time, frames).expect("demo clip is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::{forward_kinematics, validate_joints};

    #[test]
    fn demo_rig_has_37_joints_and_validates_clean() {
        let skel = demo_skeleton();
        assert_eq!(skel.joint_count(), DEMO_JOINT_COUNT);
        assert!(validate_joints(skel.joints()).is_empty());
    }

    #[test]
    fn flip_pairs_cover_both_leg_sets() {
        let skel = demo_skeleton();
        let pairs = demo_flip_pairs(&skel);
        assert_eq!(pairs.len(), 11);
        let spec = crate::augment::AugmentationSpec { flip_pairs: pairs, ..Default::default() };
        spec.validate(Some(skel.joint_count())).unwrap();
    }

    #[test]
    fn walk_clip_keeps_feet_near_the_ground() {
        let clip = demo_clip(48, 1.0 / 30.0);
        let skel = clip.skeleton();
        let paw = skel.joint_index("fl_paw_end").unwrap();
        for frame in clip.frames() {
            let world = forward_kinematics(skel, frame).unwrap();
            let y = world.positions[paw].y;
            assert!((-40.0..50.0).contains(&y), "paw drifted to y = {y}");
        }
    }

    #[test]
    fn walk_clip_moves_forward() {
        let clip = demo_clip(60, 1.0 / 30.0);
        let stats = crate::anim::clip_stats(&clip);
        assert!(stats.root_max.x > 80.0, "expected forward travel, got {:?}", stats.root_max);
    }
}
