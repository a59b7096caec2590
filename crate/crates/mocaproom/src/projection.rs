//! The per-joint coordinate chain: world → view → NDC → image pixels.
//!
//! Pixel convention: continuous coordinates with the origin at the top-left,
//! x rightward, y downward; NDC [−1, 1] spans pixel centers 0 … width−1, so
//! the image center of a 640×480 camera is (319.5, 239.5). A keypoint is
//! visible when its joint lies in front of the near plane and its pixel
//! falls inside the image bounds. Occlusion is not modeled.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::camera::{Camera, CameraError, CameraIntrinsics};
use crate::math::{Mat4, Vec3};
use crate::skeleton::WorldPose;

/// A joint's image-plane location plus frustum visibility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint2D {
    pub x: f64,
    pub y: f64,
    pub visible: bool,
}

impl Serialize for Keypoint2D {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        (self.x, self.y, if self.visible { 1u8 } else { 0u8 }).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Keypoint2D {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (x, y, v) = <(f64, f64, f64)>::deserialize(d)?;
        if v != 0.0 && v != 1.0 {
            return Err(D::Error::custom(format!("keypoint visibility must be 0 or 1, got {v}")));
        }
        Ok(Keypoint2D { x, y, visible: v != 0.0 })
    }
}

/// A joint position in view space (camera at origin, −Z forward).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointView3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Serialize for JointView3D {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        (self.x, self.y, self.z).serialize(s)
    }
}

impl<'de> Deserialize<'de> for JointView3D {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (x, y, z) = <(f64, f64, f64)>::deserialize(d)?;
        Ok(JointView3D { x, y, z })
    }
}

impl JointView3D {
    pub fn to_vec3(self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }
}

/// Applies the view matrix to each world point.
pub fn world_to_view(points: &[Vec3], view: &Mat4) -> Vec<JointView3D> {
    points
        .iter()
        .map(|p| {
            let v = view.transform_point(*p);
            JointView3D { x: v.x, y: v.y, z: v.z }
        })
        .collect()
}

/// Projects one view-space point to NDC. For points at or behind the eye
/// plane the divide uses |w| so coordinates keep their sign instead of
/// mirroring; such points are never visible.
pub fn view_to_ndc(p: &JointView3D, proj: &Mat4) -> [f64; 3] {
    let h = proj.mul_homogeneous([p.x, p.y, p.z, 1.0]);
    let w = h[3].abs().max(1e-12);
    [h[0] / w, h[1] / w, h[2] / w]
}

/// Projects one view-space point to image pixels with a visibility flag.
pub fn view_to_image(p: &JointView3D, proj: &Mat4, intrinsics: &CameraIntrinsics) -> Keypoint2D {
    let ndc = view_to_ndc(p, proj);
    let width = f64::from(intrinsics.image_width);
    let height = f64::from(intrinsics.image_height);
    let x = (ndc[0] + 1.0) / 2.0 * (width - 1.0);
    let y = (1.0 - ndc[1]) / 2.0 * (height - 1.0);
    let in_front = p.z < -intrinsics.near;
    let in_bounds = x >= 0.0 && x <= width - 1.0 && y >= 0.0 && y <= height - 1.0;
    Keypoint2D { x, y, visible: in_front && in_bounds }
}

/// Inverse of [`view_to_image`] given the view-space depth (z < 0).
pub fn image_to_view(x: f64, y: f64, view_z: f64, intrinsics: &CameraIntrinsics) -> JointView3D {
    let width = f64::from(intrinsics.image_width);
    let height = f64::from(intrinsics.image_height);
    let ndc_x = 2.0 * x / (width - 1.0) - 1.0;
    let ndc_y = 1.0 - 2.0 * y / (height - 1.0);
    let f = 1.0 / (intrinsics.vertical_fov_deg.to_radians() / 2.0).tan();
    JointView3D {
        x: ndc_x * -view_z * intrinsics.aspect() / f,
        y: ndc_y * -view_z / f,
        z: view_z,
    }
}

/// Runs the full chain for every joint of a pose through one camera.
///
/// Both output lists follow skeleton joint order and have exactly one entry
/// per joint.
pub fn project_joints(
    world_pose: &WorldPose,
    camera: &Camera,
) -> Result<(Vec<Keypoint2D>, Vec<JointView3D>), CameraError> {
    camera.intrinsics.validate()?;
    let view = camera.view_matrix()?;
    let proj = camera.projection_matrix();
    let joints_view = world_to_view(&world_pose.positions, &view);
    let keypoints = joints_view
        .iter()
        .map(|p| view_to_image(p, &proj, &camera.intrinsics))
        .collect();
    Ok((keypoints, joints_view))
}
