//! Pinhole cameras: look-at view matrices, perspective projection and the
//! multi-camera ring rig.
//!
//! Conventions, fixed across the whole pipeline:
//! - world frame is right-handed, Y-up;
//! - view space has the camera at the origin looking down −Z;
//! - NDC spans [−1, 1] on every axis, with depth −1 at the near plane and
//!   +1 at the far plane.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{Mat4, Vec3};

#[derive(Debug, Error)]
pub enum CameraError {
    #[error("degenerate extrinsics: eye and focal point coincide")]
    EyeAtFocalPoint,
    #[error("degenerate extrinsics: up vector is parallel to the viewing direction")]
    UpParallelToForward,
    #[error("degenerate extrinsics: {0} is not finite")]
    NonFinite(&'static str),
    #[error("vertical FOV must be in (0, 180) degrees, got {0}")]
    BadFov(f64),
    #[error("image dimensions must be at least 1x1 pixels, got {width}x{height}")]
    BadImageSize { width: u32, height: u32 },
    #[error("clip planes must satisfy 0 < near < far, got near {near}, far {far}")]
    BadClipPlanes { near: f64, far: f64 },
    #[error("ring rig radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("ring rig needs at least one camera")]
    EmptyRig,
}

/// Camera pose: position, look-at target and approximate up direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraExtrinsics {
    pub eye: Vec3,
    pub focal_point: Vec3,
    pub up: Vec3,
}

impl CameraExtrinsics {
    pub fn validate(&self) -> Result<(), CameraError> {
        if !(self.eye.is_finite() && self.focal_point.is_finite() && self.up.is_finite()) {
            return Err(CameraError::NonFinite("extrinsics"));
        }
        let forward = self.focal_point - self.eye;
        if forward.length() == 0.0 {
            return Err(CameraError::EyeAtFocalPoint);
        }
        if self.up.length() == 0.0 {
            return Err(CameraError::UpParallelToForward);
        }
        // sin of the angle between forward and up; reject below 1e-6 rad.
        let sin = forward.cross(self.up).length() / (forward.length() * self.up.length());
        if sin < 1e-6 {
            return Err(CameraError::UpParallelToForward);
        }
        Ok(())
    }
}

/// Lens and sensor parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub vertical_fov_deg: f64,
    pub image_width: u32,
    pub image_height: u32,
    pub near: f64,
    pub far: f64,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        CameraIntrinsics {
            vertical_fov_deg: 45.0,
            image_width: 640,
            image_height: 480,
            near: 0.1,
            far: 10_000.0,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<(), CameraError> {
        if !(self.vertical_fov_deg.is_finite() && self.vertical_fov_deg > 0.0 && self.vertical_fov_deg < 180.0) {
            return Err(CameraError::BadFov(self.vertical_fov_deg));
        }
        if self.image_width < 1 || self.image_height < 1 {
            return Err(CameraError::BadImageSize { width: self.image_width, height: self.image_height });
        }
        if !(self.near.is_finite() && self.far.is_finite() && 0.0 < self.near && self.near < self.far) {
            return Err(CameraError::BadClipPlanes { near: self.near, far: self.far });
        }
        Ok(())
    }

    pub fn aspect(&self) -> f64 {
        f64::from(self.image_width) / f64::from(self.image_height)
    }
}

/// A named camera: extrinsics plus intrinsics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub id: String,
    pub extrinsics: CameraExtrinsics,
    pub intrinsics: CameraIntrinsics,
}

impl Camera {
    pub fn validate(&self) -> Result<(), CameraError> {
        self.extrinsics.validate()?;
        self.intrinsics.validate()
    }

    pub fn view_matrix(&self) -> Result<Mat4, CameraError> {
        view_matrix(&self.extrinsics)
    }

    pub fn projection_matrix(&self) -> Mat4 {
        projection_matrix(&self.intrinsics)
    }
}

/// Right-handed look-at matrix: maps the eye to the view-space origin and the
/// viewing direction to −Z.
pub fn view_matrix(extrinsics: &CameraExtrinsics) -> Result<Mat4, CameraError> {
    extrinsics.validate()?;
    let forward = (extrinsics.focal_point - extrinsics.eye).normalized();
    let right = forward.cross(extrinsics.up).normalized();
    let true_up = right.cross(forward);
    let eye = extrinsics.eye;
    Ok(Mat4([
        right.x, right.y, right.z, -right.dot(eye), //
        true_up.x, true_up.y, true_up.z, -true_up.dot(eye), //
        -forward.x, -forward.y, -forward.z, forward.dot(eye), //
        0.0, 0.0, 0.0, 1.0,
    ]))
}

/// Perspective projection. After the divide, in-frustum points land in
/// NDC x, y ∈ [−1, 1] and depth ∈ [−1, 1] (near → −1, far → +1).
///
/// Intrinsics must be valid (see [`CameraIntrinsics::validate`]).
pub fn projection_matrix(intrinsics: &CameraIntrinsics) -> Mat4 {
    let f = 1.0 / (intrinsics.vertical_fov_deg.to_radians() / 2.0).tan();
    let aspect = intrinsics.aspect();
    let (near, far) = (intrinsics.near, intrinsics.far);
    Mat4([
        f / aspect, 0.0, 0.0, 0.0, //
        0.0, f, 0.0, 0.0, //
        0.0, 0.0, (far + near) / (near - far), 2.0 * far * near / (near - far), //
        0.0, 0.0, -1.0, 0.0,
    ])
}

/// Camera ids produced by [`build_ring_rig`]: `cam00`, `cam01`, ...
pub fn ring_camera_id(index: usize) -> String {
    format!("cam{index:02}")
}

/// Evenly spaced ring of cameras around `center`, all aimed at it.
///
/// Camera k sits at `center + (radius·cos θk, height, radius·sin θk)` with
/// θk = 2πk / count, up = +Y.
pub fn build_ring_rig(
    center: Vec3,
    radius: f64,
    height: f64,
    count: usize,
    intrinsics: &CameraIntrinsics,
) -> Result<Vec<Camera>, CameraError> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(CameraError::BadRadius(radius));
    }
    if count < 1 {
        return Err(CameraError::EmptyRig);
    }
    intrinsics.validate()?;

    let mut cameras = Vec::with_capacity(count);
    for k in 0..count {
        let theta = std::f64::consts::TAU * k as f64 / count as f64;
        let eye = center + Vec3::new(radius * theta.cos(), height, radius * theta.sin());
        let camera = Camera {
            id: ring_camera_id(k),
            extrinsics: CameraExtrinsics { eye, focal_point: center, up: Vec3::new(0.0, 1.0, 0.0) },
            intrinsics: intrinsics.clone(),
        };
        camera.extrinsics.validate()?;
        cameras.push(camera);
    }
    Ok(cameras)
}
