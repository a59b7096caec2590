//! Deterministic CPU rendering: skeleton stick figures, background
//! compositing, grayscale conversion and PNG IO.
//!
//! The renderer draws bones as filled thick segments (round caps) and joints
//! as filled discs, back to front by view-space depth, onto a transparent
//! RGBA buffer. No anti-aliasing: identical inputs produce identical bytes.

use std::path::Path;

use thiserror::Error;

use crate::camera::{Camera, CameraError};
use crate::projection::project_joints;
use crate::skeleton::{Skeleton, WorldPose};

/// 8-bit RGBA raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("image must be at least 1x1 pixels, got {width}x{height}")]
    ZeroSize { width: u32, height: u32 },
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error("pose has {got} joints but the skeleton has {expected}")]
    JointCountMismatch { expected: usize, got: usize },
    #[error("failed to decode image: {0}")]
    Decode(#[from] image::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Image {
    /// Fully transparent image.
    pub fn new(width: u32, height: u32) -> Image {
        Image { width, height, pixels: vec![0; width as usize * height as usize * 4] }
    }

    /// Image filled with one RGBA color.
    pub fn filled(width: u32, height: u32, color: [u8; 4]) -> Image {
        let mut pixels = Vec::with_capacity(width as usize * height as usize * 4);
        for _ in 0..width as usize * height as usize {
            pixels.extend_from_slice(&color);
        }
        Image { width, height, pixels }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 4] {
        let i = (y as usize * self.width as usize + x as usize) * 4;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2], self.pixels[i + 3]]
    }

    pub fn put(&mut self, x: u32, y: u32, color: [u8; 4]) {
        let i = (y as usize * self.width as usize + x as usize) * 4;
        self.pixels[i..i + 4].copy_from_slice(&color);
    }

    /// Encodes as RGBA PNG.
    pub fn save_png(&self, path: &Path) -> Result<(), RenderError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let buf: image::RgbaImage =
            image::RgbaImage::from_raw(self.width, self.height, self.pixels.clone())
                .expect("pixel buffer length invariant");
        buf.save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    /// Encodes as RGBA PNG into a byte vector.
    pub fn encode_png(&self) -> Result<Vec<u8>, RenderError> {
        let buf: image::RgbaImage =
            image::RgbaImage::from_raw(self.width, self.height, self.pixels.clone())
                .expect("pixel buffer length invariant");
        let mut out = std::io::Cursor::new(Vec::new());
        buf.write_to(&mut out, image::ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    /// Decodes a PNG or JPEG file into RGBA.
    pub fn load(path: &Path) -> Result<Image, RenderError> {
        let img = image::open(path)?.to_rgba8();
        Ok(Image { width: img.width(), height: img.height(), pixels: img.into_raw() })
    }

    pub fn decode(bytes: &[u8]) -> Result<Image, RenderError> {
        let img = image::load_from_memory(bytes)?.to_rgba8();
        Ok(Image { width: img.width(), height: img.height(), pixels: img.into_raw() })
    }
}

/// Stroke parameters for the stick-figure renderer.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderStyle {
    /// Full bone stroke width in pixels.
    pub bone_thickness: f64,
    /// Joint disc radius in pixels.
    pub joint_radius: f64,
    pub bone_color: [u8; 4],
    pub joint_color: [u8; 4],
}

impl Default for RenderStyle {
    fn default() -> Self {
        RenderStyle {
            bone_thickness: 3.0,
            joint_radius: 4.0,
            bone_color: [226, 220, 206, 255],
            joint_color: [199, 90, 48, 255],
        }
    }
}

/// Fills every pixel whose center lies within `radius` of `(cx, cy)`.
pub fn draw_disc(img: &mut Image, cx: f64, cy: f64, radius: f64, color: [u8; 4]) {
    let x0 = (cx - radius).floor().max(0.0) as i64;
    let x1 = (cx + radius).ceil().min(f64::from(img.width) - 1.0) as i64;
    let y0 = (cy - radius).floor().max(0.0) as i64;
    let y1 = (cy + radius).ceil().min(f64::from(img.height) - 1.0) as i64;
    if x1 < x0 || y1 < y0 {
        return;
    }
    let r2 = radius * radius;
    for py in y0..=y1 {
        for px in x0..=x1 {
            let dx = px as f64 - cx;
            let dy = py as f64 - cy;
            if dx * dx + dy * dy <= r2 {
                img.put(px as u32, py as u32, color);
            }
        }
    }
}

/// Fills every pixel whose center lies within `thickness / 2` of the segment
/// (a capsule: thick line with round caps).
pub fn draw_thick_line(
    img: &mut Image,
    a: (f64, f64),
    b: (f64, f64),
    thickness: f64,
    color: [u8; 4],
) {
    let r = thickness / 2.0;
    if r <= 0.0 {
        return;
    }
    let x0 = (a.0.min(b.0) - r).floor().max(0.0) as i64;
    let x1 = (a.0.max(b.0) + r).ceil().min(f64::from(img.width) - 1.0) as i64;
    let y0 = (a.1.min(b.1) - r).floor().max(0.0) as i64;
    let y1 = (a.1.max(b.1) + r).ceil().min(f64::from(img.height) - 1.0) as i64;
    if x1 < x0 || y1 < y0 {
        return;
    }

    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let r2 = r * r;
    for py in y0..=y1 {
        for px in x0..=x1 {
            let (qx, qy) = (px as f64 - a.0, py as f64 - a.1);
            let t = if len2 == 0.0 { 0.0 } else { ((qx * dx + qy * dy) / len2).clamp(0.0, 1.0) };
            let ex = qx - t * dx;
            let ey = qy - t * dy;
            if ex * ex + ey * ey <= r2 {
                img.put(px as u32, py as u32, color);
            }
        }
    }
}

/// Renders the skeleton through the camera onto a transparent background.
///
/// Bones whose two endpoints are both visible are drawn back to front by
/// mean view-space depth, then visible joint discs on top, also back to
/// front. Bones or joints with out-of-frustum endpoints are skipped whole.
pub fn render_skeleton(
    skeleton: &Skeleton,
    world_pose: &WorldPose,
    camera: &Camera,
    style: &RenderStyle,
) -> Result<Image, RenderError> {
    if camera.intrinsics.image_width == 0 || camera.intrinsics.image_height == 0 {
        return Err(RenderError::ZeroSize {
            width: camera.intrinsics.image_width,
            height: camera.intrinsics.image_height,
        });
    }
    if world_pose.positions.len() != skeleton.joint_count() {
        return Err(RenderError::JointCountMismatch {
            expected: skeleton.joint_count(),
            got: world_pose.positions.len(),
        });
    }

    let (keypoints, views) = project_joints(world_pose, camera)?;
    let mut img = Image::new(camera.intrinsics.image_width, camera.intrinsics.image_height);

    // Bones: (child index, mean depth), both endpoints visible.
    let mut bones: Vec<(usize, usize, f64)> = Vec::new();
    for (i, joint) in skeleton.joints().iter().enumerate() {
        if let Some(p) = joint.parent {
            if keypoints[i].visible && keypoints[p].visible {
                bones.push((p, i, (views[i].z + views[p].z) / 2.0));
            }
        }
    }
    bones.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.1.cmp(&b.1)));
    for (p, c, _) in &bones {
        draw_thick_line(
            &mut img,
            (keypoints[*p].x, keypoints[*p].y),
            (keypoints[*c].x, keypoints[*c].y),
            style.bone_thickness,
            style.bone_color,
        );
    }

    let mut discs: Vec<(usize, f64)> = keypoints
        .iter()
        .enumerate()
        .filter(|(i, kp)| kp.visible && views[*i].z.is_finite())
        .map(|(i, _)| (i, views[i].z))
        .collect();
    discs.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    for (i, _) in &discs {
        draw_disc(&mut img, keypoints[*i].x, keypoints[*i].y, style.joint_radius, style.joint_color);
    }

    Ok(img)
}

/// Scales `background` to the foreground size (nearest neighbor) and blends
/// the foreground over it. The result is fully opaque.
pub fn composite(foreground: &Image, background: &Image) -> Image {
    let (w, h) = (foreground.width, foreground.height);
    let mut out = Image::new(w, h);
    for y in 0..h {
        let sy = ((u64::from(y) * 2 + 1) * u64::from(background.height) / (u64::from(h) * 2))
            .min(u64::from(background.height) - 1) as u32;
        for x in 0..w {
            let sx = ((u64::from(x) * 2 + 1) * u64::from(background.width) / (u64::from(w) * 2))
                .min(u64::from(background.width) - 1) as u32;
            let fg = foreground.get(x, y);
            let bg = background.get(sx, sy);
            let a = u32::from(fg[3]);
            let blend = |f: u8, b: u8| -> u8 {
                ((u32::from(f) * a + u32::from(b) * (255 - a) + 127) / 255) as u8
            };
            out.put(x, y, [blend(fg[0], bg[0]), blend(fg[1], bg[1]), blend(fg[2], bg[2]), 255]);
        }
    }
    out
}

/// ITU-R BT.601 luma: every channel becomes round(0.299 R + 0.587 G + 0.114 B);
/// alpha is preserved.
pub fn to_grayscale(image: &Image) -> Image {
    let mut out = image.clone();
    for i in (0..out.pixels.len()).step_by(4) {
        let luma = (0.299 * f64::from(out.pixels[i])
            + 0.587 * f64::from(out.pixels[i + 1])
            + 0.114 * f64::from(out.pixels[i + 2]))
        .round() as u8;
        out.pixels[i] = luma;
        out.pixels[i + 1] = luma;
        out.pixels[i + 2] = luma;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{CameraExtrinsics, CameraIntrinsics};
    use crate::math::Vec3;
    use crate::skeleton::{forward_kinematics, Joint, LocalPose};

    fn test_camera() -> Camera {
        Camera {
            id: "test".into(),
            extrinsics: CameraExtrinsics {
                eye: Vec3::new(0.0, 0.0, 50.0),
                focal_point: Vec3::ZERO,
                up: Vec3::new(0.0, 1.0, 0.0),
            },
            intrinsics: CameraIntrinsics::default(),
        }
    }

    fn one_joint_world(pos: Vec3) -> (Skeleton, WorldPose) {
        let skel = Skeleton::new(vec![Joint::new("only", None, pos, vec![])], "cm").unwrap();
        let world = forward_kinematics(&skel, &LocalPose::rest(&skel)).unwrap();
        (skel, world)
    }

    #[test]
    fn all_joints_behind_camera_renders_nothing() {
        let (skel, world) = one_joint_world(Vec3::new(0.0, 0.0, 100.0)); // behind eye at z=50
        let img = render_skeleton(&skel, &world, &test_camera(), &RenderStyle::default()).unwrap();
        assert!(img.pixels().iter().all(|b| *b == 0));
    }

    #[test]
    fn visible_joint_marks_pixel_at_its_keypoint() {
        let (skel, world) = one_joint_world(Vec3::ZERO);
        let cam = test_camera();
        let style = RenderStyle { joint_radius: 3.0, ..Default::default() };
        let img = render_skeleton(&skel, &world, &cam, &style).unwrap();
        let (kps, _) = project_joints(&world, &cam).unwrap();
        assert!(kps[0].visible);
        let px = img.get(kps[0].x.round() as u32, kps[0].y.round() as u32);
        assert_eq!(px, style.joint_color);
    }

    #[test]
    fn rendering_is_deterministic() {
        let skel = Skeleton::new(
            vec![
                Joint::new("root", None, Vec3::ZERO, vec![]),
                Joint::new("arm", Some(0), Vec3::new(5.0, 3.0, 0.0), vec![]),
                Joint::new("tip", Some(1), Vec3::new(4.0, -2.0, 1.0), vec![]),
            ],
            "cm",
        )
        .unwrap();
        let world = forward_kinematics(&skel, &LocalPose::rest(&skel)).unwrap();
        let cam = test_camera();
        let a = render_skeleton(&skel, &world, &cam, &RenderStyle::default()).unwrap();
        let b = render_skeleton(&skel, &world, &cam, &RenderStyle::default()).unwrap();
        assert_eq!(a.pixels(), b.pixels());
    }

    #[test]
    fn composite_transparent_foreground_is_scaled_background() {
        let fg = Image::new(4, 4);
        let bg = Image::filled(2, 2, [10, 20, 30, 255]);
        let out = composite(&fg, &bg);
        for y in 0..4 {
            for x in 0..4 {
                assert_eq!(out.get(x, y), [10, 20, 30, 255]);
            }
        }
    }

    #[test]
    fn composite_opaque_foreground_wins() {
        let fg = Image::filled(3, 2, [200, 100, 50, 255]);
        let bg = Image::filled(8, 8, [1, 2, 3, 255]);
        let out = composite(&fg, &bg);
        assert_eq!(out.get(1, 1), [200, 100, 50, 255]);
    }

    #[test]
    fn composite_half_alpha_blends() {
        let fg = Image::filled(1, 1, [255, 0, 0, 128]);
        let bg = Image::filled(1, 1, [0, 0, 0, 255]);
        let out = composite(&fg, &bg);
        let px = out.get(0, 0);
        assert!((i32::from(px[0]) - 128).abs() <= 1, "got {px:?}");
        assert_eq!(px[1], 0);
        assert_eq!(px[2], 0);
        assert_eq!(px[3], 255);
    }

    #[test]
    fn grayscale_formula_and_idempotence() {
        let img = Image::filled(2, 1, [255, 0, 0, 255]);
        let gray = to_grayscale(&img);
        assert_eq!(gray.get(0, 0), [76, 76, 76, 255]);

        let white = to_grayscale(&Image::filled(1, 1, [255, 255, 255, 255]));
        assert_eq!(white.get(0, 0), [255, 255, 255, 255]);

        let twice = to_grayscale(&gray);
        assert_eq!(twice.pixels(), gray.pixels());
    }

    #[test]
    fn grayscale_preserves_alpha() {
        let img = Image::filled(1, 1, [10, 200, 40, 77]);
        assert_eq!(to_grayscale(&img).get(0, 0)[3], 77);
    }

    #[test]
    fn png_round_trip() {
        let mut img = Image::new(5, 3);
        img.put(2, 1, [9, 8, 7, 255]);
        let bytes = img.encode_png().unwrap();
        let back = Image::decode(&bytes).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn disc_centroid_matches_center() {
        let mut img = Image::new(64, 64);
        draw_disc(&mut img, 31.25, 40.75, 4.0, [255, 255, 255, 255]);
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0);
        for y in 0..64 {
            for x in 0..64 {
                if img.get(x, y)[3] != 0 {
                    sx += f64::from(x);
                    sy += f64::from(y);
                    n += 1;
                }
            }
        }
        assert!(n > 0);
        let (cx, cy) = (sx / f64::from(n), sy / f64::from(n));
        assert!((cx - 31.25).abs() < 0.5, "centroid x {cx}");
        assert!((cy - 40.75).abs() < 0.5, "centroid y {cy}");
    }
}
