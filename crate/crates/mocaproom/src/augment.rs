//! Keypoint-consistent augmentation: rotation, scaling, flipping, Gaussian
//! noise, color jitter, brightness and contrast.
//!
//! Geometric operations compose into a single affine map applied once to the
//! image (inverse-mapped, nearest neighbor) and exactly to every keypoint, so
//! labels never drift from pixels. All randomness comes from counter-based
//! streams keyed by sample identity; the applied parameters are recorded per
//! sample for audit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::Affine2;
use crate::projection::Keypoint2D;
use crate::render::Image;
use crate::rng::{SampleKey, StreamRng, STREAM_AUG_PARAMS};

/// Inclusive parameter range `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> Range {
        Range { lo, hi }
    }

    pub fn fixed(v: f64) -> Range {
        Range { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

impl From<[f64; 2]> for Range {
    fn from(a: [f64; 2]) -> Range {
        Range { lo: a[0], hi: a[1] }
    }
}

impl From<Range> for [f64; 2] {
    fn from(r: Range) -> [f64; 2] {
        [r.lo, r.hi]
    }
}

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("range {name} is inverted: [{lo}, {hi}]")]
    InvertedRange { name: &'static str, lo: f64, hi: f64 },
    #[error("scale range must be positive, got lo {0}")]
    NonPositiveScale(f64),
    #[error("flip probability must be in [0, 1], got {0}")]
    BadFlipProbability(f64),
    #[error("flip pair ({0}, {1}) is out of range for {2} joints")]
    FlipPairOutOfRange(usize, usize, usize),
    #[error("joint index {0} appears in more than one flip pair")]
    FlipPairOverlap(usize),
}

/// Parameter ranges for the augmentation suite. Defaults are artifact
/// choices; every field is configurable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentationSpec {
    pub rotation_deg: Range,
    pub scale: Range,
    pub flip_probability: f64,
    pub gaussian_noise_sigma: Range,
    pub brightness_delta: Range,
    pub contrast_factor: Range,
    pub hue_shift_deg: Range,
    pub saturation_factor: Range,
    pub grayscale: bool,
    /// (left joint index, right joint index) pairs swapped on horizontal flip.
    pub flip_pairs: Vec<(usize, usize)>,
}

impl Default for AugmentationSpec {
    fn default() -> Self {
        AugmentationSpec {
            rotation_deg: Range::new(-30.0, 30.0),
            scale: Range::new(0.75, 1.25),
            flip_probability: 0.5,
            gaussian_noise_sigma: Range::new(0.0, 8.0),
            brightness_delta: Range::new(-32.0, 32.0),
            contrast_factor: Range::new(0.8, 1.2),
            hue_shift_deg: Range::new(-18.0, 18.0),
            saturation_factor: Range::new(0.7, 1.3),
            grayscale: false,
            flip_pairs: Vec::new(),
        }
    }
}

impl AugmentationSpec {
    /// A spec that changes nothing; useful as a base for partial overrides.
    pub fn neutral() -> AugmentationSpec {
        AugmentationSpec {
            rotation_deg: Range::fixed(0.0),
            scale: Range::fixed(1.0),
            flip_probability: 0.0,
            gaussian_noise_sigma: Range::fixed(0.0),
            brightness_delta: Range::fixed(0.0),
            contrast_factor: Range::fixed(1.0),
            hue_shift_deg: Range::fixed(0.0),
            saturation_factor: Range::fixed(1.0),
            grayscale: false,
            flip_pairs: Vec::new(),
        }
    }

    /// Checks range ordering and, when the joint count is known, flip pairs.
    pub fn validate(&self, joint_count: Option<usize>) -> Result<(), AugmentError> {
        let ranges = [
            ("rotation_deg", self.rotation_deg),
            ("scale", self.scale),
            ("gaussian_noise_sigma", self.gaussian_noise_sigma),
            ("brightness_delta", self.brightness_delta),
            ("contrast_factor", self.contrast_factor),
            ("hue_shift_deg", self.hue_shift_deg),
            ("saturation_factor", self.saturation_factor),
        ];
        for (name, r) in ranges {
            if !(r.lo.is_finite() && r.hi.is_finite() && r.lo <= r.hi) {
                return Err(AugmentError::InvertedRange { name, lo: r.lo, hi: r.hi });
            }
        }
        if self.scale.lo <= 0.0 {
            return Err(AugmentError::NonPositiveScale(self.scale.lo));
        }
        if !(0.0..=1.0).contains(&self.flip_probability) {
            return Err(AugmentError::BadFlipProbability(self.flip_probability));
        }
        let mut seen = std::collections::HashSet::new();
        for (l, r) in &self.flip_pairs {
            if let Some(n) = joint_count {
                if *l >= n || *r >= n {
                    return Err(AugmentError::FlipPairOutOfRange(*l, *r, n));
                }
            }
            for idx in [l, r] {
                if !seen.insert(*idx) {
                    return Err(AugmentError::FlipPairOverlap(*idx));
                }
            }
        }
        Ok(())
    }
}

/// The parameter values actually drawn for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedAugmentation {
    pub rotation_deg: f64,
    pub scale: f64,
    pub flip: bool,
    pub noise_sigma: f64,
    pub brightness_delta: f64,
    pub contrast_factor: f64,
    pub hue_shift_deg: f64,
    pub saturation_factor: f64,
}

/// Draws one sample's parameters from the stream keyed by `(seed, key)`.
/// Identical inputs always yield identical draws.
pub fn sample_params(spec: &AugmentationSpec, seed: u64, key: SampleKey<'_>) -> AppliedAugmentation {
    let mut rng = StreamRng::for_sample(seed, key, STREAM_AUG_PARAMS);
    AppliedAugmentation {
        rotation_deg: rng.uniform_in(spec.rotation_deg.lo, spec.rotation_deg.hi),
        scale: rng.uniform_in(spec.scale.lo, spec.scale.hi),
        flip: rng.chance(spec.flip_probability),
        noise_sigma: rng.uniform_in(spec.gaussian_noise_sigma.lo, spec.gaussian_noise_sigma.hi),
        brightness_delta: rng.uniform_in(spec.brightness_delta.lo, spec.brightness_delta.hi),
        contrast_factor: rng.uniform_in(spec.contrast_factor.lo, spec.contrast_factor.hi),
        hue_shift_deg: rng.uniform_in(spec.hue_shift_deg.lo, spec.hue_shift_deg.hi),
        saturation_factor: rng.uniform_in(spec.saturation_factor.lo, spec.saturation_factor.hi),
    }
}

/// The single affine map for one draw: scale, then rotate (both about the
/// image center), then optionally flip about the vertical center line.
pub fn geometric_transform(params: &AppliedAugmentation, width: u32, height: u32) -> Affine2 {
    let cx = (f64::from(width) - 1.0) / 2.0;
    let cy = (f64::from(height) - 1.0) / 2.0;
    let to_center = Affine2::translation(-cx, -cy);
    let from_center = Affine2::translation(cx, cy);
    let scale = from_center.compose(Affine2::scaling(params.scale)).compose(to_center);
    let rotate = from_center.compose(Affine2::rotation_deg(params.rotation_deg)).compose(to_center);
    let mut a = rotate.compose(scale);
    if params.flip {
        a = Affine2::flip_x(cx).compose(a);
    }
    a
}

/// Applies the geometric part of a draw to an image and its keypoints.
///
/// The image is inverse-mapped with nearest-neighbor sampling (out-of-bounds
/// pixels become opaque black); keypoints go through the exact affine map.
/// On flip, left/right entries swap per `flip_pairs` and keypoints that land
/// outside the image become invisible.
pub fn apply_geometric(
    image: &Image,
    keypoints: &[Keypoint2D],
    params: &AppliedAugmentation,
    flip_pairs: &[(usize, usize)],
) -> (Image, Vec<Keypoint2D>) {
    let (w, h) = (image.width(), image.height());
    let a = geometric_transform(params, w, h);

    let identity = !params.flip && params.rotation_deg == 0.0 && params.scale == 1.0;
    let out_img = if identity {
        image.clone()
    } else {
        let inv = a.inverse();
        let mut out = Image::new(w, h);
        for y in 0..h {
            for x in 0..w {
                let (sx, sy) = inv.apply(f64::from(x), f64::from(y));
                let (rx, ry) = (sx.round(), sy.round());
                let color = if rx >= 0.0 && rx < f64::from(w) && ry >= 0.0 && ry < f64::from(h) {
                    image.get(rx as u32, ry as u32)
                } else {
                    [0, 0, 0, 255]
                };
                out.put(x, y, color);
            }
        }
        out
    };

    let mut out_kps: Vec<Keypoint2D> = keypoints
        .iter()
        .map(|kp| {
            let (x, y) = a.apply(kp.x, kp.y);
            let in_bounds =
                x >= 0.0 && x <= f64::from(w) - 1.0 && y >= 0.0 && y <= f64::from(h) - 1.0;
            Keypoint2D { x, y, visible: kp.visible && in_bounds }
        })
        .collect();
    if params.flip {
        for (l, r) in flip_pairs {
            out_kps.swap(*l, *r);
        }
    }
    (out_img, out_kps)
}

fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * (((g - b) / delta).rem_euclid(6.0))
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    (h, s, max)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let c = v * s;
    let hp = (h.rem_euclid(360.0)) / 60.0;
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    (r + m, g + m, b + m)
}

/// Applies the photometric part of a draw: contrast and brightness, then hue
/// and saturation jitter in HSV space, then additive Gaussian pixel noise.
/// Each step is skipped when its parameters are neutral, so a neutral draw
/// returns the image unchanged. Keypoints and dimensions are untouched.
pub fn apply_photometric(image: &Image, params: &AppliedAugmentation, rng: &mut StreamRng) -> Image {
    let mut out = image.clone();
    let (w, h) = (out.width(), out.height());

    let do_contrast = params.contrast_factor != 1.0 || params.brightness_delta != 0.0;
    let do_hsv = params.hue_shift_deg != 0.0 || params.saturation_factor != 1.0;
    let do_noise = params.noise_sigma > 0.0;
    if !(do_contrast || do_hsv || do_noise) {
        return out;
    }

    for y in 0..h {
        for x in 0..w {
            let mut px = out.get(x, y);
            if do_contrast {
                for c in &mut px[..3] {
                    let v = params.contrast_factor * (f64::from(*c) - 128.0)
                        + 128.0
                        + params.brightness_delta;
                    *c = v.round().clamp(0.0, 255.0) as u8;
                }
            }
            if do_hsv {
                let (hh, ss, vv) = rgb_to_hsv(
                    f64::from(px[0]) / 255.0,
                    f64::from(px[1]) / 255.0,
                    f64::from(px[2]) / 255.0,
                );
                let (r, g, b) = hsv_to_rgb(
                    hh + params.hue_shift_deg,
                    (ss * params.saturation_factor).clamp(0.0, 1.0),
                    vv,
                );
                px[0] = (r * 255.0).round().clamp(0.0, 255.0) as u8;
                px[1] = (g * 255.0).round().clamp(0.0, 255.0) as u8;
                px[2] = (b * 255.0).round().clamp(0.0, 255.0) as u8;
            }
            if do_noise {
                for c in &mut px[..3] {
                    let v = f64::from(*c) + rng.gaussian() * params.noise_sigma;
                    *c = v.round().clamp(0.0, 255.0) as u8;
                }
            }
            out.put(x, y, px);
        }
    }
    out
}
