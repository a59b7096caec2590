//! Small fixed-size linear algebra: 3-vectors, 3x3 rotations, row-major 4x4
//! matrices and 2D affine transforms. Everything is `f64` and `Copy`.

use serde::{Deserialize, Serialize};

/// A 3-vector in dataset length units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn length(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        let len = self.length();
        Vec3::new(self.x / len, self.y / len, self.z / len)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl std::ops::Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Row-major 3x3 matrix, used for joint orientations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3(pub [f64; 9]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);

    /// Rotation about +X by `deg` degrees (right-handed).
    pub fn rot_x_deg(deg: f64) -> Mat3 {
        let (s, c) = deg.to_radians().sin_cos();
        Mat3([1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c])
    }

    /// Rotation about +Y by `deg` degrees (right-handed).
    pub fn rot_y_deg(deg: f64) -> Mat3 {
        let (s, c) = deg.to_radians().sin_cos();
        Mat3([c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c])
    }

    /// Rotation about +Z by `deg` degrees (right-handed).
    pub fn rot_z_deg(deg: f64) -> Mat3 {
        let (s, c) = deg.to_radians().sin_cos();
        Mat3([c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0])
    }

    pub fn mul_vec(self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z,
        )
    }

    pub fn transpose(self) -> Mat3 {
        let m = &self.0;
        Mat3([m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]])
    }

    /// Max absolute deviation of `self * self^T` from the identity.
    pub fn orthonormality_error(self) -> f64 {
        let p = self * self.transpose();
        let mut err: f64 = 0.0;
        for r in 0..3 {
            for c in 0..3 {
                let expect = if r == c { 1.0 } else { 0.0 };
                err = err.max((p.0[r * 3 + c] - expect).abs());
            }
        }
        err
    }
}

impl std::ops::Mul for Mat3 {
    type Output = Mat3;
    fn mul(self, o: Mat3) -> Mat3 {
        let a = &self.0;
        let b = &o.0;
        let mut out = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                out[r * 3 + c] =
                    a[r * 3] * b[c] + a[r * 3 + 1] * b[3 + c] + a[r * 3 + 2] * b[6 + c];
            }
        }
        Mat3(out)
    }
}

/// Row-major 4x4 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 16]", into = "[f64; 16]")]
pub struct Mat4(pub [f64; 16]);

impl Mat4 {
    pub const IDENTITY: Mat4 = Mat4([
        1.0, 0.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, 0.0, //
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0,
    ]);

    /// Builds [R | t] from a rotation block and translation column.
    pub fn from_rotation_translation(r: Mat3, t: Vec3) -> Mat4 {
        let m = &r.0;
        Mat4([
            m[0], m[1], m[2], t.x, //
            m[3], m[4], m[5], t.y, //
            m[6], m[7], m[8], t.z, //
            0.0, 0.0, 0.0, 1.0,
        ])
    }

    /// Multiplies the homogeneous column `[x y z w]`.
    pub fn mul_homogeneous(self, v: [f64; 4]) -> [f64; 4] {
        let m = &self.0;
        let mut out = [0.0; 4];
        for r in 0..4 {
            out[r] = m[r * 4] * v[0] + m[r * 4 + 1] * v[1] + m[r * 4 + 2] * v[2] + m[r * 4 + 3] * v[3];
        }
        out
    }

    /// Transforms a point (w = 1) and dehomogenizes.
    pub fn transform_point(self, p: Vec3) -> Vec3 {
        let h = self.mul_homogeneous([p.x, p.y, p.z, 1.0]);
        Vec3::new(h[0] / h[3], h[1] / h[3], h[2] / h[3])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Upper-left 3x3 block.
    pub fn rotation_block(&self) -> Mat3 {
        let m = &self.0;
        Mat3([m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]])
    }
}

impl std::ops::Mul for Mat4 {
    type Output = Mat4;
    fn mul(self, o: Mat4) -> Mat4 {
        let a = &self.0;
        let b = &o.0;
        let mut out = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += a[r * 4 + k] * b[k * 4 + c];
                }
                out[r * 4 + c] = acc;
            }
        }
        Mat4(out)
    }
}

impl From<[f64; 16]> for Mat4 {
    fn from(a: [f64; 16]) -> Self {
        Mat4(a)
    }
}

impl From<Mat4> for [f64; 16] {
    fn from(m: Mat4) -> Self {
        m.0
    }
}

/// 2D affine transform `[a b tx; c d ty]`, applied as a column-vector map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine2 {
    pub m: [f64; 6],
}

impl Affine2 {
    pub const IDENTITY: Affine2 = Affine2 { m: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0] };

    pub fn translation(tx: f64, ty: f64) -> Affine2 {
        Affine2 { m: [1.0, 0.0, tx, 0.0, 1.0, ty] }
    }

    pub fn scaling(s: f64) -> Affine2 {
        Affine2 { m: [s, 0.0, 0.0, 0.0, s, 0.0] }
    }

    /// Rotation by `deg` degrees in image coordinates (x right, y down).
    pub fn rotation_deg(deg: f64) -> Affine2 {
        let (s, c) = deg.to_radians().sin_cos();
        Affine2 { m: [c, -s, 0.0, s, c, 0.0] }
    }

    /// Horizontal mirror about the vertical line x = axis.
    pub fn flip_x(axis: f64) -> Affine2 {
        Affine2 { m: [-1.0, 0.0, 2.0 * axis, 0.0, 1.0, 0.0] }
    }

    /// `self` applied after `o` (standard composition `self * o`).
    pub fn compose(self, o: Affine2) -> Affine2 {
        let a = &self.m;
        let b = &o.m;
        Affine2 {
            m: [
                a[0] * b[0] + a[1] * b[3],
                a[0] * b[1] + a[1] * b[4],
                a[0] * b[2] + a[1] * b[5] + a[2],
                a[3] * b[0] + a[4] * b[3],
                a[3] * b[1] + a[4] * b[4],
                a[3] * b[2] + a[4] * b[5] + a[5],
            ],
        }
    }

    pub fn apply(self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.m;
        (m[0] * x + m[1] * y + m[2], m[3] * x + m[4] * y + m[5])
    }

    pub fn inverse(self) -> Affine2 {
        let m = &self.m;
        let det = m[0] * m[4] - m[1] * m[3];
        let ia = m[4] / det;
        let ib = -m[1] / det;
        let ic = -m[3] / det;
        let id = m[0] / det;
        Affine2 {
            m: [ia, ib, -(ia * m[2] + ib * m[5]), ic, id, -(ic * m[2] + id * m[5])],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cross_product_follows_right_hand_rule() {
        let x = Vec3::new(1.0, 0.0, 0.0);
        let y = Vec3::new(0.0, 1.0, 0.0);
        assert_eq!(x.cross(y), Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn rot_z_90_maps_y_to_negative_x() {
        let v = Mat3::rot_z_deg(90.0).mul_vec(Vec3::new(0.0, 1.0, 0.0));
        assert_relative_eq!(v.x, -1.0, epsilon = 1e-12);
        assert_relative_eq!(v.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(v.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rotations_are_orthonormal() {
        for deg in [-171.0, -30.0, 0.0, 12.5, 90.0, 359.0] {
            assert!(Mat3::rot_x_deg(deg).orthonormality_error() < 1e-14);
            assert!(Mat3::rot_y_deg(deg).orthonormality_error() < 1e-14);
            assert!(Mat3::rot_z_deg(deg).orthonormality_error() < 1e-14);
        }
    }

    #[test]
    fn mat4_mul_matches_block_composition() {
        let a = Mat4::from_rotation_translation(Mat3::rot_y_deg(40.0), Vec3::new(1.0, 2.0, 3.0));
        let b = Mat4::from_rotation_translation(Mat3::rot_x_deg(-25.0), Vec3::new(-4.0, 0.5, 9.0));
        let p = Vec3::new(0.3, -1.1, 2.7);
        let via_mul = (a * b).transform_point(p);
        let via_chain = a.transform_point(b.transform_point(p));
        assert_relative_eq!(via_mul.x, via_chain.x, epsilon = 1e-12);
        assert_relative_eq!(via_mul.y, via_chain.y, epsilon = 1e-12);
        assert_relative_eq!(via_mul.z, via_chain.z, epsilon = 1e-12);
    }

    #[test]
    fn affine_inverse_round_trips() {
        let a = Affine2::rotation_deg(33.0)
            .compose(Affine2::scaling(1.7))
            .compose(Affine2::translation(5.0, -2.0));
        let (x, y) = a.apply(12.0, 34.0);
        let (bx, by) = a.inverse().apply(x, y);
        assert_relative_eq!(bx, 12.0, epsilon = 1e-9);
        assert_relative_eq!(by, 34.0, epsilon = 1e-9);
    }

    #[test]
    fn flip_is_involution() {
        let f = Affine2::flip_x(319.5);
        let (x, y) = f.apply(10.0, 7.0);
        assert_eq!(x, 629.0);
        assert_eq!(y, 7.0);
        let (x2, _) = f.apply(x, y);
        assert_eq!(x2, 10.0);
    }
}
