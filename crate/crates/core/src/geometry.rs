//! Pinhole cameras and rigid transforms.
//!
//! Camera frames follow the usual pinhole convention: +z points forward
//! along the optical axis, +x to the right and +y down. Pixel coordinates
//! are used verbatim (no half-pixel shift), so pixel `(u, v)` maps to the
//! ray through `K⁻¹ · (u, v, 1)ᵀ`.

use core::ops::{Add, Mul, Neg, Sub};

use crate::math::sqrt;
use crate::{Error, Result};

/// Tolerance for rotation orthonormality and determinant checks.
pub const ROTATION_TOLERANCE: f64 = 1e-6;

/// A point or direction in 3D, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    #[allow(missing_docs)]
    pub x: f64,
    #[allow(missing_docs)]
    pub y: f64,
    #[allow(missing_docs)]
    pub z: f64,
}

impl Vec3 {
    /// The origin.
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    #[allow(missing_docs)]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    #[allow(missing_docs)]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[allow(missing_docs)]
    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[allow(missing_docs)]
    pub fn norm(self) -> f64 {
        sqrt(self.dot(self))
    }

    /// Euclidean distance to `o`.
    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    /// Squared Euclidean distance to `o`.
    pub fn distance_squared(self, o: Vec3) -> f64 {
        let d = self - o;
        d.dot(d)
    }

    /// Components as an array, x first.
    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Component by axis index (0 = x, 1 = y, 2 = z).
    pub fn axis(self, i: usize) -> f64 {
        match i {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("axis index {i} out of range"),
        }
    }

    /// Largest absolute component difference to `o`.
    pub fn max_abs_diff(self, o: Vec3) -> f64 {
        let d = self - o;
        d.x.abs().max(d.y.abs()).max(d.z.abs())
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Row-major 3×3 matrix.
pub type Mat3 = [[f64; 3]; 3];

const IDENTITY3: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    Vec3::new(
        m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
        m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
        m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
    )
}

fn transpose(m: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[j][i];
        }
    }
    out
}

/// Determinant of a 3×3 matrix.
pub fn determinant(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Checks that `m` is a proper rotation: `mᵀm = I` and `det m = 1`, both
/// within [`ROTATION_TOLERANCE`].
pub fn is_rotation(m: &Mat3) -> bool {
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return false;
    }
    let mtm = mat_mul(&transpose(m), m);
    for i in 0..3 {
        for j in 0..3 {
            if (mtm[i][j] - IDENTITY3[i][j]).abs() > ROTATION_TOLERANCE {
                return false;
            }
        }
    }
    (determinant(m) - 1.0).abs() <= ROTATION_TOLERANCE
}

/// Pinhole intrinsics plus the image extent they apply to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    /// Horizontal focal length in pixels.
    pub fx: f64,
    /// Vertical focal length in pixels.
    pub fy: f64,
    /// Principal point column.
    pub cx: f64,
    /// Principal point row.
    pub cy: f64,
    /// Axis skew, `K[0][1]`; zero for nearly every real camera.
    pub skew: f64,
    /// Image width in pixels.
    pub width: u32,
    /// Image height in pixels.
    pub height: u32,
}

impl Intrinsics {
    /// Builds skew-free intrinsics, checking `fx, fy > 0` and a non-empty image.
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        Self::with_skew(fx, fy, cx, cy, 0.0, width, height)
    }

    #[allow(missing_docs, clippy::too_many_arguments)]
    pub fn with_skew(fx: f64, fy: f64, cx: f64, cy: f64, skew: f64, width: u32, height: u32) -> Result<Self> {
        let all_finite = [fx, fy, cx, cy, skew].iter().all(|v| v.is_finite());
        if !all_finite || fx <= 0.0 || fy <= 0.0 {
            return Err(Error::invalid(
                "intrinsics",
                alloc::format!("focal lengths must be finite and positive (fx={fx}, fy={fy})"),
            ));
        }
        if width == 0 || height == 0 {
            return Err(Error::invalid("intrinsics", "image must be at least 1x1"));
        }
        Ok(Intrinsics {
            fx,
            fy,
            cx,
            cy,
            skew,
            width,
            height,
        })
    }

    /// Builds intrinsics from a row-major 3×3 `K`.
    ///
    /// `K` must be upper triangular with `K[2][2] = 1`.
    pub fn from_matrix(k: &Mat3, width: u32, height: u32) -> Result<Self> {
        if k[1][0] != 0.0 || k[2][0] != 0.0 || k[2][1] != 0.0 || k[2][2] != 1.0 {
            return Err(Error::invalid(
                "intrinsics",
                "K must be upper triangular with K[2][2] = 1",
            ));
        }
        Self::with_skew(k[0][0], k[1][1], k[0][2], k[1][2], k[0][1], width, height)
    }

    /// The calibration matrix `K`.
    pub fn matrix(&self) -> Mat3 {
        [
            [self.fx, self.skew, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ]
    }

    /// Closed-form `K⁻¹`.
    pub fn inverse_matrix(&self) -> Mat3 {
        let (fx, fy, s) = (self.fx, self.fy, self.skew);
        [
            [1.0 / fx, -s / (fx * fy), (s * self.cy - self.cx * fy) / (fx * fy)],
            [0.0, 1.0 / fy, -self.cy / fy],
            [0.0, 0.0, 1.0],
        ]
    }

    /// Camera-frame ray `K⁻¹ · (u, v, 1)ᵀ`; its z component is exactly 1.
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        let y = (v - self.cy) / self.fy;
        let x = (u - self.cx - self.skew * y) / self.fx;
        Vec3::new(x, y, 1.0)
    }

    /// Whether `(u, v)` lies inside the image.
    pub fn contains_pixel(&self, u: u32, v: u32) -> bool {
        u < self.width && v < self.height
    }
}

/// A proper rigid motion `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Mat3,
    translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl RigidTransform {
    /// The identity motion.
    pub const IDENTITY: RigidTransform = RigidTransform {
        rotation: IDENTITY3,
        translation: Vec3::ZERO,
    };

    /// Builds a transform, rejecting rotations that are not orthonormal with
    /// determinant +1.
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self> {
        if !is_rotation(&rotation) {
            return Err(Error::invalid(
                "rigid transform",
                "rotation block is not orthonormal with determinant +1",
            ));
        }
        if ![translation.x, translation.y, translation.z].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("rigid transform", "translation is not finite"));
        }
        Ok(RigidTransform {
            rotation,
            translation,
        })
    }

    /// Pure translation.
    pub fn from_translation(t: Vec3) -> Self {
        RigidTransform {
            rotation: IDENTITY3,
            translation: t,
        }
    }

    /// Rotation of `angle` radians about unit-normalized `axis`, then translation.
    pub fn from_axis_angle(axis: Vec3, angle: f64, translation: Vec3) -> Self {
        let n = axis.norm();
        let (x, y, z) = if n > 0.0 {
            (axis.x / n, axis.y / n, axis.z / n)
        } else {
            (0.0, 0.0, 1.0)
        };
        let (s, c) = (libm::sin(angle), libm::cos(angle));
        let t = 1.0 - c;
        let rotation = [
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ];
        RigidTransform {
            rotation,
            translation,
        }
    }

    /// Parses a row-major 4×4 homogeneous matrix.
    ///
    /// The bottom row must be exactly `(0, 0, 0, 1)` and the upper-left block
    /// a proper rotation.
    pub fn from_row_major(m: &[f64; 16]) -> Result<Self> {
        if m[12] != 0.0 || m[13] != 0.0 || m[14] != 0.0 || m[15] != 1.0 {
            return Err(Error::invalid(
                "rigid transform",
                "bottom row must be (0, 0, 0, 1)",
            ));
        }
        let rotation = [[m[0], m[1], m[2]], [m[4], m[5], m[6]], [m[8], m[9], m[10]]];
        Self::new(rotation, Vec3::new(m[3], m[7], m[11]))
    }

    /// Row-major 4×4 homogeneous form; exact inverse of [`Self::from_row_major`].
    pub fn to_row_major(&self) -> [f64; 16] {
        let r = &self.rotation;
        let t = self.translation;
        [
            r[0][0], r[0][1], r[0][2], t.x, //
            r[1][0], r[1][1], r[1][2], t.y, //
            r[2][0], r[2][1], r[2][2], t.z, //
            0.0, 0.0, 0.0, 1.0,
        ]
    }

    #[allow(missing_docs)]
    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    #[allow(missing_docs)]
    pub fn translation(&self) -> Vec3 {
        self.translation
    }

    /// Applies the motion to a point.
    pub fn apply(&self, p: Vec3) -> Vec3 {
        mat_vec(&self.rotation, p) + self.translation
    }

    /// Rotates a direction (no translation).
    pub fn apply_vector(&self, v: Vec3) -> Vec3 {
        mat_vec(&self.rotation, v)
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: mat_mul(&self.rotation, &other.rotation),
            translation: self.apply(other.translation),
        }
    }

    /// The inverse motion `p ↦ Rᵀ(p − t)`.
    pub fn inverse(&self) -> RigidTransform {
        let rt = transpose(&self.rotation);
        RigidTransform {
            rotation: rt,
            translation: -mat_vec(&rt, self.translation),
        }
    }

    /// Largest absolute element difference between the 4×4 forms.
    pub fn max_abs_diff(&self, other: &RigidTransform) -> f64 {
        self.to_row_major()
            .iter()
            .zip(other.to_row_major().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Outcome of projecting a point into a camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    /// The point is in front of the camera. `(u, v)` may lie outside the image.
    Visible {
        #[allow(missing_docs)]
        u: f64,
        #[allow(missing_docs)]
        v: f64,
        /// Camera-frame z, in meters.
        depth: f64,
    },
    /// Camera-frame z is not positive.
    BehindCamera,
}

/// Unprojects pixel `(u, v)` at z-depth `depth` into the frame `camera_to_world` maps to.
///
/// The camera-frame point is `depth · K⁻¹ · (u, v, 1)ᵀ`, whose z equals
/// `depth` exactly.
pub fn unproject_pixel(
    intr: &Intrinsics,
    camera_to_world: &RigidTransform,
    u: u32,
    v: u32,
    depth: f64,
) -> Result<Vec3> {
    if !intr.contains_pixel(u, v) {
        return Err(Error::PixelOutOfBounds {
            u,
            v,
            width: intr.width,
            height: intr.height,
        });
    }
    if !(depth > 0.0) || !depth.is_finite() {
        return Err(Error::NonPositiveDepth(depth));
    }
    Ok(camera_to_world.apply(camera_point(intr, u, v, depth)))
}

/// Camera-frame point for a pixel and depth, without bounds checks.
#[inline]
pub(crate) fn camera_point(intr: &Intrinsics, u: u32, v: u32, depth: f64) -> Vec3 {
    let ray = intr.ray(u as f64, v as f64);
    Vec3::new(ray.x * depth, ray.y * depth, depth)
}

/// Projects a world point into the camera described by `camera_to_world`.
pub fn project_point(intr: &Intrinsics, camera_to_world: &RigidTransform, p: Vec3) -> Projection {
    let c = camera_to_world.inverse().apply(p);
    if !(c.z > 0.0) {
        return Projection::BehindCamera;
    }
    let x = c.x / c.z;
    let y = c.y / c.z;
    Projection::Visible {
        u: intr.fx * x + intr.skew * y + intr.cx,
        v: intr.fy * y + intr.cy,
        depth: c.z,
    }
}
