//! Deterministic 3D math: vectors, unit-quaternion rotations, scaled poses,
//! frame composition and angular visibility tests.
//!
//! World convention: right-handed, `+Y` up, `-Z` forward and `+X` right for
//! the identity orientation. Lengths are meters. Angles are radians inside
//! this module except where a function name says `_deg`.
//!
//! Headings are measured clockwise seen from above, starting at `-Z`, so a
//! positive heading turns to the right. The same sign convention is used for
//! panel bearings and waypoint yaw in scenario files.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for geometric equality checks.
pub const EPS_EQ: f64 = 1e-9;
/// Distances below this are treated as coincident points.
pub const EPS_DEGENERATE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("target coincides with the viewer position")]
    DegenerateTarget,
    #[error("quaternion norm {0} is not within 1e-6 of 1")]
    NonUnitQuaternion(f64),
    #[error("scale components must be strictly positive, got {0}")]
    NonPositiveScale(Vec3),
    #[error("non-finite component in {0}")]
    NonFinite(&'static str),
    #[error("invalid field of view: diagonal {diagonal_deg} deg, aspect {aspect_ratio}")]
    InvalidFov { diagonal_deg: f64, aspect_ratio: f64 },
    #[error("direction vector has zero length")]
    ZeroDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const ONE: Vec3 = Vec3::new(1.0, 1.0, 1.0);
    pub const UP: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const FORWARD: Vec3 = Vec3::new(0.0, 0.0, -1.0);
    pub const RIGHT: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    /// Local `+Z`; the side of a panel that faces its viewer.
    pub const BACK: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn splat(v: f64) -> Self {
        Self::new(v, v, v)
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

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Unit vector in the same direction, or `None` for (near) zero vectors.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > EPS_DEGENERATE).then(|| self * (1.0 / n))
    }

    /// Component-wise product.
    pub fn hadamard(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    /// Projection onto the horizontal (XZ) plane.
    pub fn horizontal(self) -> Vec3 {
        Vec3::new(self.x, 0.0, self.z)
    }

    pub fn with_y(self, y: f64) -> Vec3 {
        Vec3::new(self.x, y, self.z)
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn horizontal_distance(self, o: Vec3) -> f64 {
        (self - o).horizontal().norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn max_abs_diff(self, o: Vec3) -> f64 {
        (self.x - o.x).abs().max((self.y - o.y).abs()).max((self.z - o.z).abs())
    }

    pub fn approx_eq(self, o: Vec3, tol: f64) -> bool {
        self.max_abs_diff(o) <= tol
    }

    /// Angle in radians between two non-zero vectors, computed with `atan2`
    /// so it stays accurate near 0 and pi.
    pub fn angle_to(self, o: Vec3) -> f64 {
        self.cross(o).norm().atan2(self.dot(o))
    }

    /// Heading of the horizontal projection (clockwise from `-Z`), radians.
    pub fn heading(self) -> f64 {
        self.x.atan2(-self.z)
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

impl TryFrom<[f64; 3]> for Vec3 {
    type Error = GeometryError;

    fn try_from(a: [f64; 3]) -> Result<Self, Self::Error> {
        let v = Vec3::new(a[0], a[1], a[2]);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(GeometryError::NonFinite("vector"))
        }
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Unit quaternion `(w, x, y, z)`.
///
/// Equality treats `q` and `-q` as the same rotation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rotation {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Rotation {
    pub const IDENTITY: Rotation = Rotation {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Builds a rotation from raw quaternion components.
    ///
    /// Inputs whose norm is within 1e-6 of one are accepted and normalized;
    /// inputs already within 1e-12 are kept bit-for-bit so that values
    /// survive a text round trip unchanged.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        if !(w.is_finite() && x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(GeometryError::NonFinite("quaternion"));
        }
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if (n - 1.0).abs() > 1e-6 {
            return Err(GeometryError::NonUnitQuaternion(n));
        }
        let q = Rotation { w, x, y, z };
        Ok(if (n - 1.0).abs() > 1e-12 { q.scaled(1.0 / n) } else { q })
    }

    fn scaled(self, s: f64) -> Self {
        Rotation {
            w: self.w * s,
            x: self.x * s,
            y: self.y * s,
            z: self.z * s,
        }
    }

    fn renormalized(self) -> Self {
        let n = self.norm();
        self.scaled(1.0 / n)
    }

    /// Rotation of `angle` radians about `axis` (right-hand rule).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Self, GeometryError> {
        let a = axis.normalized().ok_or(GeometryError::ZeroDirection)?;
        let (s, c) = (angle * 0.5).sin_cos();
        Ok(Rotation {
            w: c,
            x: a.x * s,
            y: a.y * s,
            z: a.z * s,
        }
        .renormalized())
    }

    /// Yaw-only rotation for a heading (radians, clockwise from above).
    pub fn from_heading(heading: f64) -> Self {
        let (s, c) = (-heading * 0.5).sin_cos();
        Rotation {
            w: c,
            x: 0.0,
            y: s,
            z: 0.0,
        }
    }

    pub fn from_heading_deg(heading_deg: f64) -> Self {
        Self::from_heading(heading_deg.to_radians())
    }

    /// Heading then pitch (positive looks up); no roll.
    pub fn from_heading_pitch(heading: f64, pitch: f64) -> Self {
        let (s, c) = (pitch * 0.5).sin_cos();
        let pitch_q = Rotation {
            w: c,
            x: s,
            y: 0.0,
            z: 0.0,
        };
        (Self::from_heading(heading) * pitch_q).renormalized()
    }

    /// Upright orientation whose forward axis points along `dir`.
    pub fn looking_along(dir: Vec3) -> Result<Self, GeometryError> {
        let d = dir.normalized().ok_or(GeometryError::ZeroDirection)?;
        let pitch = d.y.clamp(-1.0, 1.0).asin();
        let heading = if d.horizontal().norm() > EPS_DEGENERATE {
            d.heading()
        } else {
            0.0
        };
        Ok(Self::from_heading_pitch(heading, pitch))
    }

    pub fn components(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn inverse(self) -> Self {
        Rotation {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        // v' = v + 2w(u x v) + 2 u x (u x v)
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }

    pub fn forward(self) -> Vec3 {
        self.rotate(Vec3::FORWARD)
    }

    pub fn right(self) -> Vec3 {
        self.rotate(Vec3::RIGHT)
    }

    pub fn up(self) -> Vec3 {
        self.rotate(Vec3::UP)
    }

    /// Row-major 3x3 rotation matrix.
    pub fn to_matrix(self) -> [[f64; 3]; 3] {
        let Rotation { w, x, y, z } = self;
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }

    /// Inverse of [`Rotation::to_matrix`] (Shepperd's method).
    pub fn from_matrix(m: [[f64; 3]; 3]) -> Self {
        let trace = m[0][0] + m[1][1] + m[2][2];
        let q = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            Rotation {
                w: 0.25 * s,
                x: (m[2][1] - m[1][2]) / s,
                y: (m[0][2] - m[2][0]) / s,
                z: (m[1][0] - m[0][1]) / s,
            }
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            Rotation {
                w: (m[2][1] - m[1][2]) / s,
                x: 0.25 * s,
                y: (m[0][1] + m[1][0]) / s,
                z: (m[0][2] + m[2][0]) / s,
            }
        } else if m[1][1] > m[2][2] {
            let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
            Rotation {
                w: (m[0][2] - m[2][0]) / s,
                x: (m[0][1] + m[1][0]) / s,
                y: 0.25 * s,
                z: (m[1][2] + m[2][1]) / s,
            }
        } else {
            let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
            Rotation {
                w: (m[1][0] - m[0][1]) / s,
                x: (m[0][2] + m[2][0]) / s,
                y: (m[1][2] + m[2][1]) / s,
                z: 0.25 * s,
            }
        };
        q.renormalized()
    }

    /// Largest component difference, taking the closer of `q` and `-q`.
    pub fn max_abs_diff(self, o: Rotation) -> f64 {
        let a = self.components();
        let b = o.components();
        let same = (0..4).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max);
        let flipped = (0..4).map(|i| (a[i] + b[i]).abs()).fold(0.0, f64::max);
        same.min(flipped)
    }

    pub fn approx_eq(self, o: Rotation, tol: f64) -> bool {
        self.max_abs_diff(o) <= tol
    }

    /// Angle of the relative rotation between `self` and `o`, radians.
    pub fn angle_to(self, o: Rotation) -> f64 {
        let d = (self.inverse() * o).components();
        let v = (d[1] * d[1] + d[2] * d[2] + d[3] * d[3]).sqrt();
        2.0 * v.atan2(d[0].abs())
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl PartialEq for Rotation {
    fn eq(&self, o: &Rotation) -> bool {
        let a = self.components();
        let b = o.components();
        a == b || a == [-b[0], -b[1], -b[2], -b[3]]
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    /// Hamilton product: `(a * b).rotate(v) == a.rotate(b.rotate(v))`.
    fn mul(self, b: Rotation) -> Rotation {
        let a = self;
        Rotation {
            w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        }
        .renormalized()
    }
}

impl TryFrom<[f64; 4]> for Rotation {
    type Error = GeometryError;

    fn try_from(q: [f64; 4]) -> Result<Self, Self::Error> {
        Rotation::from_quaternion(q[0], q[1], q[2], q[3])
    }
}

impl From<Rotation> for [f64; 4] {
    fn from(r: Rotation) -> Self {
        r.components()
    }
}

/// Position, orientation and per-axis scale of an entity in some frame.
///
/// Scale multiplies an object's size; it does not stretch the offsets of
/// children, which keeps [`compose`] associative for non-uniform scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPose")]
pub struct Pose {
    pub position: Vec3,
    #[serde(default)]
    pub orientation: Rotation,
    #[serde(default = "unit_scale")]
    pub scale: Vec3,
}

fn unit_scale() -> Vec3 {
    Vec3::ONE
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPose {
    position: Vec3,
    #[serde(default)]
    orientation: Rotation,
    #[serde(default = "unit_scale")]
    scale: Vec3,
}

impl TryFrom<RawPose> for Pose {
    type Error = GeometryError;

    fn try_from(raw: RawPose) -> Result<Self, Self::Error> {
        Pose::new(raw.position, raw.orientation, raw.scale)
    }
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        position: Vec3::ZERO,
        orientation: Rotation::IDENTITY,
        scale: Vec3::ONE,
    };

    pub fn new(position: Vec3, orientation: Rotation, scale: Vec3) -> Result<Self, GeometryError> {
        if !position.is_finite() {
            return Err(GeometryError::NonFinite("position"));
        }
        if !scale.is_finite() {
            return Err(GeometryError::NonFinite("scale"));
        }
        if scale.x <= 0.0 || scale.y <= 0.0 || scale.z <= 0.0 {
            return Err(GeometryError::NonPositiveScale(scale));
        }
        Ok(Pose {
            position,
            orientation,
            scale,
        })
    }

    pub fn from_position(position: Vec3) -> Self {
        Pose {
            position,
            ..Pose::IDENTITY
        }
    }

    pub fn translation(x: f64, y: f64, z: f64) -> Self {
        Self::from_position(Vec3::new(x, y, z))
    }

    pub fn from_parts(position: Vec3, orientation: Rotation) -> Self {
        Pose {
            position,
            orientation,
            scale: Vec3::ONE,
        }
    }

    pub fn with_scale(self, scale: Vec3) -> Result<Self, GeometryError> {
        Pose::new(self.position, self.orientation, scale)
    }

    /// `local` expressed in this pose's frame, mapped to the parent space.
    pub fn compose(&self, local: &Pose) -> Pose {
        Pose {
            position: self.position + self.orientation.rotate(local.position),
            orientation: self.orientation * local.orientation,
            scale: self.scale.hadamard(local.scale),
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.orientation.inverse();
        Pose {
            position: inv.rotate(-self.position),
            orientation: inv,
            scale: Vec3::new(1.0 / self.scale.x, 1.0 / self.scale.y, 1.0 / self.scale.z),
        }
    }

    /// This pose re-expressed in `frame`'s local coordinates.
    pub fn relative_to(&self, frame: &Pose) -> Pose {
        frame.inverse().compose(self)
    }

    pub fn transform_point(&self, p: Vec3) -> Vec3 {
        self.position + self.orientation.rotate(p)
    }

    pub fn forward(&self) -> Vec3 {
        self.orientation.forward()
    }

    pub fn approx_eq(&self, o: &Pose, tol: f64) -> bool {
        self.max_abs_diff(o) <= tol
    }

    /// Largest component difference over position, orientation and scale.
    pub fn max_abs_diff(&self, o: &Pose) -> f64 {
        self.position
            .max_abs_diff(o.position)
            .max(self.orientation.max_abs_diff(o.orientation))
            .max(self.scale.max_abs_diff(o.scale))
    }
}

impl Default for Pose {
    fn default() -> Self {
        Pose::IDENTITY
    }
}

/// `local` expressed in `parent`'s frame, mapped to world.
pub fn compose(parent: &Pose, local: &Pose) -> Pose {
    parent.compose(local)
}

/// Point at distance `r` with polar angle `theta` measured from `+Y` and
/// azimuth `phi` measured from forward (`-Z`) toward right (`+X`).
pub fn cartesian_from_spherical(r: f64, theta: f64, phi: f64) -> Vec3 {
    debug_assert!(r >= 0.0, "radius must be non-negative");
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vec3::new(r * st * sp, r * ct, -r * st * cp)
}

/// Head-mounted display field of view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFov")]
pub struct FovSpec {
    pub diagonal_deg: f64,
    pub aspect_ratio: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFov {
    diagonal_deg: f64,
    aspect_ratio: f64,
}

impl TryFrom<RawFov> for FovSpec {
    type Error = GeometryError;
    fn try_from(r: RawFov) -> Result<Self, Self::Error> {
        FovSpec::new(r.diagonal_deg, r.aspect_ratio)
    }
}

impl FovSpec {
    pub fn new(diagonal_deg: f64, aspect_ratio: f64) -> Result<Self, GeometryError> {
        let ok = diagonal_deg > 0.0 && diagonal_deg < 180.0 && aspect_ratio > 0.0;
        if !ok || !aspect_ratio.is_finite() {
            return Err(GeometryError::InvalidFov {
                diagonal_deg,
                aspect_ratio,
            });
        }
        Ok(FovSpec {
            diagonal_deg,
            aspect_ratio,
        })
    }

    /// HoloLens 2: 52 degree diagonal, 3:2 display.
    pub fn hololens2() -> Self {
        FovSpec {
            diagonal_deg: 52.0,
            aspect_ratio: 1.5,
        }
    }

    /// Half-angle of the visibility cone, degrees.
    pub fn half_angle_deg(&self) -> f64 {
        self.diagonal_deg / 2.0
    }
}

impl Default for FovSpec {
    fn default() -> Self {
        Self::hololens2()
    }
}

/// Angle in degrees between the head's forward axis and the direction to
/// `target`, in `[0, 180]`.
pub fn angular_deviation(head: &Pose, target: Vec3) -> Result<f64, GeometryError> {
    let to_target = target - head.position;
    if to_target.norm() <= EPS_DEGENERATE {
        return Err(GeometryError::DegenerateTarget);
    }
    Ok(head.forward().angle_to(to_target).to_degrees())
}

/// Cone visibility test: inside iff the deviation is at most half the
/// diagonal field of view.
pub fn in_fov(head: &Pose, target: Vec3, fov: &FovSpec) -> Result<bool, GeometryError> {
    Ok(angular_deviation(head, target)? <= fov.half_angle_deg())
}
