//! Circular angles, unit-circle encoding, view binning and rotations.
//!
//! All angles are radians internally. Degrees only appear at the file
//! boundary (see [`crate::io`]).

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("angle must be finite, got {0}")]
    NonFinite(f64),
    #[error("cannot recover a direction from the zero vector")]
    DegenerateDirection,
    #[error("number of views must be at least 1")]
    ZeroViews,
    #[error("matrix is not a proper rotation (orthonormality error {ortho:.3e}, det {det})")]
    NotARotation { ortho: f64, det: f64 },
}

/// An angle in canonical form, `[-π, π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);

    /// Wraps any finite value into `[-π, π)`.
    pub fn new(radians: f64) -> Result<Self, GeometryError> {
        wrap(radians)
    }

    pub fn from_degrees(degrees: f64) -> Result<Self, GeometryError> {
        wrap(degrees.to_radians())
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }

    /// `self + delta`, re-wrapped. `delta` must be finite.
    pub fn rotate(self, delta: f64) -> Result<Self, GeometryError> {
        wrap(self.0 + delta)
    }

    pub fn opposite(self) -> Self {
        // Both operands are canonical, so the sum is finite.
        wrap(self.0 + PI).expect("finite")
    }
}

impl TryFrom<f64> for Angle {
    type Error = GeometryError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        wrap(value)
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4} rad", self.0)
    }
}

/// Maps a finite real onto `[-π, π)`.
pub fn wrap(raw_radians: f64) -> Result<Angle, GeometryError> {
    if !raw_radians.is_finite() {
        return Err(GeometryError::NonFinite(raw_radians));
    }
    if (-PI..PI).contains(&raw_radians) {
        return Ok(Angle(raw_radians));
    }
    let mut r = (raw_radians + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to exactly TAU.
    if r >= PI {
        r -= TAU;
    }
    if r < -PI {
        r = -PI;
    }
    Ok(Angle(r))
}

/// A point in the plane used for the `(sin α, cos α)` angle encoding.
///
/// Encoded points are unit norm; raw regressor outputs need not be.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CirclePoint {
    pub s: f64,
    pub c: f64,
}

impl CirclePoint {
    pub fn new(s: f64, c: f64) -> Self {
        Self { s, c }
    }

    pub fn norm(self) -> f64 {
        self.s.hypot(self.c)
    }

    pub fn dot(self, other: CirclePoint) -> f64 {
        self.s * other.s + self.c * other.c
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(self.s * k, self.c * k)
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.s, self.c]
    }
}

/// `α ↦ (sin α, cos α)`.
pub fn encode(a: Angle) -> CirclePoint {
    let (s, c) = a.0.sin_cos();
    CirclePoint { s, c }
}

/// Inverse of [`encode`]; accepts unnormalized points.
pub fn decode(p: CirclePoint) -> Result<Angle, GeometryError> {
    if p.s == 0.0 && p.c == 0.0 {
        return Err(GeometryError::DegenerateDirection);
    }
    if !p.s.is_finite() || !p.c.is_finite() {
        return Err(GeometryError::NonFinite(if p.s.is_finite() { p.c } else { p.s }));
    }
    wrap(p.s.atan2(p.c))
}

/// Shortest arc length between two angles, in `[0, π]`.
pub fn angular_distance(a: Angle, b: Angle) -> f64 {
    let d = (a.0 - b.0).abs();
    if d > PI {
        TAU - d
    } else {
        d
    }
}

/// How bins are laid out around `origin_offset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinAlignment {
    /// Bin `i` is centered on `origin_offset + i·w`.
    #[default]
    Centered,
    /// Bin `i` starts at `origin_offset + i·w`.
    Edge,
}

/// Partition of the circle into `views` equal sectors.
///
/// Intervals are closed below and open above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewBinning {
    views: u32,
    origin_offset: Angle,
    alignment: BinAlignment,
}

impl ViewBinning {
    /// Centered bins with the first bin around azimuth zero.
    pub fn new(views: u32) -> Result<Self, GeometryError> {
        Self::with_offset(views, Angle::ZERO, BinAlignment::Centered)
    }

    pub fn with_offset(
        views: u32,
        origin_offset: Angle,
        alignment: BinAlignment,
    ) -> Result<Self, GeometryError> {
        if views == 0 {
            return Err(GeometryError::ZeroViews);
        }
        Ok(Self {
            views,
            origin_offset,
            alignment,
        })
    }

    pub fn views(&self) -> u32 {
        self.views
    }

    pub fn origin_offset(&self) -> Angle {
        self.origin_offset
    }

    pub fn alignment(&self) -> BinAlignment {
        self.alignment
    }

    pub fn bin_width(&self) -> f64 {
        TAU / f64::from(self.views)
    }

    /// Index of the bin containing `a`, in `[0, views)`.
    pub fn bin_of(&self, a: Angle) -> u32 {
        let w = self.bin_width();
        let shift = match self.alignment {
            BinAlignment::Centered => 0.5 * w,
            BinAlignment::Edge => 0.0,
        };
        let x = (a.0 - self.origin_offset.0 + shift).rem_euclid(TAU);
        let idx = (x / w).floor() as u32;
        idx.min(self.views - 1)
    }

    pub fn bin_center(&self, bin: u32) -> Angle {
        let w = self.bin_width();
        let start = match self.alignment {
            BinAlignment::Centered => 0.0,
            BinAlignment::Edge => 0.5 * w,
        };
        wrap(self.origin_offset.0 + start + f64::from(bin % self.views) * w).expect("finite")
    }

    /// Circular distance between two bin indices, in bins.
    pub fn bin_distance(&self, a: u32, b: u32) -> u32 {
        let d = (a % self.views).abs_diff(b % self.views);
        d.min(self.views - d)
    }
}

/// Azimuth, elevation and in-plane rotation of an object.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub azimuth: Angle,
    pub elevation: Angle,
    pub inplane: Angle,
}

impl Pose {
    pub fn new(azimuth: Angle, elevation: Angle, inplane: Angle) -> Self {
        Self {
            azimuth,
            elevation,
            inplane,
        }
    }

    pub fn from_azimuth(azimuth: Angle) -> Self {
        Self {
            azimuth,
            ..Self::default()
        }
    }

    pub fn angles(&self) -> [Angle; 3] {
        [self.azimuth, self.elevation, self.inplane]
    }
}

pub type Mat3 = [[f64; 3]; 3];

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

const ROTATION_TOLERANCE: f64 = 1e-9;

/// A proper rotation matrix (orthonormal, determinant +1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Self(IDENTITY)
    }

    /// Validates orthonormality and orientation within 1e-9.
    pub fn from_matrix(m: Mat3) -> Result<Self, GeometryError> {
        let mtm = mat_mul(&transpose(&m), &m);
        let mut ortho = 0.0_f64;
        for i in 0..3 {
            for j in 0..3 {
                ortho = ortho.max((mtm[i][j] - IDENTITY[i][j]).abs());
            }
        }
        let det = determinant(&m);
        if !(ortho <= ROTATION_TOLERANCE && (det - 1.0).abs() <= ROTATION_TOLERANCE) {
            return Err(GeometryError::NotARotation { ortho, det });
        }
        Ok(Self(m))
    }

    pub fn about_x(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    pub fn about_z(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    /// Rodrigues' formula. `axis` need not be normalized but must be nonzero.
    pub fn from_axis_angle(axis: [f64; 3], theta: f64) -> Result<Self, GeometryError> {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(GeometryError::DegenerateDirection);
        }
        let [x, y, z] = [axis[0] / n, axis[1] / n, axis[2] / n];
        let (s, c) = theta.sin_cos();
        let t = 1.0 - c;
        Ok(Self([
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ]))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(transpose(&self.0))
    }

    pub fn compose(&self, rhs: &Rotation) -> Self {
        Self(mat_mul(&self.0, &rhs.0))
    }
}

impl TryFrom<Mat3> for Rotation {
    type Error = GeometryError;

    fn try_from(m: Mat3) -> Result<Self, Self::Error> {
        Self::from_matrix(m)
    }
}

fn transpose(m: &Mat3) -> Mat3 {
    let mut t = [[0.0; 3]; 3];
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            t[j][i] = *v;
        }
    }
    t
}

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn determinant(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// `Rz(inplane) · Rx(-elevation) · Rz(-azimuth)`.
///
/// Ground truth and predictions must go through this same constructor for
/// [`geodesic_distance`] to be meaningful.
pub fn rotation_from_pose(p: &Pose) -> Rotation {
    Rotation::about_z(p.inplane.radians())
        .compose(&Rotation::about_x(-p.elevation.radians()))
        .compose(&Rotation::about_z(-p.azimuth.radians()))
}

/// Angle of the relative rotation `r2ᵀ r1`, in `[0, π]`.
///
/// Equal to `‖log(r2ᵀ r1)‖_F / √2`. The cosine comes from the trace and the
/// sine from the skew-symmetric part, so the result stays accurate near 0
/// and near π where a bare `acos` loses half its digits.
pub fn geodesic_distance(r1: &Rotation, r2: &Rotation) -> f64 {
    let rel = mat_mul(&transpose(&r2.0), &r1.0);
    let trace = rel[0][0] + rel[1][1] + rel[2][2];
    let cos = ((trace - 1.0) / 2.0).clamp(-1.0, 1.0);
    let vx = rel[2][1] - rel[1][2];
    let vy = rel[0][2] - rel[2][0];
    let vz = rel[1][0] - rel[0][1];
    let sin = (0.5 * (vx * vx + vy * vy + vz * vz).sqrt()).min(1.0);
    sin.atan2(cos)
}
