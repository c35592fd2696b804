//! Bloch sphere and Bloch circle geometry.
//!
//! States live on the unit sphere ([`Geometry::Full`]) or on the equator of
//! the sphere ([`Geometry::Planar`]). The planar circle is the xy-plane; its
//! normal is the z axis.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norm tolerance for [`BlochVector`].
pub const UNIT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    /// States on the equator of the Bloch sphere.
    Planar,
    /// States anywhere on the Bloch sphere.
    Full,
}

impl Geometry {
    /// Dimension of the ambient space the states span (2 or 3).
    pub fn dimension(self) -> usize {
        match self {
            Geometry::Planar => 2,
            Geometry::Full => 3,
        }
    }

    /// The canonical axes e1, e2 (and e3 for the full sphere).
    pub fn canonical_axes(self) -> Vec<BlochVector> {
        let all = [BlochVector::X, BlochVector::Y, BlochVector::Z];
        all[..self.dimension()].to_vec()
    }

    /// First canonical axis; used wherever a deterministic fallback is needed.
    pub fn fallback_axis(self) -> BlochVector {
        BlochVector::X
    }

    /// Projects a vector onto the subspace allowed by this geometry.
    pub fn project(self, v: Vec3) -> Vec3 {
        match self {
            Geometry::Planar => Vec3::new(v.x, v.y, 0.0),
            Geometry::Full => v,
        }
    }

    pub fn contains(self, v: &BlochVector) -> bool {
        match self {
            Geometry::Planar => v.0.z == 0.0,
            Geometry::Full => true,
        }
    }
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Geometry::Planar => "planar",
            Geometry::Full => "full",
        })
    }
}

impl std::str::FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "planar" | "2d" => Ok(Geometry::Planar),
            "full" | "3d" => Ok(Geometry::Full),
            other => Err(Error::validation(format!("unknown geometry `{other}`"))),
        }
    }
}

/// A plain real 3-vector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn component(self, i: usize) -> f64 {
        match i {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("component index {i} out of range"),
        }
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
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
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
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

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        Vec3::new(self * v.x, self * v.y, self * v.z)
    }
}

/// A unit vector on the Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(into = "[f64; 3]")]
pub struct BlochVector(Vec3);

impl BlochVector {
    pub const X: BlochVector = BlochVector(Vec3::new(1.0, 0.0, 0.0));
    pub const Y: BlochVector = BlochVector(Vec3::new(0.0, 1.0, 0.0));
    pub const Z: BlochVector = BlochVector(Vec3::new(0.0, 0.0, 1.0));

    /// Accepts a vector whose norm is already 1 within [`UNIT_TOLERANCE`].
    pub fn new(v: Vec3) -> Result<Self> {
        let norm = v.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::validation(format!(
                "vector {:?} is not a unit vector (norm {norm})",
                v.to_array()
            )));
        }
        Ok(BlochVector(v))
    }

    /// Normalizes `v`; `None` for the zero vector or non-finite input.
    pub fn normalize(v: Vec3) -> Option<Self> {
        let norm = v.norm();
        if norm > 0.0 && norm.is_finite() {
            Some(BlochVector((1.0 / norm) * v))
        } else {
            None
        }
    }

    /// Normalizes `v` after projecting it into `geometry`.
    pub fn normalize_in(geometry: Geometry, v: Vec3) -> Option<Self> {
        Self::normalize(geometry.project(v))
    }

    pub fn vec(self) -> Vec3 {
        self.0
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.0.dot(other)
    }
}

impl Neg for BlochVector {
    type Output = BlochVector;
    fn neg(self) -> BlochVector {
        BlochVector(-self.0)
    }
}

impl From<BlochVector> for [f64; 3] {
    fn from(v: BlochVector) -> Self {
        v.0.to_array()
    }
}

impl From<BlochVector> for Vec3 {
    fn from(v: BlochVector) -> Self {
        v.0
    }
}

impl<'de> Deserialize<'de> for BlochVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let a = <[f64; 3]>::deserialize(d)?;
        BlochVector::new(a.into()).map_err(serde::de::Error::custom)
    }
}

/// Unit vector from spherical angles.
///
/// Planar geometry ignores `polar` and places the vector on the equator at
/// the given azimuth.
pub fn angles_to_vector(geometry: Geometry, polar: f64, azimuth: f64) -> BlochVector {
    let v = match geometry {
        Geometry::Planar => Vec3::new(azimuth.cos(), azimuth.sin(), 0.0),
        Geometry::Full => {
            let (s, c) = polar.sin_cos();
            Vec3::new(s * azimuth.cos(), s * azimuth.sin(), c)
        }
    };
    // sin/cos round-off can leave the norm a few ulps from 1.
    BlochVector::normalize(v).expect("angles give a nonzero vector")
}

/// Inverse of [`angles_to_vector`]: `(polar, azimuth)` with polar in `[0, π]`
/// and azimuth in `[0, 2π)`. At the poles the azimuth is 0. Planar vectors
/// report polar `π/2`.
pub fn vector_to_angles(geometry: Geometry, v: BlochVector) -> (f64, f64) {
    let u = v.vec();
    let rho = u.x.hypot(u.y);
    let azimuth = if rho < 1e-15 {
        0.0
    } else {
        let a = u.y.atan2(u.x);
        if a < 0.0 {
            a + TAU
        } else {
            a
        }
    };
    let polar = match geometry {
        Geometry::Planar => PI / 2.0,
        Geometry::Full => rho.atan2(u.z),
    };
    (polar, azimuth)
}

/// A proper rotation of 3-space stored as an orthogonal matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    rows: [[f64; 3]; 3],
}

impl Rotation {
    pub const IDENTITY: Rotation = Rotation {
        rows: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    /// Rotation by `angle` about `axis` (Rodrigues formula).
    pub fn about_axis(axis: BlochVector, angle: f64) -> Self {
        let Vec3 { x, y, z } = axis.vec();
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        Rotation {
            rows: [
                [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
                [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
                [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
            ],
        }
    }

    /// Rotation about the z axis; maps the planar circle to itself.
    pub fn about_z(angle: f64) -> Self {
        Self::about_axis(BlochVector::Z, angle)
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        let r = &self.rows;
        Vec3::new(
            r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
        )
    }

    pub fn apply_unit(&self, v: BlochVector) -> BlochVector {
        BlochVector::normalize(self.apply(v.vec())).expect("rotation preserves norm")
    }

    pub fn then(&self, next: &Rotation) -> Rotation {
        let mut rows = [[0.0; 3]; 3];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| next.rows[i][k] * self.rows[k][j]).sum();
            }
        }
        Rotation { rows }
    }
}

/// Orthonormal pair spanning the plane orthogonal to `m`.
///
/// The first vector is built from the canonical axis least aligned with `m`,
/// so the frame is a deterministic function of `m`.
pub fn orthonormal_frame(m: BlochVector) -> (BlochVector, BlochVector) {
    let v = m.vec();
    let seed = [BlochVector::X, BlochVector::Y, BlochVector::Z]
        .into_iter()
        .min_by(|a, b| a.dot(v).abs().total_cmp(&b.dot(v).abs()))
        .expect("three axes");
    let u = BlochVector::normalize(seed.vec().cross(v)).expect("seed not parallel to m");
    let w = BlochVector::normalize(v.cross(u.vec())).expect("u orthogonal to m");
    (u, w)
}
