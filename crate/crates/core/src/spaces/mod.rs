//! Concrete symmetric spaces: round spheres `S^d` (`1 <= d <= 6`) and the
//! rotation group `SO(3)` with its bi-invariant metric.
//!
//! Points live in an ambient Euclidean embedding. Spheres use the unit
//! sphere in `R^{d+1}`; `SO(3)` uses row-major `3x3` rotation matrices in
//! `R^9`, with the metric scaled so that the geodesic distance between two
//! rotations is the angle of their relative rotation.

mod eigen;
mod isometry;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

pub use eigen::{eigen_data, eigenvalues, multiplicity_count};
pub use isometry::{haar_rotation, haar_sample, Isometry};

/// Largest sphere dimension shipped.
pub const MAX_SPHERE_DIM: usize = 6;

/// Tolerance for the on-manifold check of [`SpaceSpec::check_point`].
pub const POINT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SpaceId {
    /// The unit sphere `S^d`.
    Sphere(usize),
    /// The rotation group `SO(3)`.
    So3,
}

impl fmt::Display for SpaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceId::Sphere(d) => write!(f, "sphere{d}"),
            SpaceId::So3 => f.write_str("so3"),
        }
    }
}

impl FromStr for SpaceId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "so3" | "so(3)" => return Ok(SpaceId::So3),
            "circle" => return Ok(SpaceId::Sphere(1)),
            _ => {}
        }
        let digits = lower
            .strip_prefix("sphere")
            .or_else(|| lower.strip_prefix('s'))
            .ok_or_else(|| Error::UnsupportedSpace(s.to_string()))?;
        match digits.parse::<usize>() {
            Ok(d) if (1..=MAX_SPHERE_DIM).contains(&d) => Ok(SpaceId::Sphere(d)),
            _ => Err(Error::UnsupportedSpace(s.to_string())),
        }
    }
}

impl TryFrom<String> for SpaceId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SpaceId> for String {
    fn from(id: SpaceId) -> String {
        id.to_string()
    }
}

/// Optional replacements for the default space constants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstantOverrides {
    pub c_m: Option<f64>,
    pub v_m: Option<f64>,
    pub antipodal_dim: Option<usize>,
}

/// Immutable descriptor of a shipped space.
///
/// `c_m` defaults to 1.0 everywhere. The true constant is not known in
/// closed form, so every threshold derived from it is heuristic and can be
/// overridden. `v_m` is the reciprocal of the Riemannian volume, so that
/// `v_m * vol = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub id: SpaceId,
    pub dim_m: usize,
    pub antipodal_dim: usize,
    pub c_m: f64,
    pub v_m: f64,
    pub diameter: f64,
    pub injectivity_radius: f64,
    pub ambient_dim: usize,
}

/// Riemannian volume of the unit sphere `S^d`.
pub fn sphere_volume(d: usize) -> f64 {
    let half = (d as f64 + 1.0) / 2.0;
    2.0 * (half * PI.ln() - ln_gamma(half)).exp()
}

/// Volume of `SO(3)` when geodesic distance equals rotation angle
/// (half the volume of the radius-2 three-sphere).
pub const SO3_VOLUME: f64 = 8.0 * PI * PI;

pub fn make_space(id: SpaceId, overrides: &ConstantOverrides) -> Result<SpaceSpec> {
    let mut spec = match id {
        SpaceId::Sphere(d) if (1..=MAX_SPHERE_DIM).contains(&d) => SpaceSpec {
            id,
            dim_m: d,
            antipodal_dim: 0,
            c_m: 1.0,
            v_m: 1.0 / sphere_volume(d),
            diameter: PI,
            injectivity_radius: PI,
            ambient_dim: d + 1,
        },
        SpaceId::Sphere(_) => return Err(Error::UnsupportedSpace(id.to_string())),
        SpaceId::So3 => SpaceSpec {
            id,
            dim_m: 3,
            antipodal_dim: 0,
            c_m: 1.0,
            v_m: 1.0 / SO3_VOLUME,
            diameter: PI,
            injectivity_radius: PI,
            ambient_dim: 9,
        },
    };
    if let Some(c) = overrides.c_m {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "c_m",
                reason: format!("must be positive, got {c}"),
            });
        }
        spec.c_m = c;
    }
    if let Some(v) = overrides.v_m {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "v_m",
                reason: format!("must be positive, got {v}"),
            });
        }
        spec.v_m = v;
    }
    if let Some(a) = overrides.antipodal_dim {
        if a >= spec.dim_m {
            return Err(Error::InvalidParameter {
                name: "antipodal_dim",
                reason: format!("must be below the dimension {}, got {a}", spec.dim_m),
            });
        }
        spec.antipodal_dim = a;
    }
    Ok(spec)
}

/// A point of a space, stored by its ambient coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.coords
    }
}

impl SpaceSpec {
    pub fn is_so3(&self) -> bool {
        self.id == SpaceId::So3
    }

    /// The base point: the north pole `e_{d+1}` of a sphere, the identity of `SO(3)`.
    pub fn base_point(&self) -> Point {
        let mut coords = vec![0.0; self.ambient_dim];
        match self.id {
            SpaceId::Sphere(d) => coords[d] = 1.0,
            SpaceId::So3 => {
                coords[0] = 1.0;
                coords[4] = 1.0;
                coords[8] = 1.0;
            }
        }
        Point::new(coords)
    }

    /// Rejects coordinates of the wrong length or off the manifold.
    pub fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim,
                got: p.len(),
            });
        }
        let residual = self.manifold_residual(p);
        if residual > POINT_TOLERANCE * 10.0 || !residual.is_finite() {
            return Err(Error::Format(format!(
                "point is off the manifold (residual {residual:e})"
            )));
        }
        Ok(())
    }

    /// Unit-norm defect for spheres; orthogonality plus determinant defect for `SO(3)`.
    pub fn manifold_residual(&self, p: &[f64]) -> f64 {
        match self.id {
            SpaceId::Sphere(_) => (p.iter().map(|x| x * x).sum::<f64>() - 1.0).abs(),
            SpaceId::So3 => {
                let m = so3_matrix(p);
                let ortho = (m.transpose() * m - nalgebra::Matrix3::identity()).amax();
                ortho.max((m.determinant() - 1.0).abs())
            }
        }
    }

    /// Geodesic distance between two points given by ambient coordinates.
    ///
    /// Uses `2 atan2(|p - q|, |p + q|)` on spheres and the axis-angle form of
    /// the relative rotation on `SO(3)`; both stay accurate near 0 and near
    /// the diameter.
    #[inline]
    pub fn distance(&self, p: &[f64], q: &[f64]) -> f64 {
        match self.id {
            SpaceId::Sphere(_) => {
                let (mut diff, mut sum) = (0.0, 0.0);
                for (a, b) in p.iter().zip(q) {
                    diff += (a - b) * (a - b);
                    sum += (a + b) * (a + b);
                }
                2.0 * diff.sqrt().atan2(sum.sqrt())
            }
            SpaceId::So3 => {
                // relative rotation r = p^T q, with p, q row-major
                let mut r = [0.0; 9];
                for i in 0..3 {
                    for j in 0..3 {
                        r[3 * i + j] =
                            p[i] * q[j] + p[3 + i] * q[3 + j] + p[6 + i] * q[6 + j];
                    }
                }
                let cos = (r[0] + r[4] + r[8] - 1.0) / 2.0;
                let ax = (r[7] - r[5]) / 2.0;
                let ay = (r[2] - r[6]) / 2.0;
                let az = (r[3] - r[1]) / 2.0;
                let sin = (ax * ax + ay * ay + az * az).sqrt();
                sin.atan2(cos)
            }
        }
    }

    /// Squared ambient chord, monotone in the geodesic distance for every shipped space.
    #[inline]
    pub fn chord_sq(&self, p: &[f64], q: &[f64]) -> f64 {
        p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// Largest ambient-coordinate difference between two points at geodesic distance `r`.
    pub fn coordinate_bound(&self, r: f64) -> f64 {
        match self.id {
            // chord = 2 sin(r/2) <= r
            SpaceId::Sphere(_) => r,
            // Frobenius chord = 2 sqrt(2) sin(r/2) <= sqrt(2) r
            SpaceId::So3 => std::f64::consts::SQRT_2 * r,
        }
    }

    /// Geodesic distance for a squared ambient chord.
    pub fn chord_to_distance(&self, chord_sq: f64) -> f64 {
        let half = match self.id {
            SpaceId::Sphere(_) => chord_sq.sqrt() / 2.0,
            SpaceId::So3 => (chord_sq / 8.0).sqrt(),
        };
        2.0 * half.clamp(0.0, 1.0).asin()
    }

    /// Draws a point from the normalized Riemannian measure.
    pub fn uniform_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match self.id {
            SpaceId::Sphere(_) => loop {
                let v: Vec<f64> = (0..self.ambient_dim)
                    .map(|_| rng.sample(StandardNormal))
                    .collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    return Point::new(v.into_iter().map(|x| x / norm).collect());
                }
            },
            SpaceId::So3 => {
                let g = haar_sample(self, rng);
                g.apply(&self.base_point())
            }
        }
    }

    pub fn uniform_points<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        let mut out = Vec::with_capacity(count * self.ambient_dim);
        for _ in 0..count {
            out.extend_from_slice(self.uniform_sample(rng).coords());
        }
        out
    }
}

/// Checked geodesic distance between two points.
pub fn geodesic_distance(spec: &SpaceSpec, p: &Point, q: &Point) -> Result<f64> {
    for x in [p, q] {
        if x.coords().len() != spec.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: spec.ambient_dim,
                got: x.coords().len(),
            });
        }
    }
    Ok(spec.distance(p.coords(), q.coords()))
}

pub(crate) fn so3_matrix(p: &[f64]) -> nalgebra::Matrix3<f64> {
    nalgebra::Matrix3::from_row_slice(&p[..9])
}

pub(crate) fn so3_coords(m: &nalgebra::Matrix3<f64>) -> [f64; 9] {
    let mut out = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            out[3 * i + j] = m[(i, j)];
        }
    }
    out
}
