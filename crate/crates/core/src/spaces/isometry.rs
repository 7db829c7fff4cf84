use nalgebra::{DMatrix, Matrix3};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{so3_coords, so3_matrix, Point, SpaceId, SpaceSpec};
use crate::error::{Error, Result};

/// An isometry of a shipped space.
///
/// Spheres are acted on by `SO(d+1)`. `SO(3)` viewed as a Riemannian
/// manifold is acted on by pairs `(L, R)` through `g -> L g R^T`.
#[derive(Clone, Debug, PartialEq)]
pub enum Isometry {
    Rotation(DMatrix<f64>),
    Pair { left: Matrix3<f64>, right: Matrix3<f64> },
}

impl Isometry {
    pub fn identity(spec: &SpaceSpec) -> Self {
        match spec.id {
            SpaceId::Sphere(d) => Isometry::Rotation(DMatrix::identity(d + 1, d + 1)),
            SpaceId::So3 => Isometry::Pair {
                left: Matrix3::identity(),
                right: Matrix3::identity(),
            },
        }
    }

    /// Dimension of the ambient coordinates this isometry acts on.
    pub fn ambient_dim(&self) -> usize {
        match self {
            Isometry::Rotation(m) => m.nrows(),
            Isometry::Pair { .. } => 9,
        }
    }

    /// Writes `self * p` into `out` without allocating.
    #[inline]
    pub fn apply_into(&self, p: &[f64], out: &mut [f64]) {
        match self {
            Isometry::Rotation(m) => {
                let n = m.nrows();
                for (i, o) in out.iter_mut().enumerate().take(n) {
                    let mut acc = 0.0;
                    for (j, x) in p.iter().enumerate().take(n) {
                        acc += m[(i, j)] * x;
                    }
                    *o = acc;
                }
            }
            Isometry::Pair { left, right } => {
                let g = so3_matrix(p);
                let h = left * g * right.transpose();
                out[..9].copy_from_slice(&so3_coords(&h));
            }
        }
    }

    pub fn apply(&self, p: &Point) -> Point {
        let mut out = vec![0.0; p.coords().len()];
        self.apply_into(p.coords(), &mut out);
        Point::new(out)
    }

    pub fn try_apply(&self, p: &Point) -> Result<Point> {
        if p.coords().len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                got: p.coords().len(),
            });
        }
        Ok(self.apply(p))
    }

    pub fn invert(&self) -> Self {
        match self {
            Isometry::Rotation(m) => Isometry::Rotation(m.transpose()),
            Isometry::Pair { left, right } => Isometry::Pair {
                left: left.transpose(),
                right: right.transpose(),
            },
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Isometry) -> Result<Isometry> {
        match (self, other) {
            (Isometry::Rotation(a), Isometry::Rotation(b)) if a.nrows() == b.nrows() => {
                Ok(Isometry::Rotation(a * b))
            }
            (
                Isometry::Pair { left: la, right: ra },
                Isometry::Pair { left: lb, right: rb },
            ) => Ok(Isometry::Pair {
                left: la * lb,
                right: ra * rb,
            }),
            _ => Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                got: other.ambient_dim(),
            }),
        }
    }

    /// Largest entry of `M^T M - I` over the component matrices.
    pub fn orthogonality_residual(&self) -> f64 {
        match self {
            Isometry::Rotation(m) => {
                let n = m.nrows();
                (m.transpose() * m - DMatrix::identity(n, n)).amax()
            }
            Isometry::Pair { left, right } => {
                let l = (left.transpose() * left - Matrix3::identity()).amax();
                let r = (right.transpose() * right - Matrix3::identity()).amax();
                l.max(r)
            }
        }
    }

    /// Determinant of each component, for the `det = +1` check.
    pub fn determinants(&self) -> Vec<f64> {
        match self {
            Isometry::Rotation(m) => vec![m.clone().determinant()],
            Isometry::Pair { left, right } => vec![left.determinant(), right.determinant()],
        }
    }

    /// Largest entrywise difference to another isometry of the same kind.
    pub fn max_abs_diff(&self, other: &Isometry) -> f64 {
        match (self, other) {
            (Isometry::Rotation(a), Isometry::Rotation(b)) => (a - b).amax(),
            (
                Isometry::Pair { left: la, right: ra },
                Isometry::Pair { left: lb, right: rb },
            ) => (la - lb).amax().max((ra - rb).amax()),
            _ => f64::INFINITY,
        }
    }
}

/// Haar-distributed element of `SO(n)`.
///
/// Gaussian matrix, QR factorization, columns of `Q` multiplied by the sign
/// of the matching diagonal entry of `R` (Haar on `O(n)`); if the result
/// has determinant -1, column 0 is negated.
pub fn haar_rotation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    loop {
        let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
        let qr = g.qr();
        let r = qr.r();
        if (0..n).any(|i| r[(i, i)] == 0.0) {
            continue;
        }
        let mut q = qr.q();
        for j in 0..n {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        if q.clone().determinant() < 0.0 {
            q.column_mut(0).neg_mut();
        }
        return q;
    }
}

fn haar_rotation3<R: Rng + ?Sized>(rng: &mut R) -> Matrix3<f64> {
    let q = haar_rotation(3, rng);
    Matrix3::from_fn(|i, j| q[(i, j)])
}

/// Haar-distributed isometry of the space.
pub fn haar_sample<R: Rng + ?Sized>(spec: &SpaceSpec, rng: &mut R) -> Isometry {
    match spec.id {
        SpaceId::Sphere(d) => Isometry::Rotation(haar_rotation(d + 1, rng)),
        SpaceId::So3 => {
            let left = haar_rotation3(rng);
            let right = haar_rotation3(rng);
            Isometry::Pair { left, right }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::spaces::{make_space, ConstantOverrides};
    use std::f64::consts::PI;

    fn specs() -> Vec<SpaceSpec> {
        [SpaceId::Sphere(1), SpaceId::Sphere(2), SpaceId::Sphere(5), SpaceId::So3]
            .into_iter()
            .map(|id| make_space(id, &ConstantOverrides::default()).unwrap())
            .collect()
    }

    #[test]
    fn haar_samples_are_rotations() {
        for spec in specs() {
            let mut rng = stream(1, 0);
            for _ in 0..200 {
                let g = haar_sample(&spec, &mut rng);
                assert!(g.orthogonality_residual() < 1e-12);
                for det in g.determinants() {
                    assert!((det - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn group_axioms() {
        for spec in specs() {
            let mut rng = stream(2, 0);
            let id = Isometry::identity(&spec);
            for _ in 0..50 {
                let a = haar_sample(&spec, &mut rng);
                let b = haar_sample(&spec, &mut rng);
                let c = haar_sample(&spec, &mut rng);
                let e = a.compose(&a.invert()).unwrap();
                assert!(e.max_abs_diff(&id) < 1e-12);
                let e = a.invert().compose(&a).unwrap();
                assert!(e.max_abs_diff(&id) < 1e-12);
                let left = a.compose(&b).unwrap().compose(&c).unwrap();
                let right = a.compose(&b.compose(&c).unwrap()).unwrap();
                assert!(left.max_abs_diff(&right) < 1e-12);
            }
        }
    }

    #[test]
    fn isometries_preserve_distance() {
        for spec in specs() {
            let mut rng = stream(4, 0);
            let base = spec.base_point();
            assert_eq!(Isometry::identity(&spec).apply(&base), base);
            for _ in 0..200 {
                let g = haar_sample(&spec, &mut rng);
                let p = spec.uniform_sample(&mut rng);
                let q = spec.uniform_sample(&mut rng);
                let before = spec.distance(p.coords(), q.coords());
                let after = spec.distance(g.apply(&p).coords(), g.apply(&q).coords());
                assert!((before - after).abs() < 1e-10);
                spec.check_point(g.apply(&p).coords()).unwrap();
            }
        }
    }

    #[test]
    fn compose_matches_sequential_apply() {
        for spec in specs() {
            let mut rng = stream(6, 0);
            let a = haar_sample(&spec, &mut rng);
            let b = haar_sample(&spec, &mut rng);
            let p = spec.uniform_sample(&mut rng);
            let ab = a.compose(&b).unwrap().apply(&p);
            let seq = a.apply(&b.apply(&p));
            let diff = ab
                .coords()
                .iter()
                .zip(seq.coords())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(diff < 1e-12);
        }
    }

    #[test]
    fn mismatched_isometries_do_not_compose() {
        let specs = specs();
        let mut rng = stream(8, 0);
        let a = haar_sample(&specs[1], &mut rng);
        let b = haar_sample(&specs[3], &mut rng);
        assert!(matches!(a.compose(&b), Err(Error::DimensionMismatch { .. })));
        let p = specs[2].base_point();
        assert!(a.try_apply(&p).is_err());
    }

    #[test]
    fn so3_mean_trace_vanishes() {
        let mut rng = stream(12, 0);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| haar_rotation(3, &mut rng).trace())
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() <= 5.0 / (n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn sphere2_pole_distance_follows_sine_law() {
        let spec = make_space(SpaceId::Sphere(2), &ConstantOverrides::default()).unwrap();
        let o = spec.base_point();
        let mut rng = stream(13, 0);
        let n = 100_000;
        let mut theta: Vec<f64> = (0..n)
            .map(|_| {
                let g = haar_sample(&spec, &mut rng);
                spec.distance(o.coords(), g.apply(&o).coords())
            })
            .collect();
        theta.sort_by(f64::total_cmp);
        // CDF of the density sin(t)/2 on [0, pi]
        let cdf = |t: f64| (1.0 - t.cos()) / 2.0;
        let ks = theta
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let f = cdf(t);
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks <= 0.01, "{ks}");
        assert!(theta[n - 1] <= PI);
    }

    #[test]
    fn left_translation_preserves_haar_law() {
        // two-sample KS on tr(g) versus tr(h g) for a fixed h
        let mut rng = stream(14, 0);
        let h = haar_rotation(3, &mut rng);
        let n = 10_000;
        let mut a: Vec<f64> = (0..n).map(|_| haar_rotation(3, &mut rng).trace()).collect();
        let mut rng2 = stream(14, 1);
        let mut b: Vec<f64> = (0..n)
            .map(|_| (&h * haar_rotation(3, &mut rng2)).trace())
            .collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
        while i < n && j < n {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 / n as f64 - j as f64 / n as f64).abs());
        }
        // critical value at significance 0.01
        let crit = 1.628 * ((2 * n) as f64 / (n * n) as f64).sqrt();
        assert!(d < crit, "{d} >= {crit}");
    }
}
