//! Verification metrics for a cover: covering radius against a reference
//! sample, separation, Wasserstein-1 distance (exact and entropic) and
//! integration gaps of 1-Lipschitz test functions.

mod exact;
mod nn;
mod sinkhorn;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::spaces::Point;

pub use exact::{wasserstein1_exact, EXACT_SIZE_LIMIT};
pub use nn::{build_index, NNIndex};
pub use sinkhorn::{wasserstein1_sinkhorn, SinkhornOptions};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransportMethod {
    ExactFlow,
    Sinkhorn { reg: f64 },
    DualLipschitz,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    /// Optimal coupling as `(i, j, mass)` triples, with the largest
    /// complementary-slackness violation of the accompanying duals.
    Plan {
        entries: Vec<(usize, usize, f64)>,
        slackness_residual: f64,
    },
    /// Dual potentials `f_i + g_j <= c_ij`; their weighted sum is a lower bound.
    Potentials { f: Vec<f64>, g: Vec<f64> },
}

/// A Wasserstein-1 estimate between two uniform empirical measures.
///
/// For `Sinkhorn`, `value` is the cost of a feasible coupling (an upper
/// bound on the exact value) and `gap_bound` is its distance to a feasible
/// dual objective, so the exact value lies in `[value - gap_bound, value]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportResult {
    pub value: f64,
    pub method: TransportMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
    pub gap_bound: f64,
}

impl TransportResult {
    pub fn lower_bound(&self) -> f64 {
        (self.value - self.gap_bound).max(0.0)
    }

    pub fn without_certificate(mut self) -> Self {
        self.certificate = None;
        self
    }
}

fn same_space(a: &PointCloud, b: &PointCloud) -> Result<()> {
    if a.space() != b.space() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

/// Largest distance from a reference point to its nearest cloud point.
///
/// A Monte Carlo lower bound on the true covering radius of the cloud.
pub fn covering_radius(cloud: &PointCloud, reference: &PointCloud) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::EmptyCloud);
    }
    same_space(cloud, reference)?;
    let index = build_index(cloud)?;
    Ok((0..reference.len())
        .into_par_iter()
        .map(|i| index.nearest(reference.point(i)).1)
        .reduce(|| 0.0, f64::max))
}

/// Density diagnostic of a reference sample: covering radius of its even-indexed
/// half measured by its odd-indexed half.
pub fn reference_self_coverage(reference: &PointCloud) -> Result<f64> {
    if reference.len() < 2 {
        return Err(Error::TooFewPoints(reference.len()));
    }
    let even: Vec<usize> = (0..reference.len()).step_by(2).collect();
    let odd: Vec<usize> = (1..reference.len()).step_by(2).collect();
    covering_radius(&reference.select(&even), &reference.select(&odd))
}

/// Smallest pairwise geodesic distance.
pub fn separation(cloud: &PointCloud) -> Result<f64> {
    if cloud.len() < 2 {
        return Err(Error::TooFewPoints(cloud.len()));
    }
    let index = build_index(cloud)?;
    Ok((0..cloud.len())
        .into_par_iter()
        .map(|i| {
            index
                .nearest_excluding(cloud.point(i), i)
                .map_or(f64::INFINITY, |(_, d)| d)
        })
        .reduce(|| f64::INFINITY, f64::min))
}

fn mean_distance(cloud: &PointCloud, anchor: &[f64]) -> f64 {
    let spec = cloud.space();
    // fixed-size blocks keep the summation order independent of the thread count
    let partial: Vec<f64> = cloud
        .coords()
        .par_chunks(cloud.dim() * 4096)
        .map(|block| {
            block
                .chunks_exact(cloud.dim())
                .map(|p| spec.distance(anchor, p))
                .sum::<f64>()
        })
        .collect();
    partial.iter().sum::<f64>() / cloud.len() as f64
}

/// Integration gaps `|mean_cloud(phi_a) - mean_reference(phi_a)|` of the
/// 1-Lipschitz distance functions `phi_a(x) = dist(a, x)`, one per anchor.
///
/// Each gap is a lower bound on the Wasserstein-1 distance between the two
/// empirical measures.
pub fn lipschitz_gap(
    cloud: &PointCloud,
    anchors: &[Point],
    reference: &PointCloud,
) -> Result<Vec<(usize, f64)>> {
    if cloud.is_empty() || reference.is_empty() {
        return Err(Error::EmptyCloud);
    }
    same_space(cloud, reference)?;
    anchors
        .iter()
        .enumerate()
        .map(|(i, a)| {
            if a.coords().len() != cloud.dim() {
                return Err(Error::DimensionMismatch {
                    expected: cloud.dim(),
                    got: a.coords().len(),
                });
            }
            let gap = (mean_distance(cloud, a.coords()) - mean_distance(reference, a.coords())).abs();
            Ok((i, gap))
        })
        .collect()
}

/// Pairwise geodesic distances, row-major `|a| x |b|`.
pub(crate) fn cost_matrix(a: &PointCloud, b: &PointCloud) -> Vec<f64> {
    let spec = a.space();
    let m = b.len();
    let mut cost = vec![0.0; a.len() * m];
    cost.par_chunks_mut(m.max(1))
        .enumerate()
        .for_each(|(i, row)| {
            let p = a.point(i);
            for (j, c) in row.iter_mut().enumerate() {
                *c = spec.distance(p, b.point(j));
            }
        });
    cost
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::Provenance;
    use crate::spaces::{make_space, ConstantOverrides, SpaceId, SpaceSpec};
    use std::f64::consts::PI;

    fn s2() -> SpaceSpec {
        make_space(SpaceId::Sphere(2), &ConstantOverrides::default()).unwrap()
    }

    fn octahedron() -> PointCloud {
        let mut coords = Vec::new();
        for axis in 0..3 {
            for sign in [1.0, -1.0] {
                let mut p = [0.0; 3];
                p[axis] = sign;
                coords.extend_from_slice(&p);
            }
        }
        PointCloud::new(s2(), coords, Provenance::external()).unwrap()
    }

    /// Deterministic latitude-longitude grid, dense near the face centers too.
    fn sphere_grid(n: usize) -> PointCloud {
        let mut coords = Vec::new();
        for i in 0..=n {
            let theta = PI * i as f64 / n as f64;
            for j in 0..2 * n {
                let phi = PI * j as f64 / n as f64;
                coords.extend_from_slice(&[
                    theta.sin() * phi.cos(),
                    theta.sin() * phi.sin(),
                    theta.cos(),
                ]);
            }
        }
        PointCloud::new(s2(), coords, Provenance::external()).unwrap()
    }

    #[test]
    fn reference_inside_cloud_gives_zero() {
        let cloud = PointCloud::uniform(s2(), 300, 4, 0);
        let sub = cloud.select(&[0, 10, 20, 299]);
        assert_eq!(covering_radius(&cloud, &sub).unwrap(), 0.0);
    }

    #[test]
    fn single_pole_covering_radius() {
        let north = PointCloud::new(s2(), vec![0.0, 0.0, 1.0], Provenance::external()).unwrap();
        let reference = PointCloud::uniform(s2(), 10_000, 7, 2);
        let r = covering_radius(&north, &reference).unwrap();
        assert!((r - PI).abs() < 0.05, "{r}");
    }

    #[test]
    fn octahedron_covering_radius() {
        // farthest points from the vertices are the face centers
        let oracle = sphere_grid(400)
            .points()
            .map(|x| {
                octahedron()
                    .points()
                    .map(|v| s2().distance(x, v))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        let face_center = (1.0f64 / 3.0f64.sqrt()).acos();
        assert!(oracle <= face_center + 1e-12 && oracle > face_center - 5e-3);
        let reference = PointCloud::uniform(s2(), 10_000, 8, 2);
        let r = covering_radius(&octahedron(), &reference).unwrap();
        assert!((r - oracle).abs() < 0.02, "{r} vs {oracle}");
    }

    #[test]
    fn separation_cases() {
        let twin = PointCloud::new(s2(), vec![0.0, 1.0, 0.0, 0.0, 1.0, 0.0], Provenance::external())
            .unwrap();
        assert_eq!(separation(&twin).unwrap(), 0.0);
        assert!((separation(&octahedron()).unwrap() - PI / 2.0).abs() < 1e-15);
        let one = twin.select(&[0]);
        assert!(matches!(separation(&one), Err(Error::TooFewPoints(1))));

        let cloud = PointCloud::uniform(s2(), 300, 9, 0);
        let mut brute = f64::INFINITY;
        for i in 0..300 {
            for j in i + 1..300 {
                brute = brute.min(s2().distance(cloud.point(i), cloud.point(j)));
            }
        }
        assert_eq!(separation(&cloud).unwrap(), brute);
    }

    #[test]
    fn lipschitz_gaps() {
        let reference = PointCloud::uniform(s2(), 20_000, 10, 2);
        let gaps = lipschitz_gap(&reference, &[s2().base_point()], &reference).unwrap();
        assert_eq!(gaps, vec![(0, 0.0)]);
        // mean distance to the pole under the uniform measure is pi / 2
        let north = PointCloud::new(s2(), vec![0.0, 0.0, 1.0], Provenance::external()).unwrap();
        let gaps = lipschitz_gap(&north, &[s2().base_point()], &reference).unwrap();
        assert!((gaps[0].1 - PI / 2.0).abs() < 0.02, "{:?}", gaps);
    }

    #[test]
    fn self_coverage_diagnostic() {
        let reference = PointCloud::uniform(s2(), 2000, 10, 2);
        let r = reference_self_coverage(&reference).unwrap();
        assert!(r > 0.0 && r < 0.3);
    }
}
