//! Vietoris–Rips filtrations with the closed convention: a simplex is
//! present at scale `r` when all its pairwise distances are `<= r`.

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Largest cloud accepted for `maxdim <= 1`.
pub const MAX_POINTS_DIM1: usize = 400;
/// Largest cloud accepted for `maxdim = 2`.
pub const MAX_POINTS_DIM2: usize = 80;
/// Largest number of simplices materialized.
pub const SIMPLEX_BUDGET: usize = 8_000_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Simplex {
    /// Vertex indices; entries past `dim` are unused.
    pub vertices: [u32; 4],
    pub dim: usize,
    pub value: f64,
}

impl Simplex {
    pub fn vertices(&self) -> &[u32] {
        &self.vertices[..=self.dim]
    }
}

#[derive(Clone, Debug)]
pub struct Filtration {
    pub n_vertices: usize,
    pub maxdim: usize,
    pub max_radius: f64,
    /// Ordered by `(value, dim, vertices)`.
    pub simplices: Vec<Simplex>,
}

impl Filtration {
    /// Builds the filtration directly from a symmetric distance matrix.
    pub fn from_distances(n: usize, dist: &[f64], maxdim: usize, max_radius: f64) -> Result<Self> {
        assert_eq!(dist.len(), n * n);
        if maxdim > 2 {
            return Err(Error::InvalidParameter {
                name: "maxdim",
                reason: format!("degrees above 2 are not supported, got {maxdim}"),
            });
        }
        if !(max_radius > 0.0) {
            return Err(Error::InvalidParameter {
                name: "max_radius",
                reason: format!("must be positive, got {max_radius}"),
            });
        }
        let limit = if maxdim <= 1 { MAX_POINTS_DIM1 } else { MAX_POINTS_DIM2 };
        if n > limit {
            return Err(Error::BudgetExceeded {
                what: "points",
                estimate: n,
                budget: limit,
            });
        }
        let d = |i: usize, j: usize| dist[i * n + j];
        let near = |i: usize, j: usize| d(i, j) <= max_radius;

        let estimate = count_simplices(n, maxdim + 1, &near);
        if estimate > SIMPLEX_BUDGET {
            return Err(Error::BudgetExceeded {
                what: "simplices",
                estimate,
                budget: SIMPLEX_BUDGET,
            });
        }

        let mut simplices = Vec::with_capacity(estimate);
        for i in 0..n {
            simplices.push(Simplex {
                vertices: [i as u32, 0, 0, 0],
                dim: 0,
                value: 0.0,
            });
        }
        for i in 0..n {
            for j in i + 1..n {
                if !near(i, j) {
                    continue;
                }
                let dij = d(i, j);
                simplices.push(Simplex {
                    vertices: [i as u32, j as u32, 0, 0],
                    dim: 1,
                    value: dij,
                });
                if maxdim < 1 {
                    continue;
                }
                for k in j + 1..n {
                    if !(near(i, k) && near(j, k)) {
                        continue;
                    }
                    let dijk = dij.max(d(i, k)).max(d(j, k));
                    simplices.push(Simplex {
                        vertices: [i as u32, j as u32, k as u32, 0],
                        dim: 2,
                        value: dijk,
                    });
                    if maxdim < 2 {
                        continue;
                    }
                    for l in k + 1..n {
                        if near(i, l) && near(j, l) && near(k, l) {
                            simplices.push(Simplex {
                                vertices: [i as u32, j as u32, k as u32, l as u32],
                                dim: 3,
                                value: dijk.max(d(i, l)).max(d(j, l)).max(d(k, l)),
                            });
                        }
                    }
                }
            }
        }
        simplices.sort_by(|a, b| {
            a.value
                .total_cmp(&b.value)
                .then(a.dim.cmp(&b.dim))
                .then_with(|| a.vertices().cmp(b.vertices()))
        });
        Ok(Filtration {
            n_vertices: n,
            maxdim,
            max_radius,
            simplices,
        })
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    /// Number of simplices of each dimension with value `<= radius`.
    pub fn counts_at(&self, radius: f64) -> Vec<usize> {
        let mut counts = vec![0; self.maxdim + 2];
        for s in self.simplices.iter().take_while(|s| s.value <= radius) {
            counts[s.dim] += 1;
        }
        counts
    }
}

fn count_simplices(n: usize, top: usize, near: &impl Fn(usize, usize) -> bool) -> usize {
    let mut count = n;
    for i in 0..n {
        for j in i + 1..n {
            if !near(i, j) {
                continue;
            }
            count += 1;
            if top < 2 {
                continue;
            }
            for k in j + 1..n {
                if !(near(i, k) && near(j, k)) {
                    continue;
                }
                count += 1;
                if top < 3 {
                    continue;
                }
                count += (k + 1..n).filter(|&l| near(i, l) && near(j, l) && near(k, l)).count();
            }
        }
    }
    count
}

/// Rips filtration of a cloud under its geodesic distance, including
/// simplices up to dimension `maxdim + 1`.
pub fn vr_filtration(cloud: &PointCloud, maxdim: usize, max_radius: f64) -> Result<Filtration> {
    let n = cloud.len();
    let limit = if maxdim <= 1 { MAX_POINTS_DIM1 } else { MAX_POINTS_DIM2 };
    if n > limit {
        return Err(Error::BudgetExceeded {
            what: "points",
            estimate: n,
            budget: limit,
        });
    }
    Filtration::from_distances(n, &distance_matrix(cloud), maxdim, max_radius)
}

pub(crate) fn distance_matrix(cloud: &PointCloud) -> Vec<f64> {
    let n = cloud.len();
    let space = cloud.space();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = space.distance(cloud.point(i), cloud.point(j));
            dist[i * n + j] = v;
            dist[j * n + i] = v;
        }
    }
    dist
}
