//! Positive quadrature rules with weights summing to one.
//!
//! Spheres use the recursive product of Gauss–Jacobi rules in the last
//! coordinate with the rule on the equatorial sphere, ending in a
//! trapezoid on the circle. SO(3) uses a ZYZ Euler-angle product with the
//! Haar density absorbed by Gauss–Legendre in `cos(beta)`.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen};
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::spaces::{so3_coords, SpaceSpec};

#[derive(Clone, Debug)]
pub struct Quadrature {
    ambient_dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Quadrature {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.ambient_dim..(i + 1) * self.ambient_dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.nodes.chunks_exact(self.ambient_dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weighted sum of `f` over the nodes.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64 + Sync) -> f64 {
        let parts: Vec<f64> = (0..self.len())
            .into_par_iter()
            .map(|i| self.weights[i] * f(self.node(i)))
            .collect();
        parts.iter().sum()
    }
}

/// Nodes and normalized weights of the `n`-point Gauss–Jacobi rule for the
/// weight `(1 - t)^a (1 + t)^a` on `[-1, 1]`, via Golub–Welsch.
pub fn gauss_jacobi_symmetric(n: usize, a: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0 && a > -1.0);
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let k = k as f64;
        let b = (k * (k + 2.0 * a) / ((2.0 * k + 2.0 * a + 1.0) * (2.0 * k + 2.0 * a - 1.0))).sqrt();
        let i = k as usize;
        jac[(i, i - 1)] = b;
        jac[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    (
        pairs.iter().map(|p| p.0).collect(),
        pairs.iter().map(|p| p.1 / total).collect(),
    )
}

/// Rule on S^d exact for polynomials of total degree `degree` in the
/// ambient coordinates.
pub fn sphere_rule(d: usize, degree: usize) -> Quadrature {
    assert!(d >= 1);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    // circle: trapezoid with degree + 1 points integrates e^{ik phi}, |k| <= degree
    let m = degree + 1;
    for j in 0..m {
        let phi = 2.0 * PI * (j as f64 + 0.5) / m as f64;
        nodes.extend_from_slice(&[phi.cos(), phi.sin()]);
        weights.push(1.0 / m as f64);
    }
    let n_t = degree / 2 + 1;
    for k in 2..=d {
        let (ts, ws) = gauss_jacobi_symmetric(n_t, (k as f64 - 2.0) / 2.0);
        let mut next = Vec::with_capacity(nodes.len() / k * (k + 1) * n_t);
        let mut next_w = Vec::with_capacity(weights.len() * n_t);
        for (t, wt) in ts.iter().zip(&ws) {
            let s = (1.0 - t * t).max(0.0).sqrt();
            for (y, wy) in nodes.chunks_exact(k).zip(&weights) {
                next.extend(y.iter().map(|v| s * v));
                next.push(*t);
                next_w.push(wt * wy);
            }
        }
        nodes = next;
        weights = next_w;
    }
    Quadrature {
        ambient_dim: d + 1,
        nodes,
        weights,
    }
}

/// Rule on SO(3) exact for products of matrix coefficients of total degree
/// `degree` (sums of spins).
pub fn so3_rule(degree: usize) -> Quadrature {
    let (cb, wb) = gauss_jacobi_symmetric(degree / 2 + 1, 0.0);
    let m = degree + 1;
    let mut nodes = Vec::with_capacity(cb.len() * m * m * 9);
    let mut weights = Vec::with_capacity(cb.len() * m * m);
    for (c, w) in cb.iter().zip(&wb) {
        let beta = c.clamp(-1.0, 1.0).acos();
        for i in 0..m {
            let alpha = 2.0 * PI * i as f64 / m as f64;
            for j in 0..m {
                let gamma = 2.0 * PI * j as f64 / m as f64;
                let g = rot_z(alpha) * rot_y(beta) * rot_z(gamma);
                nodes.extend_from_slice(&so3_coords(&g));
                weights.push(w / (m * m) as f64);
            }
        }
    }
    Quadrature {
        ambient_dim: 9,
        nodes,
        weights,
    }
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn rot_y(b: f64) -> Matrix3<f64> {
    let (s, c) = b.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Rule for `spec` exact to the given degree.
pub fn quadrature(spec: &SpaceSpec, degree: usize) -> Quadrature {
    if spec.is_so3() {
        so3_rule(degree)
    } else {
        sphere_rule(spec.dim_m, degree)
    }
}
