//! Orthonormal Laplace–Beltrami eigenbases, normalized against the
//! probability measure.
//!
//! - `S^1`: `1, sqrt(2) cos(h phi), sqrt(2) sin(h phi)`.
//! - `S^2`: real spherical harmonics from the fully normalized associated
//!   Legendre recurrence, written in `z` and `(x + iy)^m` so no angles are
//!   formed.
//! - `S^d`, `d >= 3`: harmonic projections of the monomials whose last
//!   exponent is at most one, orthonormalized with exact sphere moments.
//! - `SO(3)`: `sqrt(2j + 1)` times the real representation matrices
//!   `rho_j(g)_{mn} = <Y_m, Y_n o g^T>` of the degree-`j` harmonics on `S^2`,
//!   computed by quadrature.

use nalgebra::DMatrix;
use rayon::prelude::*;
use std::collections::BTreeMap;

use super::quadrature::{quadrature, sphere_rule, Quadrature};
use crate::error::{Error, Result};
use crate::spaces::{eigenvalues, make_space, ConstantOverrides, SpaceId, SpaceSpec};

/// Largest basis `build_basis` will construct.
pub const DIMENSION_BUDGET: usize = 4096;

/// One eigenspace: functions `start..start + dim` of the basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenBlock {
    pub lambda: f64,
    pub degree: usize,
    pub start: usize,
    pub dim: usize,
}

impl EigenBlock {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.dim
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Circle,
    Sphere2,
    /// Homogeneous harmonic polynomials, one coefficient matrix per degree
    /// over the degree-`h` monomials.
    Sphere {
        monomials: Vec<Vec<Vec<u8>>>,
        coeffs: Vec<DMatrix<f64>>,
    },
    So3 {
        harmonics: Box<EigenBasis>,
        rule: Quadrature,
        /// Harmonic values at the rule nodes, one row per node, pre-scaled by the weights.
        weighted: DMatrix<f64>,
    },
}

#[derive(Clone, Debug)]
pub struct EigenBasis {
    space: SpaceSpec,
    lambda_max: f64,
    blocks: Vec<EigenBlock>,
    total_dim: usize,
    kind: Kind,
}

/// Builds an orthonormal basis of all eigenfunctions with eigenvalue `<= lambda_max`.
pub fn build_basis(spec: &SpaceSpec, lambda_max: f64) -> Result<EigenBasis> {
    if !(lambda_max >= 0.0 && lambda_max.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "lambda_max",
            reason: format!("must be finite and nonnegative, got {lambda_max}"),
        });
    }
    let mut blocks = Vec::new();
    let mut start = 0;
    for (degree, lambda, dim) in eigenvalues(spec).take_while(|e| e.1 <= lambda_max) {
        blocks.push(EigenBlock {
            lambda,
            degree,
            start,
            dim,
        });
        start += dim;
        if start > DIMENSION_BUDGET {
            return Err(Error::DimensionBudgetExceeded {
                total_dim: start,
                budget: DIMENSION_BUDGET,
            });
        }
    }
    let top = blocks.last().map_or(0, |b| b.degree);
    let kind = match spec.id {
        SpaceId::Sphere(1) => Kind::Circle,
        SpaceId::Sphere(2) => Kind::Sphere2,
        SpaceId::Sphere(d) => {
            let (monomials, coeffs) = (0..=top).map(|h| harmonic_block(d + 1, h)).unzip();
            Kind::Sphere { monomials, coeffs }
        }
        SpaceId::So3 => {
            let s2 = make_space(SpaceId::Sphere(2), &ConstantOverrides::default())?;
            let harmonics = build_basis(&s2, (top * (top + 1)) as f64)?;
            let rule = sphere_rule(2, 2 * top);
            let mut weighted = harmonics.evaluate_rows(rule.nodes().flatten().copied().collect::<Vec<_>>().as_slice());
            for (i, w) in rule.weights().iter().enumerate() {
                weighted.row_mut(i).scale_mut(*w);
            }
            Kind::So3 {
                harmonics: Box::new(harmonics),
                rule,
                weighted,
            }
        }
    };
    Ok(EigenBasis {
        space: *spec,
        lambda_max,
        blocks,
        total_dim: start,
        kind,
    })
}

impl EigenBasis {
    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn blocks(&self) -> &[EigenBlock] {
        &self.blocks
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    /// Largest degree (or spin) present.
    pub fn band(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.degree)
    }

    /// Quadrature integrating every product of two basis functions exactly.
    pub fn product_rule(&self) -> Quadrature {
        quadrature(&self.space, 2 * self.band())
    }

    /// Writes all basis functions at `x` into `out` (length `total_dim`).
    pub fn evaluate_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.total_dim);
        match &self.kind {
            Kind::Circle => self.eval_circle(x, out),
            Kind::Sphere2 => self.eval_sphere2(x, out),
            Kind::Sphere { monomials, coeffs } => self.eval_sphere(x, monomials, coeffs, out),
            Kind::So3 {
                harmonics,
                rule,
                weighted,
            } => self.eval_so3(x, harmonics, rule, weighted, out),
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.total_dim];
        self.evaluate_into(x, &mut out);
        out
    }

    /// Basis values at every point of a flat coordinate array, one row per point.
    pub fn evaluate_rows(&self, coords: &[f64]) -> DMatrix<f64> {
        let dim = self.space.ambient_dim;
        let n = coords.len() / dim;
        let mut flat = vec![0.0; n * self.total_dim];
        flat.par_chunks_mut(self.total_dim)
            .zip(coords.par_chunks(dim))
            .for_each(|(out, x)| self.evaluate_into(x, out));
        DMatrix::from_row_slice(n, self.total_dim, &flat)
    }

    fn eval_circle(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
        let (mut re, mut im) = (1.0, 0.0);
        let r2 = std::f64::consts::SQRT_2;
        for b in &self.blocks[1..] {
            (re, im) = (re * x[0] - im * x[1], re * x[1] + im * x[0]);
            out[b.start] = r2 * re;
            out[b.start + 1] = r2 * im;
        }
    }

    fn eval_sphere2(&self, x: &[f64], out: &mut [f64]) {
        let top = self.band();
        let z = x[2];
        // (x + iy)^m
        let mut pw = Vec::with_capacity(top + 1);
        pw.push((1.0, 0.0));
        for m in 1..=top {
            let (re, im): (f64, f64) = pw[m - 1];
            pw.push((re * x[0] - im * x[1], re * x[1] + im * x[0]));
        }
        // q[n][m]: normalized Legendre function divided by sin^m(theta)
        let mut q = vec![vec![0.0; top + 1]; top + 1];
        q[0][0] = 1.0;
        for m in 1..=top {
            let f = if m == 1 {
                3f64.sqrt()
            } else {
                ((2 * m + 1) as f64 / (2 * m) as f64).sqrt()
            };
            q[m][m] = f * q[m - 1][m - 1];
        }
        for m in 0..top {
            for n in m + 1..=top {
                let (nf, mf) = (n as f64, m as f64);
                let a = ((2.0 * nf - 1.0) * (2.0 * nf + 1.0) / ((nf - mf) * (nf + mf))).sqrt();
                let mut v = a * z * q[n - 1][m];
                if n >= m + 2 {
                    let b = ((2.0 * nf + 1.0) * (nf + mf - 1.0) * (nf - mf - 1.0)
                        / ((nf - mf) * (nf + mf) * (2.0 * nf - 3.0)))
                        .sqrt();
                    v -= b * q[n - 2][m];
                }
                q[n][m] = v;
            }
        }
        for b in &self.blocks {
            let n = b.degree;
            let mut idx = b.start;
            out[idx] = q[n][0];
            idx += 1;
            for m in 1..=n {
                out[idx] = q[n][m] * pw[m].0;
                out[idx + 1] = q[n][m] * pw[m].1;
                idx += 2;
            }
        }
    }

    fn eval_sphere(&self, x: &[f64], monomials: &[Vec<Vec<u8>>], coeffs: &[DMatrix<f64>], out: &mut [f64]) {
        let top = self.band();
        let powers: Vec<Vec<f64>> = x
            .iter()
            .map(|&v| {
                let mut p = vec![1.0; top + 1];
                for k in 1..=top {
                    p[k] = p[k - 1] * v;
                }
                p
            })
            .collect();
        for b in &self.blocks {
            let mons = &monomials[b.degree];
            let vals: Vec<f64> = mons
                .iter()
                .map(|e| e.iter().enumerate().map(|(i, &k)| powers[i][k as usize]).product())
                .collect();
            let c = &coeffs[b.degree];
            for r in 0..b.dim {
                out[b.start + r] = (0..vals.len()).map(|s| c[(r, s)] * vals[s]).sum();
            }
        }
    }

    fn eval_so3(
        &self,
        x: &[f64],
        harmonics: &EigenBasis,
        rule: &Quadrature,
        weighted: &DMatrix<f64>,
        out: &mut [f64],
    ) {
        // rotated nodes g^T x_q, with g stored row-major
        let mut rotated = Vec::with_capacity(rule.len() * 3);
        for node in rule.nodes() {
            for a in 0..3 {
                rotated.push(x[a] * node[0] + x[3 + a] * node[1] + x[6 + a] * node[2]);
            }
        }
        let moved = harmonics.evaluate_rows(&rotated);
        for (b, hb) in self.blocks.iter().zip(harmonics.blocks()) {
            let w = weighted.columns(hb.start, hb.dim);
            let v = moved.columns(hb.start, hb.dim);
            let rho = w.transpose() * v;
            let scale = ((2 * b.degree + 1) as f64).sqrt();
            for m in 0..hb.dim {
                for n in 0..hb.dim {
                    out[b.start + m * hb.dim + n] = scale * rho[(m, n)];
                }
            }
        }
    }
}

type Poly = BTreeMap<Vec<u8>, f64>;

fn double_factorial(n: i64) -> f64 {
    let mut acc = 1.0;
    let mut k = n;
    while k > 1 {
        acc *= k as f64;
        k -= 2;
    }
    acc
}

/// Exact mean of the monomial `x^e` over the unit sphere in `R^n`.
pub(crate) fn sphere_moment(n: usize, e: &[u8]) -> f64 {
    if e.iter().any(|&k| k % 2 == 1) {
        return 0.0;
    }
    let total: usize = e.iter().map(|&k| k as usize).sum();
    let num: f64 = e.iter().map(|&k| double_factorial(k as i64 - 1)).product();
    let den: f64 = (0..total / 2).map(|i| (n + 2 * i) as f64).product();
    num / den
}

fn monomials_of_degree(n: usize, h: usize) -> Vec<Vec<u8>> {
    if n == 1 {
        return vec![vec![h as u8]];
    }
    let mut out = Vec::new();
    for first in (0..=h).rev() {
        for mut rest in monomials_of_degree(n - 1, h - first) {
            rest.insert(0, first as u8);
            out.push(rest);
        }
    }
    out
}

fn laplacian(p: &Poly) -> Poly {
    let mut out = Poly::new();
    for (e, &c) in p {
        for i in 0..e.len() {
            let k = e[i];
            if k >= 2 {
                let mut f = e.clone();
                f[i] -= 2;
                *out.entry(f).or_insert(0.0) += c * (k as f64) * (k as f64 - 1.0);
            }
        }
    }
    out
}

fn times_norm_sq(p: &Poly, n: usize) -> Poly {
    let mut out = Poly::new();
    for (e, &c) in p {
        for i in 0..n {
            let mut f = e.clone();
            f[i] += 2;
            *out.entry(f).or_insert(0.0) += c;
        }
    }
    out
}

/// Harmonic projection of a homogeneous degree-`h` polynomial in `n` variables:
/// `sum_j c_j |x|^{2j} Δ^j p` with `c_j = (-1)^j / (2^j j! prod_{i<j} (n + 2h - 4 - 2i))`.
fn harmonic_projection(p: &Poly, n: usize, h: usize) -> Poly {
    let mut out = p.clone();
    let mut lap = p.clone();
    let mut c = 1.0;
    for j in 1..=h / 2 {
        lap = laplacian(&lap);
        c *= -1.0 / (2.0 * j as f64 * (n + 2 * h - 2 - 2 * j) as f64);
        let mut term = lap.clone();
        for _ in 0..j {
            term = times_norm_sq(&term, n);
        }
        for (e, v) in term {
            *out.entry(e).or_insert(0.0) += c * v;
        }
    }
    out.retain(|_, v| *v != 0.0);
    out
}

/// Orthonormal basis of degree-`h` harmonics on the unit sphere of `R^n`,
/// as coefficients over the degree-`h` monomials.
fn harmonic_block(n: usize, h: usize) -> (Vec<Vec<u8>>, DMatrix<f64>) {
    let monomials = monomials_of_degree(n, h);
    let index: BTreeMap<&Vec<u8>, usize> = monomials.iter().enumerate().map(|(i, e)| (e, i)).collect();
    let seeds: Vec<&Vec<u8>> = monomials.iter().filter(|e| e[n - 1] <= 1).collect();
    let projected: Vec<Poly> = seeds
        .par_iter()
        .map(|e| harmonic_projection(&Poly::from([((*e).clone(), 1.0)]), n, h))
        .collect();
    let k = seeds.len();
    // <H x^a, H x^b> = <H x^a, x^b> because H is an orthogonal projection
    let mut gram = DMatrix::<f64>::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let v: f64 = projected[a]
                .iter()
                .map(|(e, c)| {
                    let s: Vec<u8> = e.iter().zip(seeds[b]).map(|(x, y)| x + y).collect();
                    c * sphere_moment(n, &s)
                })
                .sum();
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
    }
    let chol = gram.cholesky().expect("harmonic projections are independent");
    let linv = chol.l().try_inverse().expect("triangular factor is invertible");
    let mut raw = DMatrix::<f64>::zeros(k, monomials.len());
    for (r, p) in projected.iter().enumerate() {
        for (e, c) in p {
            raw[(r, index[e])] = *c;
        }
    }
    (monomials, linv * raw)
}
