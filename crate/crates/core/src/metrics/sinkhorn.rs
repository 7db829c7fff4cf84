//! Entropic transport in the log domain with epsilon scaling.
//!
//! The reported value is the cost of the Sinkhorn plan after rounding onto
//! the exact transport polytope, hence an upper bound on W1. A feasible dual
//! pair built by c-transforms of the Sinkhorn potentials gives the matching
//! lower bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cost_matrix, same_space, Certificate, TransportMethod, TransportResult};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinkhornOptions {
    pub reg: f64,
    pub max_iters: usize,
    /// Stop once the Euclidean norm of the row-marginal error falls below this.
    pub tol: f64,
    /// Ratio between successive regularization levels while annealing.
    pub scaling: f64,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        SinkhornOptions {
            reg: 0.01,
            max_iters: 10_000,
            tol: 1e-6,
            scaling: 0.5,
        }
    }
}

impl SinkhornOptions {
    pub fn with_reg(reg: f64) -> Self {
        SinkhornOptions {
            reg,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.reg > 0.0 && self.reg.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "reg",
                reason: format!("must be positive, got {}", self.reg),
            });
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "tol",
                reason: format!("must be positive, got {}", self.tol),
            });
        }
        if !(self.scaling > 0.0 && self.scaling < 1.0) {
            return Err(Error::InvalidParameter {
                name: "scaling",
                reason: format!("must lie in (0, 1), got {}", self.scaling),
            });
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iters",
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }
}

/// Sinkhorn estimate of W1 between the uniform measures on two clouds.
///
/// Fails with [`Error::NoConvergence`] when the marginal error is still
/// above `tol` after `max_iters` iterations at the target regularization;
/// the error carries the bounds obtained from the last iterate.
pub fn wasserstein1_sinkhorn(
    mu: &PointCloud,
    nu: &PointCloud,
    opts: &SinkhornOptions,
) -> Result<TransportResult> {
    opts.validate()?;
    let (n, m) = (mu.len(), nu.len());
    if n == 0 || m == 0 {
        return Err(Error::EmptyCloud);
    }
    same_space(mu, nu)?;
    let cost = cost_matrix(mu, nu);
    solve(n, m, &cost, opts)
}

pub(crate) fn solve(n: usize, m: usize, cost: &[f64], opts: &SinkhornOptions) -> Result<TransportResult> {
    let mut state = Potentials {
        n,
        m,
        cost,
        f: vec![0.0; n],
        g: vec![0.0; m],
        log_a: -(n as f64).ln(),
        log_b: -(m as f64).ln(),
    };
    let max_cost = cost.iter().fold(0.0f64, |a, &c| a.max(c));

    let mut reg = max_cost.max(opts.reg);
    while reg > opts.reg {
        state.iterate(reg, opts.tol, 1000);
        reg = (reg * opts.scaling).max(opts.reg);
        if reg == opts.reg {
            break;
        }
    }
    let (iterations, err) = state.iterate(opts.reg, opts.tol, opts.max_iters);
    let result = state.bounds(opts.reg);
    if err > opts.tol {
        return Err(Error::NoConvergence {
            iterations,
            marginal_error: err,
            best: Box::new(result),
        });
    }
    Ok(result)
}

struct Potentials<'a> {
    n: usize,
    m: usize,
    cost: &'a [f64],
    f: Vec<f64>,
    g: Vec<f64>,
    log_a: f64,
    log_b: f64,
}

const COL_BLOCK: usize = 64;
const ROW_BLOCK: usize = 64;

impl Potentials<'_> {
    fn row(&self, i: usize) -> &[f64] {
        &self.cost[i * self.m..(i + 1) * self.m]
    }

    fn update_f(&mut self, reg: f64) {
        let g = &self.g;
        let log_a = self.log_a;
        let f: Vec<f64> = (0..self.n)
            .into_par_iter()
            .map(|i| {
                let row = self.row(i);
                let mx = row
                    .iter()
                    .zip(g)
                    .fold(f64::NEG_INFINITY, |a, (&c, &gj)| a.max(gj - c));
                let s: f64 = row.iter().zip(g).map(|(&c, &gj)| ((gj - c - mx) / reg).exp()).sum();
                reg * log_a - mx - reg * s.ln()
            })
            .collect();
        self.f = f;
    }

    fn update_g(&mut self, reg: f64) {
        let (n, m) = (self.n, self.m);
        let f = &self.f;
        let cost = self.cost;
        let log_b = self.log_b;
        let blocks: Vec<Vec<f64>> = (0..m.div_ceil(COL_BLOCK))
            .into_par_iter()
            .map(|b| {
                let j0 = b * COL_BLOCK;
                let j1 = (j0 + COL_BLOCK).min(m);
                let mut mx = vec![f64::NEG_INFINITY; j1 - j0];
                for i in 0..n {
                    let row = &cost[i * m + j0..i * m + j1];
                    for (x, &c) in mx.iter_mut().zip(row) {
                        *x = x.max(f[i] - c);
                    }
                }
                let mut s = vec![0.0; j1 - j0];
                for i in 0..n {
                    let row = &cost[i * m + j0..i * m + j1];
                    for ((acc, &c), &x) in s.iter_mut().zip(row).zip(&mx) {
                        *acc += ((f[i] - c - x) / reg).exp();
                    }
                }
                mx.iter()
                    .zip(&s)
                    .map(|(&x, &sum)| reg * log_b - x - reg * sum.ln())
                    .collect()
            })
            .collect();
        self.g = blocks.concat();
    }

    /// Euclidean distance between the row marginal of the current plan and `a`.
    fn row_error(&self, reg: f64) -> f64 {
        let a = self.log_a.exp();
        (0..self.n)
            .into_par_iter()
            .map(|i| {
                let fi = self.f[i];
                let s: f64 = self
                    .row(i)
                    .iter()
                    .zip(&self.g)
                    .map(|(&c, &gj)| ((fi + gj - c) / reg).exp())
                    .sum();
                (s - a) * (s - a)
            })
            .collect::<Vec<_>>()
            .iter()
            .sum::<f64>()
            .sqrt()
    }

    fn iterate(&mut self, reg: f64, tol: f64, max_iters: usize) -> (usize, f64) {
        let mut err = f64::INFINITY;
        for it in 1..=max_iters {
            self.update_f(reg);
            self.update_g(reg);
            if it % 10 == 0 || it == max_iters {
                err = self.row_error(reg);
                if err <= tol {
                    return (it, err);
                }
            }
        }
        (max_iters, err)
    }

    /// Rounded primal cost and c-transform dual objective.
    fn bounds(&self, reg: f64) -> TransportResult {
        let (n, m) = (self.n, self.m);
        let a = self.log_a.exp();
        let b = self.log_b.exp();

        let plan_row = |i: usize| -> Vec<f64> {
            let fi = self.f[i];
            self.row(i)
                .iter()
                .zip(&self.g)
                .map(|(&c, &gj)| ((fi + gj - c) / reg).exp())
                .collect()
        };

        // Row scaling onto the row constraint.
        let x: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let s: f64 = plan_row(i).iter().sum();
                if s > a { a / s } else { 1.0 }
            })
            .collect();
        // Column sums after row scaling, accumulated over fixed row blocks
        // so the summation order does not depend on the thread count.
        let partials: Vec<Vec<f64>> = (0..n.div_ceil(ROW_BLOCK))
            .into_par_iter()
            .map(|blk| {
                let mut acc = vec![0.0; m];
                for i in blk * ROW_BLOCK..((blk + 1) * ROW_BLOCK).min(n) {
                    for (c, p) in acc.iter_mut().zip(plan_row(i)) {
                        *c += x[i] * p;
                    }
                }
                acc
            })
            .collect();
        let mut col = vec![0.0; m];
        for part in partials {
            col.iter_mut().zip(part).for_each(|(a, p)| *a += p);
        }
        let y: Vec<f64> = col.iter().map(|&s| if s > b { b / s } else { 1.0 }).collect();

        let (row_sums, scaled_cost): (Vec<f64>, Vec<f64>) = (0..n)
            .into_par_iter()
            .map(|i| {
                let p = plan_row(i);
                let mut rs = 0.0;
                let mut cs = 0.0;
                for ((&pij, &yj), &c) in p.iter().zip(&y).zip(self.row(i)) {
                    let q = x[i] * pij * yj;
                    rs += q;
                    cs += q * c;
                }
                (rs, cs)
            })
            .unzip();
        let col_sums: Vec<f64> = col.iter().zip(&y).map(|(&s, &yj)| s * yj).collect();
        let err_r: Vec<f64> = row_sums.iter().map(|&s| (a - s).max(0.0)).collect();
        let err_c: Vec<f64> = col_sums.iter().map(|&s| (b - s).max(0.0)).collect();
        let mass: f64 = err_r.iter().sum();
        let mut value: f64 = scaled_cost.iter().sum();
        if mass > 0.0 {
            let correction: f64 = (0..n)
                .into_par_iter()
                .map(|i| {
                    if err_r[i] == 0.0 {
                        return 0.0;
                    }
                    err_r[i] * self.row(i).iter().zip(&err_c).map(|(&c, &e)| c * e).sum::<f64>()
                })
                .collect::<Vec<_>>()
                .iter()
                .sum();
            value += correction / mass;
        }

        // c-transforms: f_i = min_j (c_ij - g_j), then g_j = min_i (c_ij - f_i).
        let f: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(&self.g)
                    .fold(f64::INFINITY, |acc, (&c, &gj)| acc.min(c - gj))
            })
            .collect();
        let mut g = vec![f64::INFINITY; m];
        for i in 0..n {
            for (gj, &c) in g.iter_mut().zip(self.row(i)) {
                *gj = gj.min(c - f[i]);
            }
        }
        let dual = f.iter().sum::<f64>() * a + g.iter().sum::<f64>() * b;

        TransportResult {
            value,
            method: TransportMethod::Sinkhorn { reg },
            gap_bound: (value - dual).max(0.0),
            certificate: Some(Certificate::Potentials { f, g }),
        }
    }
}
