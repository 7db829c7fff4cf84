//! Eigenbases, truncated heat kernels, design discrepancy and the
//! averaging-operator spectral gap.
//!
//! Heat kernels use `exp(-lambda t)` for the eigenvalue `lambda` of `-Δ`.

mod basis;
mod design;
mod quadrature;

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::cover::Domain;
use crate::error::{Error, Result};
use crate::spaces::{eigenvalues, SpaceId, SpaceSpec};

pub use basis::{build_basis, EigenBasis, EigenBlock, DIMENSION_BUDGET};
pub use design::{
    averaging_matrix, design_discrepancy, spectral_gap_check, AveragingOperator,
    DesignDiscrepancy, GapReport,
};
pub use quadrature::{gauss_jacobi_symmetric, quadrature, so3_rule, sphere_rule, Quadrature};

/// Heat-time convention recorded in reports.
pub const HEAT_CONVENTION: &str = "exp(-lambda*t)";

/// `sum_{lambda <= lambda_max} e^{-lambda t} sum_j phi_j(p) phi_j(x)`.
pub fn heat_kernel_truncated(basis: &EigenBasis, p: &[f64], x: &[f64], t: f64) -> f64 {
    let vp = basis.evaluate(p);
    let vx = basis.evaluate(x);
    basis
        .blocks()
        .iter()
        .map(|b| {
            let s: f64 = b.range().map(|i| vp[i] * vx[i]).sum();
            (-b.lambda * t).exp() * s
        })
        .sum()
}

/// `k_eta = max(2 + 2 log2(1/eta), (d/2) log2 z + d log2 log2 z)` with `z = d / (2 eps^2)`.
pub fn k_eta(epsilon: f64, eta: f64, spec: &SpaceSpec, domain: Domain) -> Result<f64> {
    domain.check_epsilon(epsilon)?;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "eta",
            reason: format!("must be positive, got {eta}"),
        });
    }
    let d = spec.dim_m as f64;
    let z = d / (2.0 * epsilon * epsilon);
    if z <= 1.0 {
        return Err(Error::InvalidEpsilon {
            value: epsilon,
            reason: "d / (2 eps^2) must exceed 1",
        });
    }
    Ok((2.0 + 2.0 * (1.0 / eta).log2()).max(d / 2.0 * z.log2() + d * z.log2().log2()))
}

/// Truncation level `lambda_inf = 4^{k_eta / d}`.
pub fn select_lambda_max(epsilon: f64, eta: f64, spec: &SpaceSpec, domain: Domain) -> Result<f64> {
    let k = k_eta(epsilon, eta, spec, domain)?;
    Ok(4f64.powf(k / spec.dim_m as f64))
}

/// `sum_{lambda > lambda_inf} e^{-2 lambda eps^2} d_lambda`, the L2 mass of
/// the heat kernel at time `eps^2` above the truncation level.
pub fn tail_mass(spec: &SpaceSpec, epsilon: f64, lambda_inf: f64) -> f64 {
    let mut sum = 0.0;
    for (_, lambda, mult) in eigenvalues(spec) {
        if lambda <= lambda_inf {
            continue;
        }
        let term = (-2.0 * lambda * epsilon * epsilon).exp() * mult as f64;
        sum += term;
        if term < 1e-300 || (term < sum * 1e-17 && lambda > 4.0 * lambda_inf) {
            break;
        }
    }
    sum
}

/// Normalized two-sided heat-kernel ratio on `S^2`:
/// `H_p(x, t) t^{d/2} t_{M,p}^{(d - dbar - 1)/2} / exp(-dist^2 / (4t))`
/// with `t_{M,p} = t + diam - dist`. Bounded above and below by constants
/// for the exact kernel; this evaluates it for the truncated kernel.
pub fn heat_ratio_sphere2(basis: &EigenBasis, p: &[f64], x: &[f64], t: f64) -> Result<f64> {
    let spec = basis.space();
    if spec.id != SpaceId::Sphere(2) {
        return Err(Error::UnsupportedSpace(format!("{}", spec.id)));
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("must lie in (0, 1), got {t}"),
        });
    }
    let d = spec.dim_m as f64;
    let dist = spec.distance(p, x);
    let t_mp = t + spec.diameter - dist;
    let h = heat_kernel_truncated(basis, p, x, t);
    Ok(h * t.powf(d / 2.0) * t_mp.powf((d - spec.antipodal_dim as f64 - 1.0) / 2.0)
        / (-dist * dist / (4.0 * t)).exp())
}

/// Parameters making the word orbit an approximate `(lambda_r, 2)`-design.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignParams {
    pub lambda_r: f64,
    pub upsilon: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub k: usize,
    pub ell: usize,
    pub k_real: f64,
    pub ell_real: f64,
}

/// `eps = lambda_r^{-(d+2)/2} C^{-1/4} upsilon^{1/2}`,
/// `|S| = 16 ln2 ln(C lambda_r^{d/2} / delta)` and
/// `ell = log2(1/upsilon) + log2 C + (d/4) log2 lambda_r + (d - (dbar+1)/2) log2(1/eps)`.
pub fn design_parameters(spec: &SpaceSpec, lambda_r: f64, upsilon: f64, delta: f64) -> Result<DesignParams> {
    if !(lambda_r >= 1.0 && lambda_r.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "lambda_r",
            reason: format!("must be at least 1, got {lambda_r}"),
        });
    }
    if !(upsilon > 0.0 && upsilon < 1.0) {
        return Err(Error::InvalidParameter {
            name: "upsilon",
            reason: format!("must lie in (0, 1), got {upsilon}"),
        });
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidDelta(delta));
    }
    let d = spec.dim_m as f64;
    let c = spec.c_m;
    let epsilon = lambda_r.powf(-(d + 2.0) / 2.0) * c.powf(-0.25) * upsilon.sqrt();
    let k_real = 16.0 * LN_2 * (c * lambda_r.powf(d / 2.0) / delta).ln();
    let ell_real = (1.0 / upsilon).log2()
        + c.log2()
        + d / 4.0 * lambda_r.log2()
        + (d - (spec.antipodal_dim as f64 + 1.0) / 2.0) * (1.0 / epsilon).log2();
    Ok(DesignParams {
        lambda_r,
        upsilon,
        delta,
        epsilon,
        k: k_real.ceil().max(1.0) as usize,
        ell: ell_real.ceil().max(1.0) as usize,
        k_real,
        ell_real,
    })
}
