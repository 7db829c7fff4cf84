//! Diagrams of a uniform sample against the diagrams of the cover points
//! it is coupled to by nearest neighbors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::filtration::{distance_matrix, Filtration};
use super::{bottleneck, persistence};
use crate::cloud::{PointCloud, Provenance};
use crate::error::{Error, Result};
use crate::metrics::build_index;
use crate::rng::{stream, TRIAL_STREAM_BASE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub n: usize,
    pub q: usize,
    pub trials: usize,
    /// `sqrt(W1)` of the cover against the uniform measure.
    pub eps_q: f64,
    /// `n * eps_q`, both the bottleneck threshold and the probability bound.
    pub bound: f64,
    /// Trials with `d_B >= n * eps_q`.
    pub violations: usize,
    pub violation_frequency: f64,
    /// Trials with `d_B >= eps_q`, the unnormalized reading of the statement.
    pub raw_exceedances: usize,
    pub raw_frequency: f64,
    pub bottleneck_samples: Vec<f64>,
    /// Largest nearest-neighbor distance of each trial's coupling.
    pub coupling_radius: Vec<f64>,
}

/// Runs `trials` independent trials of `n` uniform points coupled to their
/// nearest cloud points, comparing degree-`q` Rips diagrams.
///
/// Trial `t` draws from stream `TRIAL_STREAM_BASE + t` of `seed`.
pub fn coupled_diagram_experiment(
    cloud: &PointCloud,
    n: usize,
    q: usize,
    trials: usize,
    seed: u64,
    w1_estimate: f64,
) -> Result<CouplingReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter {
            name: "trials",
            reason: "must be at least 1".into(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "must be at least 1".into(),
        });
    }
    if q >= 1 && n > 60 {
        return Err(Error::BudgetExceeded {
            what: "points",
            estimate: n,
            budget: 60,
        });
    }
    if !(w1_estimate >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "w1_estimate",
            reason: format!("must be nonnegative, got {w1_estimate}"),
        });
    }
    let index = build_index(cloud)?;
    let space = *cloud.space();
    let eps_q = w1_estimate.sqrt();
    let bound = n as f64 * eps_q;

    let results: Vec<Result<(f64, f64)>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, TRIAL_STREAM_BASE + t);
            let sample = PointCloud::new(space, space.uniform_points(n, &mut rng), Provenance::external())?;
            let mut radius: f64 = 0.0;
            let mut coupled = Vec::with_capacity(sample.coords().len());
            for p in sample.points() {
                let (j, d) = index.nearest(p);
                radius = radius.max(d);
                coupled.extend_from_slice(cloud.point(j));
            }
            let coupled = PointCloud::new(space, coupled, Provenance::external())?;
            let f1 = Filtration::from_distances(n, &distance_matrix(&sample), q, space.diameter)?;
            let f2 = Filtration::from_distances(n, &distance_matrix(&coupled), q, space.diameter)?;
            Ok((bottleneck(&persistence(&f1), &persistence(&f2), q), radius))
        })
        .collect();
    let mut bottleneck_samples = Vec::with_capacity(trials);
    let mut coupling_radius = Vec::with_capacity(trials);
    for r in results {
        let (b, rad) = r?;
        bottleneck_samples.push(b);
        coupling_radius.push(rad);
    }
    let violations = bottleneck_samples.iter().filter(|&&b| b >= bound).count();
    let raw_exceedances = bottleneck_samples.iter().filter(|&&b| b >= eps_q).count();
    Ok(CouplingReport {
        n,
        q,
        trials,
        eps_q,
        bound,
        violations,
        violation_frequency: violations as f64 / trials as f64,
        raw_exceedances,
        raw_frequency: raw_exceedances as f64 / trials as f64,
        bottleneck_samples,
        coupling_radius,
    })
}
