//! Equidistributed covers of compact symmetric spaces built from word
//! orbits of Haar-random isometries, with the checks that certify them:
//! covering radius, Wasserstein-1 distance to the uniform measure,
//! approximate design discrepancy, the spectral gap of the averaging
//! operator and persistence-diagram stability.

pub mod cloud;
pub mod cover;
pub mod error;
pub mod metrics;
pub mod persistence;
pub mod pipeline;
pub mod rng;
pub mod spaces;
pub mod spectral;

pub use cloud::{PointCloud, Provenance};
pub use error::{Error, Result};
pub use spaces::{make_space, ConstantOverrides, Isometry, Point, SpaceId, SpaceSpec};
