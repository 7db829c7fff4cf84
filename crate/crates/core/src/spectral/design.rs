//! Design discrepancy and the averaging operators
//! `A_s f(x) = f(x)/2 + (f(s x) + f(s^{-1} x))/4`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::basis::EigenBasis;
use super::quadrature::Quadrature;
use crate::cloud::PointCloud;
use crate::cover::Alphabet;
use crate::error::{Error, Result};
use crate::spaces::Isometry;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignDiscrepancy {
    /// `sup |mean_cloud(phi) - ∫ phi|` over unit-norm `phi` with eigenvalue `<= lambda_r`.
    pub worst: f64,
    /// Block-wise norms as `(lambda, value)`.
    pub per_block: Vec<(f64, f64)>,
}

/// Worst-case integration error of the cloud's uniform measure on the
/// band-limited space, computed exactly as the norm of the moment vector.
pub fn design_discrepancy(cloud: &PointCloud, basis: &EigenBasis, lambda_r: f64) -> Result<DesignDiscrepancy> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if lambda_r > basis.lambda_max() {
        return Err(Error::BasisTooSmall {
            needed: lambda_r,
            available: basis.lambda_max(),
        });
    }
    if cloud.space() != basis.space() {
        return Err(Error::DimensionMismatch {
            expected: basis.space().ambient_dim,
            got: cloud.dim(),
        });
    }
    let phi = basis.evaluate_rows(cloud.coords());
    let n = cloud.len() as f64;
    let means: Vec<f64> = (0..basis.total_dim())
        .map(|j| phi.column(j).iter().sum::<f64>() / n)
        .collect();
    let per_block: Vec<(f64, f64)> = basis
        .blocks()
        .iter()
        .filter(|b| b.lambda <= lambda_r)
        .map(|b| {
            let sq: f64 = b
                .range()
                .map(|i| {
                    let m = if b.lambda == 0.0 { means[i] - 1.0 } else { means[i] };
                    m * m
                })
                .sum();
            (b.lambda, sq.sqrt())
        })
        .collect();
    let worst = per_block.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
    Ok(DesignDiscrepancy { worst, per_block })
}

/// Reusable quadrature data for representing `A_s` in an eigenbasis.
pub struct AveragingOperator<'a> {
    basis: &'a EigenBasis,
    rule: Quadrature,
    /// `phi(x_q) w_q`, one column per node.
    weighted_t: DMatrix<f64>,
}

impl<'a> AveragingOperator<'a> {
    pub fn new(basis: &'a EigenBasis) -> Self {
        let rule = basis.product_rule();
        let flat: Vec<f64> = rule.nodes().flatten().copied().collect();
        let mut phi = basis.evaluate_rows(&flat);
        for (i, w) in rule.weights().iter().enumerate() {
            phi.row_mut(i).scale_mut(*w);
        }
        AveragingOperator {
            basis,
            rule,
            weighted_t: phi.transpose(),
        }
    }

    fn moved(&self, iso: &Isometry) -> DMatrix<f64> {
        let dim = self.basis.space().ambient_dim;
        let mut flat = vec![0.0; self.rule.len() * dim];
        for (node, out) in self.rule.nodes().zip(flat.chunks_exact_mut(dim)) {
            iso.apply_into(node, out);
        }
        self.basis.evaluate_rows(&flat)
    }

    /// Matrix `M[i][j] = <A_s phi_j, phi_i>`.
    pub fn matrix(&self, iso: &Isometry) -> DMatrix<f64> {
        let forward = &self.weighted_t * self.moved(iso);
        let backward = &self.weighted_t * self.moved(&iso.invert());
        let n = self.basis.total_dim();
        DMatrix::<f64>::identity(n, n) * 0.5 + (forward + backward) * 0.25
    }
}

pub fn averaging_matrix(basis: &EigenBasis, iso: &Isometry) -> DMatrix<f64> {
    AveragingOperator::new(basis).matrix(iso)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub min_eig: f64,
    pub max_eig: f64,
    pub pass: bool,
}

/// Eigenvalue range of `(1/k) sum_s A_s` on the nonconstant eigenfunctions;
/// passes when it lies in `[1/4, 3/4]`.
pub fn spectral_gap_check(alphabet: &Alphabet, basis: &EigenBasis) -> Result<GapReport> {
    if alphabet.generators.is_empty() {
        return Err(Error::InvalidParameter {
            name: "alphabet",
            reason: "must contain at least one generator".into(),
        });
    }
    let skip: usize = basis
        .blocks()
        .iter()
        .filter(|b| b.lambda == 0.0)
        .map(|b| b.dim)
        .sum();
    let n = basis.total_dim() - skip;
    if n == 0 {
        return Err(Error::BasisTooSmall {
            needed: f64::MIN_POSITIVE,
            available: basis.lambda_max(),
        });
    }
    let op = AveragingOperator::new(basis);
    let mut mean = DMatrix::<f64>::zeros(n, n);
    for g in &alphabet.generators {
        mean += op.matrix(g).view((skip, skip), (n, n));
    }
    mean /= alphabet.generators.len() as f64;
    let sym = (&mean + mean.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym).eigenvalues;
    let min_eig = eig.min();
    let max_eig = eig.max();
    Ok(GapReport {
        min_eig,
        max_eig,
        pass: min_eig >= 0.25 - 1e-8 && max_eig <= 0.75 + 1e-8,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::Provenance;
    use crate::cover::generate_alphabet;
    use crate::rng::stream;
    use crate::spaces::{haar_sample, make_space, ConstantOverrides, SpaceId, SpaceSpec};
    use crate::spectral::build_basis;

    fn spec(id: SpaceId) -> SpaceSpec {
        make_space(id, &ConstantOverrides::default()).unwrap()
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
        PointCloud::new(spec(SpaceId::Sphere(2)), coords, Provenance::external()).unwrap()
    }

    #[test]
    fn octahedron_is_a_two_design() {
        let b = build_basis(&spec(SpaceId::Sphere(2)), 6.0).unwrap();
        let d = design_discrepancy(&octahedron(), &b, 6.0).unwrap();
        assert_eq!(d.per_block.len(), 3);
        assert!(d.per_block[0].1.abs() < 1e-12);
        assert!(d.per_block[1].1 < 1e-12);
        assert!(d.per_block[2].1 < 1e-12);
        assert!(d.worst < 1e-12);
    }

    #[test]
    fn single_point_discrepancy() {
        for id in [SpaceId::Sphere(1), SpaceId::Sphere(2), SpaceId::Sphere(3), SpaceId::So3] {
            let s = spec(id);
            let b = build_basis(&s, 12.0).unwrap();
            let mut rng = stream(100, 0);
            let p = s.uniform_sample(&mut rng);
            let cloud = PointCloud::new(s, p.into_coords(), Provenance::external()).unwrap();
            let d = design_discrepancy(&cloud, &b, 12.0).unwrap();
            let expected = ((b.total_dim() - 1) as f64).sqrt();
            assert!((d.worst - expected).abs() < 1e-8, "{id:?}");
            assert!(d.per_block[0].1 < 1e-12);
        }
    }

    #[test]
    fn discrepancy_needs_large_enough_basis() {
        let b = build_basis(&spec(SpaceId::Sphere(2)), 6.0).unwrap();
        assert!(matches!(
            design_discrepancy(&octahedron(), &b, 12.0),
            Err(Error::BasisTooSmall { .. })
        ));
    }

    #[test]
    fn identity_gives_identity() {
        for id in [SpaceId::Sphere(2), SpaceId::So3] {
            let s = spec(id);
            let b = build_basis(&s, 6.0).unwrap();
            let m = averaging_matrix(&b, &Isometry::identity(&s));
            let n = b.total_dim();
            assert!((m - DMatrix::<f64>::identity(n, n)).amax() < 1e-10);
        }
    }

    #[test]
    fn averaging_matrices_are_block_diagonal_contractions() {
        for id in [SpaceId::Sphere(1), SpaceId::Sphere(2), SpaceId::Sphere(3), SpaceId::So3] {
            let s = spec(id);
            let b = build_basis(&s, 12.0).unwrap();
            let op = AveragingOperator::new(&b);
            let mut rng = stream(101, 0);
            for _ in 0..5 {
                let m = op.matrix(&haar_sample(&s, &mut rng));
                assert!((&m - m.transpose()).amax() < 1e-8);
                for bi in b.blocks() {
                    for bj in b.blocks() {
                        if bi.degree != bj.degree {
                            assert!(m.view((bi.start, bj.start), (bi.dim, bj.dim)).amax() < 1e-8);
                        }
                    }
                }
                let eig = SymmetricEigen::new((&m + m.transpose()) * 0.5).eigenvalues;
                assert!(eig.min() >= -1e-8 && eig.max() <= 1.0 + 1e-8, "{id:?}");
            }
        }
    }

    #[test]
    fn haar_average_is_half_identity() {
        let s = spec(SpaceId::Sphere(2));
        let b = build_basis(&s, 12.0).unwrap();
        let op = AveragingOperator::new(&b);
        let mut rng = stream(102, 0);
        let n = b.total_dim() - 1;
        let mut mean = DMatrix::<f64>::zeros(n, n);
        for _ in 0..2000 {
            mean += op.matrix(&haar_sample(&s, &mut rng)).view((1, 1), (n, n));
        }
        mean /= 2000.0;
        let diff = mean - DMatrix::<f64>::identity(n, n) * 0.5;
        let norm = SymmetricEigen::new((&diff + diff.transpose()) * 0.5)
            .eigenvalues
            .amax();
        assert!(norm <= 0.1, "{norm}");
    }

    #[test]
    fn gap_check_identity_alphabet_fails() {
        let s = spec(SpaceId::Sphere(2));
        let b = build_basis(&s, 12.0).unwrap();
        let alphabet = Alphabet::from_generators(s, vec![Isometry::identity(&s)], 0);
        let r = spectral_gap_check(&alphabet, &b).unwrap();
        assert!((r.min_eig - 1.0).abs() < 1e-10 && (r.max_eig - 1.0).abs() < 1e-10);
        assert!(!r.pass);
    }

    #[test]
    fn gap_check_large_alphabet_passes() {
        let s = spec(SpaceId::Sphere(2));
        let b = build_basis(&s, 12.0).unwrap();
        let alphabet = generate_alphabet(&s, 200, 5);
        let r = spectral_gap_check(&alphabet, &b).unwrap();
        assert!(r.min_eig >= 0.0 && r.max_eig <= 1.0);
        assert!(r.pass, "{r:?}");
    }
}
