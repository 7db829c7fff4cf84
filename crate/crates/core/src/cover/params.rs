//! Alphabet size, word length and target radius of the word-orbit cover.

use std::f64::consts::{E, LN_2, PI};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::spaces::SpaceSpec;

/// Upper end `2^{-e}` of the admissible epsilon range.
pub fn epsilon_ceiling() -> f64 {
    2f64.powf(-E)
}

/// Which epsilon range the calculators accept.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// `epsilon in (0, 2^{-e})`, where the guarantees are stated.
    #[default]
    Strict,
    /// `epsilon in (0, 1)`; results carry no guarantee.
    Exploratory,
}

impl Domain {
    pub fn check_epsilon(self, epsilon: f64) -> Result<()> {
        let upper = match self {
            Domain::Strict => epsilon_ceiling(),
            Domain::Exploratory => 1.0,
        };
        if epsilon > 0.0 && epsilon < upper {
            Ok(())
        } else {
            Err(Error::InvalidEpsilon {
                value: epsilon,
                reason: match self {
                    Domain::Strict => "must lie in (0, 2^-e)",
                    Domain::Exploratory => "must lie in (0, 1)",
                },
            })
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidDelta(delta))
    }
}

fn ceil_positive(x: f64) -> usize {
    x.ceil().max(1.0) as usize
}

/// `d / (2 eps^2)`, the argument of the iterated logarithms; must exceed 1.
fn scale_ratio(epsilon: f64, spec: &SpaceSpec) -> Result<f64> {
    let z = spec.dim_m as f64 / (2.0 * epsilon * epsilon);
    if z > 1.0 {
        Ok(z)
    } else {
        Err(Error::InvalidEpsilon {
            value: epsilon,
            reason: "d / (2 eps^2) must exceed 1",
        })
    }
}

/// Target covering radius `2 eps sqrt(ln(3 C / eps^{2d - dbar - 1}))`.
pub fn r_target(epsilon: f64, spec: &SpaceSpec) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidEpsilon {
            value: epsilon,
            reason: "must lie in (0, 1)",
        });
    }
    let exponent = (2 * spec.dim_m) as f64 - spec.antipodal_dim as f64 - 1.0;
    let log_arg = (3.0 * spec.c_m).ln() - exponent * epsilon.ln();
    if log_arg <= 0.0 {
        return Err(Error::InvalidEpsilon {
            value: epsilon,
            reason: "log argument of the target radius must exceed 1",
        });
    }
    Ok(2.0 * epsilon * log_arg.sqrt())
}

/// Real-valued alphabet size before rounding.
pub fn alphabet_size_real(epsilon: f64, delta: f64, spec: &SpaceSpec, domain: Domain) -> Result<f64> {
    domain.check_epsilon(epsilon)?;
    check_delta(delta)?;
    let d = spec.dim_m as f64;
    let z = scale_ratio(epsilon, spec)?;
    let bracket = spec.c_m.ln() + d / 4.0 * z.log2() + d / 2.0 * z.log2().log2()
        - (E * delta).ln();
    Ok(16.0 * LN_2 * bracket)
}

/// Number of independent Haar generators `|S|`, rounded up.
pub fn alphabet_size(epsilon: f64, delta: f64, spec: &SpaceSpec, domain: Domain) -> Result<usize> {
    alphabet_size_real(epsilon, delta, spec, domain).map(ceil_positive)
}

pub fn word_length_real(epsilon: f64, spec: &SpaceSpec, domain: Domain) -> Result<f64> {
    domain.check_epsilon(epsilon)?;
    let d = spec.dim_m as f64;
    let r = r_target(epsilon, spec)?;
    Ok((d - (spec.antipodal_dim as f64 + 1.0) / 2.0) * (1.0 / epsilon).log2()
        + (6.0 * spec.c_m / spec.v_m).log2()
        + d / 4.0 * (1.0 / (PI * r * r)).log2()
        + 0.5 * ln_gamma(d / 2.0 + 1.0) / LN_2)
}

/// Word length `ell`, rounded up.
pub fn word_length(epsilon: f64, spec: &SpaceSpec, domain: Domain) -> Result<usize> {
    word_length_real(epsilon, spec, domain).map(ceil_positive)
}

/// The alternative alphabet-size bound of the overview formulas,
/// which involves `Gamma(d/2 + 1)` and the volume constant.
pub fn alphabet_size_v1_real(
    epsilon: f64,
    delta: f64,
    spec: &SpaceSpec,
    domain: Domain,
) -> Result<f64> {
    domain.check_epsilon(epsilon)?;
    check_delta(delta)?;
    let d = spec.dim_m as f64;
    let bracket = 2.0 * spec.c_m.ln()
        + (6.0 / delta).ln()
        + ln_gamma(d / 2.0 + 1.0)
        + d / 2.0 * (1.0 / (PI * epsilon)).ln()
        + (1.0 / spec.v_m).ln();
    Ok(16.0 * LN_2 * bracket)
}

pub fn alphabet_size_v1(epsilon: f64, delta: f64, spec: &SpaceSpec, domain: Domain) -> Result<usize> {
    alphabet_size_v1_real(epsilon, delta, spec, domain).map(ceil_positive)
}

/// `a_d = 2 log2 log2(5d) / log2(5d)`.
pub fn a_d(d: usize) -> f64 {
    let l = (5.0 * d as f64).log2();
    2.0 * l.log2() / l
}

/// The alternative word-length bound `(d/2) log2(1/(r eps)) + (4 + 3 a_d) d log2(1/eps)`
/// with `r` the target radius.
pub fn word_length_v1_real(epsilon: f64, spec: &SpaceSpec, domain: Domain) -> Result<f64> {
    domain.check_epsilon(epsilon)?;
    let d = spec.dim_m as f64;
    let r = r_target(epsilon, spec)?;
    Ok(d / 2.0 * (1.0 / (r * epsilon)).log2()
        + (4.0 + 3.0 * a_d(spec.dim_m)) * d * (1.0 / epsilon).log2())
}

pub fn word_length_v1(epsilon: f64, spec: &SpaceSpec, domain: Domain) -> Result<usize> {
    word_length_v1_real(epsilon, spec, domain).map(ceil_positive)
}

/// Formula family used for `k` and `ell`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaVariant {
    /// The detailed cover bounds (the default).
    #[default]
    Main,
    /// The coarser overview bounds.
    Overview,
}

/// Resolved parameters of one cover construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverParams {
    pub epsilon: f64,
    pub delta: f64,
    pub k: usize,
    pub ell: usize,
    pub r_target: f64,
    pub space: SpaceSpec,
    pub variant: FormulaVariant,
    /// Set when epsilon lies outside `(0, 2^{-e})`.
    pub exploratory: bool,
}

impl CoverParams {
    pub fn compute(
        spec: &SpaceSpec,
        epsilon: f64,
        delta: f64,
        domain: Domain,
        variant: FormulaVariant,
    ) -> Result<Self> {
        let (k, ell) = match variant {
            FormulaVariant::Main => (
                alphabet_size(epsilon, delta, spec, domain)?,
                word_length(epsilon, spec, domain)?,
            ),
            FormulaVariant::Overview => (
                alphabet_size_v1(epsilon, delta, spec, domain)?,
                word_length_v1(epsilon, spec, domain)?,
            ),
        };
        Ok(CoverParams {
            epsilon,
            delta,
            k,
            ell,
            r_target: r_target(epsilon, spec)?,
            space: *spec,
            variant,
            exploratory: Domain::Strict.check_epsilon(epsilon).is_err(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{make_space, ConstantOverrides, SpaceId};

    fn s2() -> SpaceSpec {
        make_space(SpaceId::Sphere(2), &ConstantOverrides::default()).unwrap()
    }

    #[test]
    fn target_radius_direct_evaluation() {
        let r = r_target(0.05, &s2()).unwrap();
        let direct = 2.0 * 0.05 * (3.0f64 / 0.05f64.powi(3)).ln().sqrt();
        assert!((r - direct).abs() < 1e-15);
    }

    #[test]
    fn target_radius_when_log_argument_is_e() {
        // 3 c = eps^3 e  ->  r = 2 eps
        let eps = 0.5f64;
        let c = eps.powi(3) * E / 3.0;
        let spec = make_space(
            SpaceId::Sphere(2),
            &ConstantOverrides {
                c_m: Some(c),
                ..Default::default()
            },
        )
        .unwrap();
        assert!((r_target(eps, &spec).unwrap() - 2.0 * eps).abs() < 1e-14);
    }

    #[test]
    fn target_radius_grows_with_constant() {
        let doubled = make_space(
            SpaceId::Sphere(2),
            &ConstantOverrides {
                c_m: Some(2.0),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(r_target(0.05, &doubled).unwrap() > r_target(0.05, &s2()).unwrap());
    }

    #[test]
    fn target_radius_rejects_small_log_argument() {
        let tiny = make_space(
            SpaceId::Sphere(2),
            &ConstantOverrides {
                c_m: Some(1e-6),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(matches!(r_target(0.9, &tiny), Err(Error::InvalidEpsilon { .. })));
    }

    #[test]
    fn halving_delta_adds_sixteen_ln2_squared() {
        let a = alphabet_size_real(0.05, 0.1, &s2(), Domain::Strict).unwrap();
        let b = alphabet_size_real(0.05, 0.05, &s2(), Domain::Strict).unwrap();
        assert!((b - a - 16.0 * LN_2 * LN_2).abs() < 1e-12);
        let (ka, kb) = (a.ceil() as i64, b.ceil() as i64);
        assert!((kb - ka - 8).abs() <= 1);
    }

    #[test]
    fn monotone_in_epsilon() {
        let spec = s2();
        let grid = [0.01, 0.02, 0.03, 0.04, 0.05, 0.06];
        let ks: Vec<usize> = grid
            .iter()
            .map(|&e| alphabet_size(e, 0.1, &spec, Domain::Strict).unwrap())
            .collect();
        let ells: Vec<usize> = grid
            .iter()
            .map(|&e| word_length(e, &spec, Domain::Strict).unwrap())
            .collect();
        assert!(ks.windows(2).all(|w| w[0] >= w[1]), "{ks:?}");
        assert!(ells.windows(2).all(|w| w[0] >= w[1]), "{ells:?}");
    }

    #[test]
    fn gamma_term_vanishes_in_dimension_two() {
        assert!(ln_gamma(2.0).abs() < 1e-15);
    }

    #[test]
    fn domain_checks() {
        let spec = s2();
        assert!(matches!(
            alphabet_size(0.2, 0.1, &spec, Domain::Strict),
            Err(Error::InvalidEpsilon { .. })
        ));
        assert!(alphabet_size(0.2, 0.1, &spec, Domain::Exploratory).is_ok());
        assert!(matches!(
            alphabet_size(0.05, 0.5, &spec, Domain::Strict),
            Err(Error::InvalidDelta(_))
        ));
        assert!(matches!(
            word_length(0.0, &spec, Domain::Strict),
            Err(Error::InvalidEpsilon { .. })
        ));
        let p = CoverParams::compute(&spec, 0.2, 0.1, Domain::Exploratory, FormulaVariant::Main)
            .unwrap();
        assert!(p.exploratory);
    }
}
