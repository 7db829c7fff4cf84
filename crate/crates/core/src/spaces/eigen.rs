use super::{SpaceId, SpaceSpec};

fn binomial(n: i64, k: i64) -> u64 {
    if k < 0 || n < k || n < 0 {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

/// The eigenvalues of `-Δ` in increasing order as `(degree, lambda, multiplicity)`.
///
/// `S^d`: `lambda_h = h(h + d - 1)` with the dimension of degree-`h`
/// harmonic polynomials; `SO(3)`: `lambda_j = j(j + 1)` with multiplicity
/// `(2j + 1)^2`.
pub fn eigenvalues(spec: &SpaceSpec) -> impl Iterator<Item = (usize, f64, usize)> {
    let id = spec.id;
    (0usize..).map(move |h| match id {
        SpaceId::Sphere(d) => {
            let lambda = (h * (h + d - 1)) as f64;
            let (h, d) = (h as i64, d as i64);
            let mult = binomial(h + d, d) - binomial(h + d - 2, d);
            (h as usize, lambda, mult as usize)
        }
        SpaceId::So3 => ((h), (h * (h + 1)) as f64, (2 * h + 1) * (2 * h + 1)),
    })
}

/// Eigenvalues up to `max_lambda` with multiplicities, starting with `(0, 1)`.
pub fn eigen_data(spec: &SpaceSpec, max_lambda: f64) -> Vec<(f64, usize)> {
    eigenvalues(spec)
        .take_while(|&(_, lambda, _)| lambda <= max_lambda)
        .map(|(_, lambda, mult)| (lambda, mult))
        .collect()
}

/// Total multiplicity of eigenvalues `<= max_lambda`, i.e. `dim E_lambda`.
pub fn multiplicity_count(spec: &SpaceSpec, max_lambda: f64) -> usize {
    eigen_data(spec, max_lambda).iter().map(|(_, m)| m).sum()
}
