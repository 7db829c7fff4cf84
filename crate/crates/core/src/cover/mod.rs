//! Word-orbit covers: parameter calculators, generator alphabets and the
//! enumeration of `S^ell p` for `S = gens ∪ gens^{-1}`.

mod enumerate;
mod params;

use crate::rng::{stream, ALPHABET_STREAM};
use crate::spaces::{haar_sample, Isometry, SpaceSpec};

pub use enumerate::{enumerate_cloud, word_count, EnumerateOptions, DEFAULT_CAP};
pub use params::{
    a_d, alphabet_size, alphabet_size_real, alphabet_size_v1, alphabet_size_v1_real,
    epsilon_ceiling, r_target, word_length, word_length_real, word_length_v1,
    word_length_v1_real, CoverParams, Domain, FormulaVariant,
};

/// `k` Haar-random generators with their inverses.
///
/// Symbols are ordered generators first, then inverses: symbol `i < k` is
/// `generators[i]` and symbol `k + i` is `inverses[i]`.
#[derive(Clone, Debug)]
pub struct Alphabet {
    pub space: SpaceSpec,
    pub generators: Vec<Isometry>,
    pub inverses: Vec<Isometry>,
    pub seed: u64,
}

impl Alphabet {
    pub fn from_generators(space: SpaceSpec, generators: Vec<Isometry>, seed: u64) -> Self {
        let inverses = generators.iter().map(Isometry::invert).collect();
        Alphabet {
            space,
            generators,
            inverses,
            seed,
        }
    }

    pub fn k(&self) -> usize {
        self.generators.len()
    }

    /// The `2k` symbols in enumeration order.
    pub fn symbols(&self) -> impl Iterator<Item = &Isometry> {
        self.generators.iter().chain(self.inverses.iter())
    }

    pub fn symbol(&self, i: usize) -> &Isometry {
        let k = self.k();
        if i < k {
            &self.generators[i]
        } else {
            &self.inverses[i - k]
        }
    }
}

/// Draws `k` independent Haar isometries from the alphabet stream of `seed`.
pub fn generate_alphabet(spec: &SpaceSpec, k: usize, seed: u64) -> Alphabet {
    let mut rng = stream(seed, ALPHABET_STREAM);
    let generators = (0..k).map(|_| haar_sample(spec, &mut rng)).collect();
    Alphabet::from_generators(*spec, generators, seed)
}
