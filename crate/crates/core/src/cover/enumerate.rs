use std::collections::HashMap;

use rayon::prelude::*;

use super::Alphabet;
use crate::cloud::{CloudKind, PointCloud, Provenance};
use crate::error::{Error, Result};
use crate::spaces::{Isometry, Point, SpaceSpec};

/// Default emission cap, `2^20` points.
pub const DEFAULT_CAP: usize = 1 << 20;

/// Words per work unit. Chunk boundaries are fixed, so the output does not
/// depend on the number of threads.
const CHUNK_WORDS: u64 = 1 << 13;
/// Chunks generated concurrently before they are fed, in order, to the sink.
const CHUNKS_PER_BATCH: u64 = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnumerateOptions {
    /// Stop after this many emitted points.
    pub cap: Option<usize>,
    /// Drop points within this geodesic distance of an emitted point; 0 keeps the multiset.
    pub dedup_tol: f64,
}

impl Default for EnumerateOptions {
    fn default() -> Self {
        EnumerateOptions {
            cap: Some(DEFAULT_CAP),
            dedup_tol: 0.0,
        }
    }
}

/// `(2k)^ell` as a float (may exceed `u64`).
pub fn word_count(k: usize, ell: usize) -> f64 {
    ((2 * k) as f64).powi(ell as i32)
}

/// Emits `w · base` for every word `w = s_1 ... s_ell` over the `2k`
/// symbols, in lexicographic order of `(s_1, ..., s_ell)`.
///
/// Each work chunk keeps the prefix isometries `s_1 ... s_j` on a stack and
/// the images `s · base` of the last symbol, so a word costs one
/// application plus an amortized `1/(2k)` composition.
pub fn enumerate_cloud(
    alphabet: &Alphabet,
    ell: usize,
    base: &Point,
    opts: EnumerateOptions,
) -> Result<PointCloud> {
    let spec = alphabet.space;
    if ell == 0 {
        return Err(Error::InvalidParameter {
            name: "ell",
            reason: "word length must be at least 1".into(),
        });
    }
    if alphabet.k() == 0 {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: "alphabet is empty".into(),
        });
    }
    if opts.cap == Some(0) {
        return Err(Error::CapZero);
    }
    if !(opts.dedup_tol >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "dedup_tol",
            reason: format!("must be nonnegative, got {}", opts.dedup_tol),
        });
    }
    spec.check_point(base.coords())?;
    let symbols = 2 * alphabet.k() as u64;
    let total = (0..ell).try_fold(1u64, |acc, _| acc.checked_mul(symbols));
    let total = match (total, opts.cap) {
        (Some(t), _) if t <= 1 << 63 => t,
        (_, Some(_)) => u64::MAX,
        (_, None) => {
            return Err(Error::OverflowGuard {
                words: word_count(alphabet.k(), ell),
            })
        }
    };

    let dim = spec.ambient_dim;
    let last_images: Vec<Vec<f64>> = alphabet
        .symbols()
        .map(|s| s.apply(base).into_coords())
        .collect();
    let walker = Walker {
        alphabet,
        ell,
        symbols,
        last_images: &last_images,
        dim,
    };

    let cap = opts.cap.unwrap_or(usize::MAX);
    let mut sink = Sink::new(spec, opts.dedup_tol, cap);
    let mut next_word = 0u64;
    let mut consumed = 0u64;
    while next_word < total && !sink.full() {
        // without dedup, the number of words still needed is known exactly
        let wanted = if opts.dedup_tol > 0.0 {
            total - next_word
        } else {
            (total - next_word).min((cap - sink.len()) as u64)
        };
        let span = wanted.min(CHUNK_WORDS * CHUNKS_PER_BATCH);
        let ranges: Vec<(u64, u64)> = (0..span.div_ceil(CHUNK_WORDS))
            .map(|c| {
                let start = next_word + c * CHUNK_WORDS;
                (start, (start + CHUNK_WORDS).min(next_word + span))
            })
            .collect();
        let chunks: Vec<Vec<f64>> = ranges
            .par_iter()
            .map(|&(a, b)| walker.run(a, b))
            .collect();
        'batch: for chunk in &chunks {
            for p in chunk.chunks_exact(dim) {
                sink.push(p);
                consumed += 1;
                if sink.full() {
                    break 'batch;
                }
            }
        }
        next_word += span;
    }
    let capped = sink.full() && consumed < total;
    let provenance = Provenance {
        kind: CloudKind::WordOrbit,
        seed: alphabet.seed,
        k: alphabet.k(),
        ell,
        base_point: base.coords().to_vec(),
        dedup_tolerance: opts.dedup_tol,
        capped,
        words_visited: consumed,
    };
    PointCloud::new(spec, sink.coords, provenance)
}

struct Walker<'a> {
    alphabet: &'a Alphabet,
    ell: usize,
    symbols: u64,
    last_images: &'a [Vec<f64>],
    dim: usize,
}

impl Walker<'_> {
    /// Points of words `start..end` (word index in base `2k`, most significant symbol first).
    fn run(&self, start: u64, end: u64) -> Vec<f64> {
        let ell = self.ell;
        let mut digits = vec![0usize; ell];
        let mut w = start;
        for slot in digits.iter_mut().rev() {
            *slot = (w % self.symbols) as usize;
            w /= self.symbols;
        }
        // prefixes[j] = s_1 ... s_{j+1} for j < ell - 1
        let mut prefixes: Vec<Isometry> = Vec::with_capacity(ell.saturating_sub(1));
        self.rebuild(&digits, 0, &mut prefixes);

        let mut out = vec![0.0; (end - start) as usize * self.dim];
        for row in out.chunks_exact_mut(self.dim) {
            let image = &self.last_images[digits[ell - 1]];
            match prefixes.last() {
                Some(g) => g.apply_into(image, row),
                None => row.copy_from_slice(image),
            }
            // odometer increment; `changed` is the most significant position that moved
            let mut pos = ell - 1;
            loop {
                digits[pos] += 1;
                if digits[pos] < self.symbols as usize || pos == 0 {
                    break;
                }
                digits[pos] = 0;
                pos -= 1;
            }
            if pos < ell - 1 {
                prefixes.truncate(pos);
                self.rebuild(&digits, pos, &mut prefixes);
            }
        }
        out
    }

    fn rebuild(&self, digits: &[usize], from: usize, prefixes: &mut Vec<Isometry>) {
        for j in from..self.ell.saturating_sub(1) {
            let Some(&digit) = digits.get(j) else { break };
            if digit >= self.symbols as usize {
                break;
            }
            let s = self.alphabet.symbol(digit);
            let next = match prefixes.last() {
                Some(g) => g.compose(s).expect("alphabet isometries share one space"),
                None => s.clone(),
            };
            prefixes.push(next);
        }
    }
}

/// Ordered collector applying the cap and the optional dedup rule.
struct Sink {
    spec: SpaceSpec,
    tol: f64,
    cap: usize,
    coords: Vec<f64>,
    count: usize,
    cell_width: f64,
    grid: HashMap<[i64; 3], Vec<u32>>,
}

impl Sink {
    fn new(spec: SpaceSpec, tol: f64, cap: usize) -> Self {
        Sink {
            spec,
            tol,
            cap,
            coords: Vec::new(),
            count: 0,
            // a point within `tol` differs by at most this much in every coordinate
            cell_width: spec.coordinate_bound(tol),
            grid: HashMap::new(),
        }
    }

    fn len(&self) -> usize {
        self.count
    }

    fn full(&self) -> bool {
        self.count >= self.cap
    }

    fn key(&self, p: &[f64]) -> [i64; 3] {
        let mut key = [0i64; 3];
        for (k, x) in key.iter_mut().zip(p) {
            *k = (x / self.cell_width).floor() as i64;
        }
        key
    }

    fn push(&mut self, p: &[f64]) {
        if self.tol > 0.0 {
            let key = self.key(p);
            let used = p.len().min(3);
            let dim = self.spec.ambient_dim;
            for offset in 0..3usize.pow(used as u32) {
                let mut probe = key;
                let mut o = offset;
                for slot in probe.iter_mut().take(used) {
                    *slot += (o % 3) as i64 - 1;
                    o /= 3;
                }
                if let Some(bucket) = self.grid.get(&probe) {
                    for &i in bucket {
                        let i = i as usize;
                        let q = &self.coords[i * dim..(i + 1) * dim];
                        if self.spec.distance(p, q) <= self.tol {
                            return;
                        }
                    }
                }
            }
            self.grid.entry(key).or_default().push(self.count as u32);
        }
        self.coords.extend_from_slice(p);
        self.count += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::generate_alphabet;
    use crate::spaces::{make_space, ConstantOverrides, SpaceId};
    use nalgebra::DMatrix;
    use std::f64::consts::PI;

    fn spec(id: SpaceId) -> SpaceSpec {
        make_space(id, &ConstantOverrides::default()).unwrap()
    }

    fn no_cap() -> EnumerateOptions {
        EnumerateOptions {
            cap: None,
            dedup_tol: 0.0,
        }
    }

    #[test]
    fn full_orbit_size() {
        let s2 = spec(SpaceId::Sphere(2));
        let a = generate_alphabet(&s2, 3, 1);
        let cloud = enumerate_cloud(&a, 2, &s2.base_point(), no_cap()).unwrap();
        assert_eq!(cloud.len(), 36);
        assert!(!cloud.provenance.capped);
        cloud.validate().unwrap();
    }

    #[test]
    fn identity_alphabet_collapses() {
        let s2 = spec(SpaceId::Sphere(2));
        let a = Alphabet::from_generators(s2, vec![Isometry::identity(&s2)], 0);
        let base = s2.base_point();
        let cloud = enumerate_cloud(&a, 4, &base, no_cap()).unwrap();
        assert_eq!(cloud.len(), 16);
        assert!(cloud.points().all(|p| p == base.coords()));
        let dedup = EnumerateOptions {
            cap: None,
            dedup_tol: 1e-9,
        };
        assert_eq!(enumerate_cloud(&a, 4, &base, dedup).unwrap().len(), 1);
    }

    #[test]
    fn circle_eighth_turn_orbit() {
        let s1 = spec(SpaceId::Sphere(1));
        let t = 2.0 * PI / 8.0;
        let r = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        let a = Alphabet::from_generators(s1, vec![Isometry::Rotation(r)], 0);
        let base = Point::new(vec![1.0, 0.0]);
        let opts = EnumerateOptions {
            cap: None,
            dedup_tol: 1e-9,
        };
        let cloud = enumerate_cloud(&a, 3, &base, opts).unwrap();
        // brute force: all words over {r, r^-1} of length 3 give net turns -3..=3 in steps of 2
        let mut turns: Vec<i32> = Vec::new();
        for w in 0..8u32 {
            let net: i32 = (0..3).map(|b| if w >> b & 1 == 0 { 1 } else { -1 }).sum();
            if !turns.contains(&net) {
                turns.push(net);
            }
        }
        assert_eq!(cloud.len(), turns.len());
        for p in cloud.points() {
            let angle = p[1].atan2(p[0]) / t;
            assert!(turns.iter().any(|&n| (angle - n as f64).abs() < 1e-9));
        }
    }

    #[test]
    fn cap_and_guards() {
        let s2 = spec(SpaceId::Sphere(2));
        let a = generate_alphabet(&s2, 4, 3);
        let base = s2.base_point();
        let opts = EnumerateOptions {
            cap: Some(100),
            dedup_tol: 0.0,
        };
        let cloud = enumerate_cloud(&a, 5, &base, opts).unwrap();
        assert_eq!(cloud.len(), 100);
        assert!(cloud.provenance.capped);
        let full = enumerate_cloud(&a, 5, &base, no_cap()).unwrap();
        assert_eq!(cloud.coords(), &full.coords()[..300]);
        assert!(matches!(
            enumerate_cloud(&a, 5, &base, EnumerateOptions { cap: Some(0), dedup_tol: 0.0 }),
            Err(Error::CapZero)
        ));
        assert!(matches!(
            enumerate_cloud(&a, 30, &base, no_cap()),
            Err(Error::OverflowGuard { .. })
        ));
        let huge = EnumerateOptions {
            cap: Some(10),
            dedup_tol: 0.0,
        };
        assert_eq!(enumerate_cloud(&a, 40, &base, huge).unwrap().len(), 10);
    }

    /// Explicit product of the word's matrices applied to the base point.
    fn naive_orbit(a: &Alphabet, ell: usize, base: &Point) -> Vec<Vec<f64>> {
        let n = 2 * a.k();
        let mut out = Vec::new();
        for w in 0..n.pow(ell as u32) {
            let mut digits = vec![0; ell];
            let mut x = w;
            for d in digits.iter_mut().rev() {
                *d = x % n;
                x /= n;
            }
            let mut g = Isometry::identity(&a.space);
            for &d in &digits {
                g = g.compose(a.symbol(d)).unwrap();
            }
            out.push(g.apply(base).into_coords());
        }
        out
    }

    #[test]
    fn matches_naive_products() {
        for id in [SpaceId::Sphere(2), SpaceId::Sphere(4), SpaceId::So3] {
            let s = spec(id);
            for k in 1..=2 {
                for ell in 1..=4 {
                    let a = generate_alphabet(&s, k, (10 * k + ell) as u64);
                    let base = s.base_point();
                    let cloud = enumerate_cloud(&a, ell, &base, no_cap()).unwrap();
                    let naive = naive_orbit(&a, ell, &base);
                    assert_eq!(cloud.len(), naive.len());
                    for (p, q) in cloud.points().zip(&naive) {
                        for (x, y) in p.iter().zip(q) {
                            assert!((x - y).abs() < 1e-10);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn large_enumeration_spans_chunks() {
        let s2 = spec(SpaceId::Sphere(2));
        let a = generate_alphabet(&s2, 2, 5);
        let base = s2.base_point();
        // 4^8 = 65536 words, several chunks
        let cloud = enumerate_cloud(&a, 8, &base, no_cap()).unwrap();
        assert_eq!(cloud.len(), 65536);
        let naive_last = {
            let mut g = Isometry::identity(&s2);
            for _ in 0..8 {
                g = g.compose(a.symbol(3)).unwrap();
            }
            g.apply(&base)
        };
        for (x, y) in cloud.point(65535).iter().zip(naive_last.coords()) {
            assert!((x - y).abs() < 1e-10);
        }
        cloud.validate().unwrap();
    }

    #[test]
    fn dedup_removes_cancelled_words() {
        let s2 = spec(SpaceId::Sphere(2));
        let a = generate_alphabet(&s2, 3, 8);
        let base = s2.base_point();
        let opts = EnumerateOptions {
            cap: None,
            dedup_tol: 1e-9,
        };
        // reduced words of length 2 plus the empty word: 6 * 5 + 1
        let cloud = enumerate_cloud(&a, 2, &base, opts).unwrap();
        assert_eq!(cloud.len(), 31);
    }

    #[test]
    fn equivariance_under_conjugation() {
        let s2 = spec(SpaceId::Sphere(2));
        let a = generate_alphabet(&s2, 2, 21);
        let mut rng = crate::rng::stream(99, 0);
        let h = crate::spaces::haar_sample(&s2, &mut rng);
        let h_inv = h.invert();
        let conj: Vec<Isometry> = a
            .generators
            .iter()
            .map(|g| h_inv.compose(g).unwrap().compose(&h).unwrap())
            .collect();
        let b = Alphabet::from_generators(s2, conj, 0);
        let base = s2.base_point();
        let moved = h_inv.apply(&base);
        let left = enumerate_cloud(&a, 3, &base, no_cap()).unwrap();
        let right = enumerate_cloud(&b, 3, &moved, no_cap()).unwrap();
        for (p, q) in left.points().zip(right.points()) {
            let hq = h.apply(&Point::new(q.to_vec()));
            assert!(s2.distance(p, hq.coords()) < 1e-10);
        }
    }
}
