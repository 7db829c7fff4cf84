//! Vietoris–Rips persistence over Z/2: filtrations, diagrams by column
//! reduction with clearing, bottleneck distance and the coupled-sample
//! experiment.

mod bottleneck;
mod coupling;
mod filtration;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bottleneck::bottleneck;
pub use coupling::{coupled_diagram_experiment, CouplingReport};
pub use filtration::{
    vr_filtration, Filtration, Simplex, MAX_POINTS_DIM1, MAX_POINTS_DIM2, SIMPLEX_BUDGET,
};

/// Filtration convention recorded in reports.
pub const VR_CONVENTION: &str = "<=";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub degree: usize,
    pub birth: f64,
    /// `f64::INFINITY` for essential classes.
    #[serde(with = "death_serde")]
    pub death: f64,
}

impl Bar {
    pub fn is_infinite(&self) -> bool {
        self.death.is_infinite()
    }

    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }
}

mod death_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("bad death value {s}"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    /// Sorted by `(degree, birth, death)`; zero-length pairs are omitted.
    pub pairs: Vec<Bar>,
}

impl PersistenceDiagram {
    pub fn degree(&self, q: usize) -> PersistenceDiagram {
        PersistenceDiagram {
            pairs: self.pairs.iter().copied().filter(|b| b.degree == q).collect(),
        }
    }

    /// Number of degree-`q` bars alive at `radius` (`birth <= radius < death`).
    pub fn betti(&self, radius: f64, q: usize) -> usize {
        self.pairs
            .iter()
            .filter(|b| b.degree == q && b.birth <= radius && radius < b.death)
            .count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("degree,birth,death\n");
        for b in &self.pairs {
            let death = if b.is_infinite() {
                "inf".to_string()
            } else {
                format!("{:.16e}", b.death)
            };
            let _ = writeln!(out, "{},{:.16e},{}", b.degree, b.birth, death);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Format(format!("diagram line {}: `{line}`", i + 1));
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(bad());
            }
            let degree = fields[0].parse().map_err(|_| bad())?;
            let birth = fields[1].parse().map_err(|_| bad())?;
            let death = if fields[2] == "inf" {
                f64::INFINITY
            } else {
                fields[2].parse().map_err(|_| bad())?
            };
            pairs.push(Bar { degree, birth, death });
        }
        Ok(PersistenceDiagram { pairs })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn key(s: &Simplex) -> [u32; 4] {
    let mut k = [u32::MAX; 4];
    k[..=s.dim].copy_from_slice(s.vertices());
    k
}

/// Symmetric difference of two ascending index lists.
fn add_columns(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// All bars of degree `<= maxdim`.
pub fn persistence(filtration: &Filtration) -> PersistenceDiagram {
    let simplices = &filtration.simplices;
    let top = filtration.maxdim + 1;
    let index: HashMap<[u32; 4], u32> = simplices
        .iter()
        .enumerate()
        .filter(|(_, s)| s.dim < top)
        .map(|(i, s)| (key(s), i as u32))
        .collect();

    let mut cleared = vec![false; simplices.len()];
    let mut pairs = Vec::new();
    for dim in (1..=top).rev() {
        let mut owner: HashMap<u32, Vec<u32>> = HashMap::new();
        for (j, s) in simplices.iter().enumerate() {
            if s.dim != dim || cleared[j] {
                continue;
            }
            let verts = s.vertices();
            let mut col: Vec<u32> = (0..=dim)
                .map(|skip| {
                    let mut k = [u32::MAX; 4];
                    let mut t = 0;
                    for (idx, &v) in verts.iter().enumerate() {
                        if idx != skip {
                            k[t] = v;
                            t += 1;
                        }
                    }
                    index[&k]
                })
                .collect();
            col.sort_unstable();
            while let Some(&low) = col.last() {
                match owner.get(&low) {
                    Some(other) => col = add_columns(&col, other),
                    None => break,
                }
            }
            if let Some(&low) = col.last() {
                cleared[low as usize] = true;
                let birth = simplices[low as usize].value;
                if s.value > birth {
                    pairs.push(Bar {
                        degree: dim - 1,
                        birth,
                        death: s.value,
                    });
                }
                owner.insert(low, col);
            } else if dim < top {
                pairs.push(Bar {
                    degree: dim,
                    birth: s.value,
                    death: f64::INFINITY,
                });
            }
        }
    }
    for (j, s) in simplices.iter().enumerate() {
        if s.dim == 0 && !cleared[j] {
            pairs.push(Bar {
                degree: 0,
                birth: s.value,
                death: f64::INFINITY,
            });
        }
    }
    pairs.sort_by(|a, b| {
        a.degree
            .cmp(&b.degree)
            .then(a.birth.total_cmp(&b.birth))
            .then(a.death.total_cmp(&b.death))
    });
    PersistenceDiagram { pairs }
}

/// Degree-`q` diagram of a filtration.
pub fn persistence_diagram(filtration: &Filtration, q: usize) -> PersistenceDiagram {
    persistence(filtration).degree(q)
}

/// Rank of `H_q` of the subcomplex at `radius`.
pub fn betti_at(filtration: &Filtration, radius: f64, q: usize) -> usize {
    persistence(filtration).betti(radius, q)
}
