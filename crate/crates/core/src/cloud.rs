//! Point clouds and their on-disk formats.
//!
//! A cloud is written as a CSV file with one row of ambient coordinates per
//! point (17 significant digits) plus a JSON header with the space and the
//! provenance of the points.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spaces::{Point, SpaceSpec};

/// How a cloud was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloudKind {
    WordOrbit,
    Uniform,
    External,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: CloudKind,
    pub seed: u64,
    pub k: usize,
    pub ell: usize,
    pub base_point: Vec<f64>,
    pub dedup_tolerance: f64,
    pub capped: bool,
    /// Number of words visited by the enumeration (0 for non-orbit clouds).
    pub words_visited: u64,
}

impl Provenance {
    pub fn uniform(seed: u64) -> Self {
        Provenance {
            kind: CloudKind::Uniform,
            seed,
            k: 0,
            ell: 0,
            base_point: Vec::new(),
            dedup_tolerance: 0.0,
            capped: false,
            words_visited: 0,
        }
    }

    pub fn external() -> Self {
        Provenance {
            kind: CloudKind::External,
            ..Provenance::uniform(0)
        }
    }
}

/// An ordered multiset of points on one space, stored as a flat coordinate buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    space: SpaceSpec,
    coords: Vec<f64>,
    pub provenance: Provenance,
}

impl PointCloud {
    pub fn new(space: SpaceSpec, coords: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if coords.len() % space.ambient_dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: space.ambient_dim,
                got: coords.len() % space.ambient_dim,
            });
        }
        Ok(PointCloud {
            space,
            coords,
            provenance,
        })
    }

    pub fn from_points(space: SpaceSpec, points: &[Point], provenance: Provenance) -> Result<Self> {
        let mut coords = Vec::with_capacity(points.len() * space.ambient_dim);
        for p in points {
            if p.coords().len() != space.ambient_dim {
                return Err(Error::DimensionMismatch {
                    expected: space.ambient_dim,
                    got: p.coords().len(),
                });
            }
            coords.extend_from_slice(p.coords());
        }
        PointCloud::new(space, coords, provenance)
    }

    /// `count` iid points from the uniform measure, drawn from stream `(seed, stream)`.
    pub fn uniform(space: SpaceSpec, count: usize, seed: u64, stream: u64) -> Self {
        let mut rng = crate::rng::stream(seed, stream);
        let coords = space.uniform_points(count, &mut rng);
        PointCloud {
            space,
            coords,
            provenance: Provenance::uniform(seed),
        }
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.ambient_dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.space.ambient_dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.space.ambient_dim;
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.coords.chunks_exact(self.space.ambient_dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// A new cloud made of the points at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        let mut coords = Vec::with_capacity(indices.len() * self.dim());
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        PointCloud {
            space: self.space,
            coords,
            provenance: self.provenance.clone(),
        }
    }

    /// Checks that every point lies on the manifold.
    pub fn validate(&self) -> Result<()> {
        self.points().try_for_each(|p| self.space.check_point(p))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        for p in self.points() {
            let row: Vec<String> = p.iter().map(|x| format_coord(*x)).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes the JSON header (space and provenance) next to the CSV.
    pub fn write_header(&self, path: &Path) -> Result<()> {
        let header = CloudHeader {
            space: self.space,
            points: self.len(),
            provenance: self.provenance.clone(),
        };
        fs::write(path, serde_json::to_string_pretty(&header)? + "\n")?;
        Ok(())
    }

    /// Reads a CSV cloud; every row must have `space.ambient_dim` finite values on the manifold.
    pub fn read_csv(path: &Path, space: SpaceSpec, provenance: Provenance) -> Result<PointCloud> {
        let reader = BufReader::new(fs::File::open(path)?);
        let mut coords = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
            if row.len() != space.ambient_dim {
                return Err(Error::Format(format!(
                    "{}:{}: expected {} columns, found {}",
                    path.display(),
                    lineno + 1,
                    space.ambient_dim,
                    row.len()
                )));
            }
            space.check_point(&row)?;
            coords.extend(row);
        }
        PointCloud::new(space, coords, provenance)
    }

    /// Reads `cloud.csv` together with its `cloud.json` header when present.
    pub fn read_with_header(csv: &Path) -> Result<PointCloud> {
        let header_path = csv.with_extension("json");
        let text = fs::read_to_string(&header_path).map_err(|e| {
            Error::Format(format!("missing header {}: {e}", header_path.display()))
        })?;
        let header: CloudHeader = serde_json::from_str(&text)?;
        let cloud = PointCloud::read_csv(csv, header.space, header.provenance)?;
        if cloud.len() != header.points {
            return Err(Error::Format(format!(
                "header declares {} points, CSV has {}",
                header.points,
                cloud.len()
            )));
        }
        Ok(cloud)
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_coord(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CloudHeader {
    pub space: SpaceSpec,
    pub points: usize,
    pub provenance: Provenance,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{make_space, ConstantOverrides, SpaceId};
    use proptest::prelude::*;

    fn s2() -> SpaceSpec {
        make_space(SpaceId::Sphere(2), &ConstantOverrides::default()).unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cloud = PointCloud::uniform(s2(), 50, 3, 0);
        let path = dir.path().join("cloud.csv");
        cloud.write_csv(&path).unwrap();
        cloud.write_header(&path.with_extension("json")).unwrap();
        let back = PointCloud::read_with_header(&path).unwrap();
        assert_eq!(back, cloud);
    }

    #[test]
    fn rejects_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "1,0\n").unwrap();
        assert!(PointCloud::read_csv(&path, s2(), Provenance::external()).is_err());
        fs::write(&path, "1,0,1\n").unwrap();
        assert!(PointCloud::read_csv(&path, s2(), Provenance::external()).is_err());
    }

    proptest! {
        #[test]
        fn coordinates_round_trip(x in -1.0f64..1.0) {
            prop_assert_eq!(format_coord(x).parse::<f64>().unwrap(), x);
        }
    }
}
