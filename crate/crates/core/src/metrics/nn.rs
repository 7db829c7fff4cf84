use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 16;

#[derive(Debug)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Exact nearest-neighbor index over a cloud.
///
/// A kd-tree on the ambient coordinates. The squared ambient chord is a
/// strictly increasing function of the geodesic distance on every shipped
/// space, so the chord nearest neighbor is the geodesic nearest neighbor
/// and the coordinate planes give valid pruning bounds.
#[derive(Debug)]
pub struct NNIndex<'a> {
    cloud: &'a PointCloud,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

#[derive(Clone, Copy)]
struct Best {
    d2: f64,
    idx: usize,
}

impl Best {
    #[inline]
    fn offer(&mut self, d2: f64, idx: usize) {
        if d2 < self.d2 || (d2 == self.d2 && idx < self.idx) {
            self.d2 = d2;
            self.idx = idx;
        }
    }
}

pub fn build_index(cloud: &PointCloud) -> Result<NNIndex<'_>> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut index = NNIndex {
        cloud,
        order: (0..cloud.len() as u32).collect(),
        nodes: Vec::new(),
    };
    index.build(0, cloud.len());
    Ok(index)
}

impl<'a> NNIndex<'a> {
    pub fn cloud(&self) -> &'a PointCloud {
        self.cloud
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let cloud = self.cloud;
        let dim = cloud.dim();
        let mut axis = 0;
        let mut widest = 0.0;
        for a in 0..dim {
            let (lo, hi) = self.order[start..end].iter().fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), &i| {
                    let x = cloud.point(i as usize)[a];
                    (lo.min(x), hi.max(x))
                },
            );
            if hi - lo > widest {
                widest = hi - lo;
                axis = a;
            }
        }
        if widest == 0.0 {
            return id;
        }
        let mid = (start + end) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&i, &j| {
            cloud.point(i as usize)[axis].total_cmp(&cloud.point(j as usize)[axis])
        });
        let value = cloud.point(self.order[mid] as usize)[axis];
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    fn search(&self, node: usize, q: &[f64], skip: Option<usize>, best: &mut Best) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                let spec = self.cloud.space();
                for &i in &self.order[start..end] {
                    let i = i as usize;
                    if Some(i) == skip {
                        continue;
                    }
                    best.offer(spec.chord_sq(q, self.cloud.point(i)), i);
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, skip, best);
                if diff * diff <= best.d2 {
                    self.search(far, q, skip, best);
                }
            }
        }
    }

    fn query(&self, q: &[f64], skip: Option<usize>) -> Option<(usize, f64)> {
        let mut best = Best {
            d2: f64::INFINITY,
            idx: usize::MAX,
        };
        self.search(0, q, skip, &mut best);
        (best.idx != usize::MAX).then(|| {
            let d = self.cloud.space().distance(q, self.cloud.point(best.idx));
            (best.idx, d)
        })
    }

    /// Index and geodesic distance of the nearest cloud point; ties go to the lowest index.
    pub fn nearest(&self, q: &[f64]) -> (usize, f64) {
        self.query(q, None).expect("index is never empty")
    }

    /// Nearest point other than the cloud point `skip`.
    pub fn nearest_excluding(&self, q: &[f64], skip: usize) -> Option<(usize, f64)> {
        self.query(q, Some(skip))
    }

    /// Nearest-neighbor queries for every point of `queries`, in order.
    pub fn nearest_all(&self, queries: &PointCloud) -> Vec<(usize, f64)> {
        (0..queries.len())
            .into_par_iter()
            .map(|i| self.nearest(queries.point(i)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::Provenance;
    use crate::spaces::{make_space, ConstantOverrides, SpaceId, SpaceSpec};
    use std::f64::consts::PI;

    fn spec(id: SpaceId) -> SpaceSpec {
        make_space(id, &ConstantOverrides::default()).unwrap()
    }

    fn linear_scan(cloud: &PointCloud, q: &[f64]) -> (usize, f64) {
        let spec = cloud.space();
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in cloud.points().enumerate() {
            let d = spec.distance(q, p);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    #[test]
    fn single_point_cloud() {
        let s2 = spec(SpaceId::Sphere(2));
        let cloud =
            PointCloud::new(s2, vec![0.0, 0.0, 1.0], Provenance::external()).unwrap();
        let index = build_index(&cloud).unwrap();
        assert_eq!(index.nearest(&[0.0, 0.0, 1.0]), (0, 0.0));
        let (i, d) = index.nearest(&[0.0, 0.0, -1.0]);
        assert_eq!(i, 0);
        assert!((d - PI).abs() < 1e-15);
    }

    #[test]
    fn empty_cloud_rejected() {
        let s2 = spec(SpaceId::Sphere(2));
        let cloud = PointCloud::new(s2, vec![], Provenance::external()).unwrap();
        assert!(matches!(build_index(&cloud), Err(Error::EmptyCloud)));
    }

    #[test]
    fn agrees_with_linear_scan() {
        for id in [SpaceId::Sphere(1), SpaceId::Sphere(2), SpaceId::Sphere(5), SpaceId::So3] {
            let s = spec(id);
            let cloud = PointCloud::uniform(s, 500, 1, 0);
            let queries = PointCloud::uniform(s, 200, 1, 1);
            let index = build_index(&cloud).unwrap();
            for q in queries.points() {
                let (i, d) = index.nearest(q);
                let (j, e) = linear_scan(&cloud, q);
                assert_eq!(i, j);
                assert_eq!(d, e);
            }
        }
    }

    #[test]
    fn ties_break_to_lowest_index() {
        let s2 = spec(SpaceId::Sphere(2));
        let mut coords = Vec::new();
        for _ in 0..40 {
            coords.extend_from_slice(&[1.0, 0.0, 0.0]);
        }
        let cloud = PointCloud::new(s2, coords, Provenance::external()).unwrap();
        let index = build_index(&cloud).unwrap();
        assert_eq!(index.nearest(&[0.0, 1.0, 0.0]).0, 0);
        assert_eq!(index.nearest_excluding(&[1.0, 0.0, 0.0], 0).unwrap(), (1, 0.0));
    }
}
