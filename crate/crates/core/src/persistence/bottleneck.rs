//! Exact bottleneck distance by binary search over candidate values with a
//! Hopcroft–Karp feasibility test on the diagonal-augmented bipartite graph.

use std::collections::VecDeque;

use super::{Bar, PersistenceDiagram};

/// Bottleneck distance between the degree-`q` parts of two diagrams.
///
/// Infinite bars are matched only to infinite bars (by sorted birth); a
/// different number of them gives `+inf`.
pub fn bottleneck(d1: &PersistenceDiagram, d2: &PersistenceDiagram, q: usize) -> f64 {
    let split = |d: &PersistenceDiagram| -> (Vec<Bar>, Vec<f64>) {
        let mut finite = Vec::new();
        let mut infinite = Vec::new();
        for b in d.pairs.iter().filter(|b| b.degree == q) {
            if b.is_infinite() {
                infinite.push(b.birth);
            } else {
                finite.push(*b);
            }
        }
        infinite.sort_by(f64::total_cmp);
        (finite, infinite)
    };
    let (a, ia) = split(d1);
    let (b, ib) = split(d2);
    if ia.len() != ib.len() {
        return f64::INFINITY;
    }
    let essential = ia
        .iter()
        .zip(&ib)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    essential.max(finite_bottleneck(&a, &b))
}

fn linf(a: &Bar, b: &Bar) -> f64 {
    (a.birth - b.birth).abs().max((a.death - b.death).abs())
}

fn half(b: &Bar) -> f64 {
    (b.death - b.birth) / 2.0
}

/// Left side: `a` then the diagonal copies of `b`. Right side: `b` then the
/// diagonal copies of `a`. Returns the edge cost or `None` when forbidden.
fn cost(a: &[Bar], b: &[Bar], i: usize, j: usize) -> Option<f64> {
    let (n, m) = (a.len(), b.len());
    match (i < n, j < m) {
        (true, true) => Some(linf(&a[i], &b[j])),
        (true, false) => (j - m == i).then(|| half(&a[i])),
        (false, true) => (i - n == j).then(|| half(&b[j])),
        (false, false) => Some(0.0),
    }
}

fn finite_bottleneck(a: &[Bar], b: &[Bar]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let size = a.len() + b.len();
    let mut candidates: Vec<f64> = vec![0.0];
    for x in a {
        candidates.push(half(x));
        for y in b {
            candidates.push(linf(x, y));
        }
    }
    candidates.extend(b.iter().map(half));
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let feasible = |t: f64| {
        let adj: Vec<Vec<usize>> = (0..size)
            .map(|i| {
                (0..size)
                    .filter(|&j| cost(a, b, i, j).is_some_and(|c| c <= t))
                    .collect()
            })
            .collect();
        hopcroft_karp(&adj, size) == size
    };
    let (mut lo, mut hi) = (0, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    candidates[lo]
}

/// Size of a maximum matching; `adj[u]` lists right vertices of left vertex `u`.
fn hopcroft_karp(adj: &[Vec<usize>], right: usize) -> usize {
    const NIL: usize = usize::MAX;
    let left = adj.len();
    let mut match_l = vec![NIL; left];
    let mut match_r = vec![NIL; right];
    let mut dist = vec![0usize; left];
    let mut matched = 0;
    loop {
        let mut queue = VecDeque::new();
        let mut found = false;
        for u in 0..left {
            if match_l[u] == NIL {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = match_r[v];
                if w == NIL {
                    found = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            break;
        }
        fn augment(
            u: usize,
            adj: &[Vec<usize>],
            match_l: &mut [usize],
            match_r: &mut [usize],
            dist: &mut [usize],
        ) -> bool {
            for &v in &adj[u] {
                let w = match_r[v];
                if w == usize::MAX || (dist[w] == dist[u] + 1 && augment(w, adj, match_l, match_r, dist)) {
                    match_l[u] = v;
                    match_r[v] = u;
                    return true;
                }
            }
            dist[u] = usize::MAX;
            false
        }
        for u in 0..left {
            if match_l[u] == NIL && augment(u, adj, &mut match_l, &mut match_r, &mut dist) {
                matched += 1;
            }
        }
    }
    matched
}
