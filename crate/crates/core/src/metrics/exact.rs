//! Exact transport between two uniform empirical measures with a primal
//! network simplex on the complete bipartite graph.
//!
//! Masses are scaled to integers: each of the `n` sources supplies `m / g`
//! units and each of the `m` sinks demands `n / g` units with
//! `g = gcd(n, m)`, so unequal sizes need no padding. The spanning-tree
//! bookkeeping (thread order, subtree sizes, last successors) and the
//! block-search pivot rule follow the classical LEMON implementation,
//! specialized to uncapacitated arcs.

use super::{cost_matrix, same_space, Certificate, TransportMethod, TransportResult};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Largest support size accepted by [`wasserstein1_exact`].
pub const EXACT_SIZE_LIMIT: usize = 2000;

const STATE_UPPER: i8 = -1;
const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;
const DIR_UP: i64 = 1;
const DIR_DOWN: i64 = -1;

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Exact Wasserstein-1 distance between the uniform measures on two clouds.
pub fn wasserstein1_exact(mu: &PointCloud, nu: &PointCloud) -> Result<TransportResult> {
    let (n, m) = (mu.len(), nu.len());
    if n == 0 || m == 0 {
        return Err(Error::EmptyCloud);
    }
    if n > EXACT_SIZE_LIMIT || m > EXACT_SIZE_LIMIT {
        return Err(Error::SizeLimitExceeded {
            n,
            m,
            limit: EXACT_SIZE_LIMIT,
        });
    }
    same_space(mu, nu)?;
    let cost = cost_matrix(mu, nu);
    Ok(solve_uniform(n, m, cost))
}

/// Solves the uniform-marginal transportation problem for an `n x m` cost matrix.
pub(crate) fn solve_uniform(n: usize, m: usize, cost: Vec<f64>) -> TransportResult {
    let g = gcd(n, m);
    let supply = (m / g) as i64;
    let demand = (n / g) as i64;
    let total = (n / g * m) as f64;
    let mut ns = NetworkSimplex::new(n, m, cost, supply, demand);
    ns.run();

    let mut entries = Vec::new();
    let mut value = 0.0;
    for i in 0..n {
        for j in 0..m {
            let flow = ns.flow[i * m + j];
            if flow > 0 {
                let c = ns.cost[i * m + j];
                value += flow as f64 * c;
                entries.push((i, j, flow as f64 / total));
            }
        }
    }
    value /= total;

    let mut residual: f64 = 0.0;
    for i in 0..n {
        for j in 0..m {
            let e = i * m + j;
            let rc = ns.cost[e] + ns.pi[i] - ns.pi[n + j];
            residual = residual.max(-rc);
            if ns.flow[e] > 0 {
                residual = residual.max(rc.abs());
            }
        }
    }

    TransportResult {
        value,
        method: TransportMethod::ExactFlow,
        certificate: Some(Certificate::Plan {
            entries,
            slackness_residual: residual.max(0.0),
        }),
        gap_bound: 0.0,
    }
}

struct NetworkSimplex {
    n: usize,
    m: usize,
    node_num: usize,
    arc_num: usize,
    cost: Vec<f64>,
    art_cost: f64,
    flow: Vec<i64>,
    art_flow: Vec<i64>,
    state: Vec<i8>,
    pi: Vec<f64>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_dir: Vec<i64>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    dirty_revs: Vec<usize>,
    // current pivot
    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: i64,
    next_arc: usize,
    block_size: usize,
    tolerance: f64,
}

const NONE: usize = usize::MAX;

impl NetworkSimplex {
    fn new(n: usize, m: usize, cost: Vec<f64>, supply: i64, demand: i64) -> Self {
        let node_num = n + m;
        let arc_num = n * m;
        let root = node_num;
        let max_cost = cost.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
        let art_cost = (max_cost + 1.0) * node_num as f64;
        let mut ns = NetworkSimplex {
            n,
            m,
            node_num,
            arc_num,
            cost,
            art_cost,
            flow: vec![0; arc_num],
            art_flow: vec![0; node_num],
            state: vec![STATE_LOWER; arc_num],
            pi: vec![0.0; node_num + 1],
            parent: vec![NONE; node_num + 1],
            pred: vec![NONE; node_num + 1],
            pred_dir: vec![0; node_num + 1],
            thread: vec![0; node_num + 1],
            rev_thread: vec![0; node_num + 1],
            succ_num: vec![0; node_num + 1],
            last_succ: vec![0; node_num + 1],
            dirty_revs: Vec::new(),
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0,
            next_arc: 0,
            block_size: ((arc_num as f64).sqrt().ceil() as usize).max(10),
            tolerance: 1e-12 * (max_cost + 1.0),
        };
        ns.parent[root] = NONE;
        ns.pred[root] = NONE;
        ns.thread[root] = 0;
        ns.rev_thread[0] = root;
        ns.succ_num[root] = node_num + 1;
        ns.last_succ[root] = root - 1;
        for u in 0..node_num {
            ns.parent[u] = root;
            ns.pred[u] = arc_num + u;
            ns.thread[u] = u + 1;
            ns.rev_thread[u + 1] = u;
            ns.succ_num[u] = 1;
            ns.last_succ[u] = u;
            if u < n {
                // artificial arc u -> root, cost 0
                ns.pred_dir[u] = DIR_UP;
                ns.pi[u] = 0.0;
                ns.art_flow[u] = supply;
            } else {
                // artificial arc root -> u, cost art_cost
                ns.pred_dir[u] = DIR_DOWN;
                ns.pi[u] = art_cost;
                ns.art_flow[u] = demand;
            }
        }
        ns
    }

    #[inline]
    fn source(&self, e: usize) -> usize {
        if e < self.arc_num {
            e / self.m
        } else {
            let u = e - self.arc_num;
            if u < self.n {
                u
            } else {
                self.node_num
            }
        }
    }

    #[inline]
    fn target(&self, e: usize) -> usize {
        if e < self.arc_num {
            self.n + e % self.m
        } else {
            let u = e - self.arc_num;
            if u < self.n {
                self.node_num
            } else {
                u
            }
        }
    }

    #[inline]
    fn arc_cost(&self, e: usize) -> f64 {
        if e < self.arc_num {
            self.cost[e]
        } else if e - self.arc_num < self.n {
            0.0
        } else {
            self.art_cost
        }
    }

    #[inline]
    fn flow_of(&self, e: usize) -> i64 {
        if e < self.arc_num {
            self.flow[e]
        } else {
            self.art_flow[e - self.arc_num]
        }
    }

    #[inline]
    fn add_flow(&mut self, e: usize, delta: i64) {
        if e < self.arc_num {
            self.flow[e] += delta;
        } else {
            self.art_flow[e - self.arc_num] += delta;
        }
    }

    #[inline]
    fn reduced(&self, e: usize) -> f64 {
        let i = e / self.m;
        let j = self.n + e % self.m;
        self.state[e] as f64 * (self.cost[e] + self.pi[i] - self.pi[j])
    }

    fn find_entering_arc(&mut self) -> bool {
        let mut min = -self.tolerance;
        let mut found = false;
        let mut cnt = self.block_size;
        let mut e = self.next_arc;
        for _ in 0..self.arc_num {
            let c = self.reduced(e);
            if c < min {
                min = c;
                self.in_arc = e;
                found = true;
            }
            e += 1;
            if e == self.arc_num {
                e = 0;
            }
            cnt -= 1;
            if cnt == 0 {
                if found {
                    self.next_arc = e;
                    return true;
                }
                cnt = self.block_size;
            }
        }
        if found {
            self.next_arc = e;
        }
        found
    }

    fn find_join_node(&mut self) {
        let mut u = self.source(self.in_arc);
        let mut v = self.target(self.in_arc);
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    fn find_leaving_arc(&mut self) -> bool {
        let (first, second) = if self.state[self.in_arc] == STATE_LOWER {
            (self.source(self.in_arc), self.target(self.in_arc))
        } else {
            (self.target(self.in_arc), self.source(self.in_arc))
        };
        self.delta = i64::MAX;
        let mut result = 0;
        let mut u = first;
        while u != self.join {
            // arcs are uncapacitated: only arcs pointing against the cycle can block
            if self.pred_dir[u] == DIR_UP {
                let d = self.flow_of(self.pred[u]);
                if d < self.delta {
                    self.delta = d;
                    self.u_out = u;
                    result = 1;
                }
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            if self.pred_dir[u] == DIR_DOWN {
                let d = self.flow_of(self.pred[u]);
                if d <= self.delta {
                    self.delta = d;
                    self.u_out = u;
                    result = 2;
                }
            }
            u = self.parent[u];
        }
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        result != 0
    }

    fn change_flow(&mut self, change: bool) {
        if self.delta > 0 {
            let val = self.state[self.in_arc] as i64 * self.delta;
            self.flow[self.in_arc] += val;
            let mut u = self.source(self.in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.add_flow(e, -self.pred_dir[u] * val);
                u = self.parent[u];
            }
            let mut u = self.target(self.in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.add_flow(e, self.pred_dir[u] * val);
                u = self.parent[u];
            }
        }
        if change {
            self.state[self.in_arc] = STATE_TREE;
            let out = self.pred[self.u_out];
            if out < self.arc_num {
                self.state[out] = if self.flow[out] == 0 {
                    STATE_LOWER
                } else {
                    STATE_UPPER
                };
            }
        } else {
            self.state[self.in_arc] = -self.state[self.in_arc];
        }
    }

    fn update_tree_structure(&mut self) {
        let u_in = self.u_in;
        let v_in = self.v_in;
        let u_out = self.u_out;
        let in_arc = self.in_arc;
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = if u_in == self.source(in_arc) {
                DIR_UP
            } else {
                DIR_DOWN
            };
            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ]
            } else {
                self.thread[v_in]
            };

            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);

                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;

            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }

            for k in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[k];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                tmp_sc = tmp_sc + self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = if u_in == self.source(in_arc) {
                DIR_UP
            } else {
                DIR_DOWN
            };
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[self.join] == v_in {
            self.join
        } else {
            NONE
        };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }

        if self.join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }

        let mut u = v_in;
        while u != self.join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != self.join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let u_in = self.u_in;
        let sigma = self.pi[self.v_in]
            - self.pi[u_in]
            - self.pred_dir[u_in] as f64 * self.arc_cost(self.in_arc);
        let end = self.thread[self.last_succ[u_in]];
        let mut u = u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    fn run(&mut self) {
        while self.find_entering_arc() {
            self.find_join_node();
            let change = self.find_leaving_arc();
            self.change_flow(change);
            if change {
                self.update_tree_structure();
                self.update_potential();
            }
        }
        debug_assert!(
            self.art_flow.iter().all(|&f| f == 0),
            "balanced uniform instance must be feasible"
        );
    }
}
