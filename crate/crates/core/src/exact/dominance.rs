//! Stochastic dominance in the prefix-sum order.
//!
//! `p` dominates `q` when `p(U) >= q(U)` for every up-set `U`. Small spaces
//! enumerate the up-sets directly; otherwise a max-flow computation decides
//! whether a coupling `X ~ q`, `Y ~ p` with `X ⪯ Y` exists, which is
//! equivalent.

use std::collections::VecDeque;

use crate::error::{Result, SepError};
use crate::scalar::Scalar;
use crate::statespace::StateSpace;

use super::Distribution;

/// Maximum number of search nodes visited while enumerating up-sets.
pub const UPSET_VISIT_CAP: u64 = 20_000_000;

/// Largest state space for which [`DominanceMethod::Auto`] tries up-sets.
const UPSET_STATE_LIMIT: usize = 300;

const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DominanceMethod {
    /// Enumerate every up-set.
    UpSets,
    /// Max-flow feasibility of a monotone coupling.
    Transport,
    /// Up-sets for small spaces, falling back to transport beyond the cap.
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dominance {
    pub holds: bool,
    /// Method that produced the verdict.
    pub method: DominanceMethod,
    /// Up-sets: `min_U p(U) - q(U)`. Transport: maximal coupled mass minus one.
    pub margin: f64,
    /// Up-sets visited (zero for transport).
    pub upsets: u64,
}

/// Whether `upper` stochastically dominates `lower`.
pub fn stochastic_dominance<T: Scalar>(
    upper: &Distribution<T>,
    lower: &Distribution<T>,
    space: &StateSpace,
) -> Result<bool> {
    Ok(stochastic_dominance_with(upper, lower, space, DominanceMethod::Auto)?.holds)
}

pub fn stochastic_dominance_with<T: Scalar>(
    upper: &Distribution<T>,
    lower: &Distribution<T>,
    space: &StateSpace,
    method: DominanceMethod,
) -> Result<Dominance> {
    upper.check_same(lower)?;
    if upper.len() != space.len() || upper.shape() != (space.n(), space.k()) {
        return Err(SepError::Mismatch("distributions do not live on this state space".into()));
    }
    let p: Vec<f64> = upper.probs().iter().map(|x| x.to_f64_lossy()).collect();
    let q: Vec<f64> = lower.probs().iter().map(|x| x.to_f64_lossy()).collect();
    match method {
        DominanceMethod::UpSets => upsets(&p, &q, space)?.ok_or(SepError::CapExceeded {
            n: space.n(),
            k: space.k(),
            size: space.len() as u128,
            cap: UPSET_STATE_LIMIT,
        }),
        DominanceMethod::Transport => Ok(transport(&p, &q, space)),
        DominanceMethod::Auto => {
            if space.len() <= UPSET_STATE_LIMIT {
                if let Some(d) = upsets(&p, &q, space)? {
                    return Ok(d);
                }
            }
            Ok(transport(&p, &q, space))
        }
    }
}

struct UpsetSearch<'a> {
    order: &'a [usize],
    covers: Vec<Vec<usize>>,
    diff: Vec<f64>,
    included: Vec<bool>,
    visits: u64,
    leaves: u64,
    worst: f64,
}

impl UpsetSearch<'_> {
    /// Decides positions `idx..` of the linear extension. Returns false
    /// once the visit cap trips.
    fn run(&mut self, idx: usize, mass: f64) -> bool {
        self.visits += 1;
        if self.visits > UPSET_VISIT_CAP {
            return false;
        }
        if idx == self.order.len() {
            self.leaves += 1;
            self.worst = self.worst.min(mass);
            return true;
        }
        if !self.run(idx + 1, mass) {
            return false;
        }
        // An element may join only when all of its upper covers have.
        if self.covers[idx].iter().all(|&c| self.included[c]) {
            self.included[idx] = true;
            let ok = self.run(idx + 1, mass + self.diff[idx]);
            self.included[idx] = false;
            return ok;
        }
        true
    }
}

fn upsets(p: &[f64], q: &[f64], space: &StateSpace) -> Result<Option<Dominance>> {
    // Linear extension with larger states first.
    let mut order: Vec<usize> = (0..space.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(space.height_sum(i)));
    let mut pos = vec![0usize; space.len()];
    for (a, &i) in order.iter().enumerate() {
        pos[i] = a;
    }
    let covers = order.iter().map(|&i| space.upper_covers(i).into_iter().map(|c| pos[c]).collect()).collect();
    let diff = order.iter().map(|&i| p[i] - q[i]).collect();
    let mut search = UpsetSearch {
        order: &order,
        covers,
        diff,
        included: vec![false; order.len()],
        visits: 0,
        leaves: 0,
        worst: f64::INFINITY,
    };
    if !search.run(0, 0.0) {
        return Ok(None);
    }
    Ok(Some(Dominance {
        holds: search.worst >= -TOLERANCE,
        method: DominanceMethod::UpSets,
        margin: search.worst,
        upsets: search.leaves,
    }))
}

/// Dinic max-flow on `source -> x (q_x)`, `x -> y` for every upper cover
/// `y` of `x` (unbounded), `y -> sink (p_y)`. Mass entering at `x` can reach
/// exactly the states above `x`, so full flow is a monotone coupling.
fn transport(p: &[f64], q: &[f64], space: &StateSpace) -> Dominance {
    let n = space.len();
    let (source, sink) = (n, n + 1);
    let mut g = FlowGraph::new(n + 2);
    for x in 0..n {
        if q[x] > 0.0 {
            g.add_edge(source, x, q[x]);
        }
        if p[x] > 0.0 {
            g.add_edge(x, sink, p[x]);
        }
        for y in space.upper_covers(x) {
            g.add_edge(x, y, f64::INFINITY);
        }
    }
    let flow = g.max_flow(source, sink);
    let need: f64 = q.iter().sum();
    Dominance { holds: flow >= need - TOLERANCE, method: DominanceMethod::Transport, margin: flow - need, upsets: 0 }
}

struct FlowEdge {
    to: usize,
    cap: f64,
}

struct FlowGraph {
    edges: Vec<FlowEdge>,
    adj: Vec<Vec<usize>>,
    level: Vec<i32>,
    next: Vec<usize>,
}

const FLOW_EPS: f64 = 1e-15;

impl FlowGraph {
    fn new(n: usize) -> Self {
        FlowGraph { edges: Vec::new(), adj: vec![Vec::new(); n], level: vec![0; n], next: vec![0; n] }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: f64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(FlowEdge { to, cap });
        self.adj[to].push(self.edges.len());
        self.edges.push(FlowEdge { to: from, cap: 0.0 });
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &e in &self.adj[v] {
                let to = self.edges[e].to;
                if self.edges[e].cap > FLOW_EPS && self.level[to] < 0 {
                    self.level[to] = self.level[v] + 1;
                    queue.push_back(to);
                }
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, v: usize, t: usize, pushed: f64) -> f64 {
        if v == t {
            return pushed;
        }
        while self.next[v] < self.adj[v].len() {
            let e = self.adj[v][self.next[v]];
            let to = self.edges[e].to;
            if self.edges[e].cap > FLOW_EPS && self.level[to] == self.level[v] + 1 {
                let got = self.dfs(to, t, pushed.min(self.edges[e].cap));
                if got > 0.0 {
                    self.edges[e].cap -= got;
                    self.edges[e ^ 1].cap += got;
                    return got;
                }
            }
            self.next[v] += 1;
        }
        0.0
    }

    fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut total = 0.0;
        while self.bfs(s, t) {
            self.next.iter_mut().for_each(|x| *x = 0);
            loop {
                let f = self.dfs(s, t, f64::INFINITY);
                if f <= FLOW_EPS {
                    break;
                }
                total += f;
            }
        }
        total
    }
}
