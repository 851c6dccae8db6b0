//! Censoring schemes: right-continuous, piecewise-constant sets of blocked
//! edges. Edge `{x, x+1}` is identified by its left endpoint `x`.

use std::collections::BTreeSet;

use crate::error::{Result, SepError};

#[derive(Debug, Clone, PartialEq)]
struct Cycle {
    /// First interval index that repeats.
    from: usize,
    /// End of the last explicit interval; the block `[starts[from], end)`
    /// repeats forever after it.
    end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CensoringScheme {
    starts: Vec<f64>,
    blocked: Vec<Vec<i64>>,
    cycle: Option<Cycle>,
}

impl CensoringScheme {
    /// No edge is ever blocked.
    pub fn empty() -> Self {
        CensoringScheme { starts: vec![0.0], blocked: vec![Vec::new()], cycle: None }
    }

    /// The same edges blocked for all time.
    pub fn constant<I: IntoIterator<Item = i64>>(edges: I) -> Self {
        CensoringScheme { starts: vec![0.0], blocked: vec![sorted(edges)], cycle: None }
    }

    /// Every edge of the segment `[first, last]` blocked for all time.
    pub fn all_edges(first: i64, last: i64) -> Self {
        Self::constant(first..last)
    }

    /// Interval `j` is `[starts[j], starts[j+1])`; the last one is unbounded.
    pub fn piecewise(starts: Vec<f64>, blocked: Vec<Vec<i64>>) -> Result<Self> {
        if starts.is_empty() || starts.len() != blocked.len() {
            return Err(SepError::InvalidParameter("breakpoints and edge sets must pair up".into()));
        }
        if starts[0] != 0.0 {
            return Err(SepError::InvalidParameter("first breakpoint must be 0".into()));
        }
        if starts.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(SepError::InvalidParameter("breakpoints must increase strictly".into()));
        }
        Ok(CensoringScheme { starts, blocked: blocked.into_iter().map(sorted).collect(), cycle: None })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.starts
    }

    fn interval_index(&self, t: f64) -> usize {
        let t = match &self.cycle {
            Some(c) if t >= c.end => {
                let base = self.starts[c.from];
                let period = c.end - base;
                base + (t - c.end).rem_euclid(period)
            }
            _ => t,
        };
        // Right-continuous: the interval containing t is the last start <= t.
        self.starts.partition_point(|&s| s <= t).saturating_sub(1)
    }

    /// Blocked edges at time `t`, sorted.
    pub fn blocked_at(&self, t: f64) -> &[i64] {
        &self.blocked[self.interval_index(t)]
    }

    #[inline]
    pub fn is_blocked(&self, edge: i64, t: f64) -> bool {
        self.blocked_at(t).binary_search(&edge).is_ok()
    }

    /// Constant pieces covering `[0, t_end]` as `(from, to, edges)`.
    pub fn pieces(&self, t_end: f64) -> Vec<(f64, f64, &[i64])> {
        let mut out = Vec::new();
        let mut t = 0.0;
        while t < t_end {
            let idx = self.interval_index(t);
            // Distance to the next breakpoint in the (possibly cycled) schedule.
            let next = match &self.cycle {
                Some(c) if t >= c.end => {
                    let base = self.starts[c.from];
                    let period = c.end - base;
                    let local = base + (t - c.end).rem_euclid(period);
                    let local_next = self.starts.get(idx + 1).copied().unwrap_or(c.end);
                    t + (local_next - local)
                }
                Some(c) => self.starts.get(idx + 1).copied().unwrap_or(c.end),
                None => self.starts.get(idx + 1).copied().unwrap_or(f64::INFINITY),
            };
            let to = next.min(t_end);
            if to > t {
                out.push((t, to, self.blocked[idx].as_slice()));
            }
            // Guard against a zero-length step from rounding in the cycle map.
            t = if to > t { to } else { next.max(t + f64::EPSILON * t.abs().max(1.0)) };
        }
        out
    }
}

fn sorted<I: IntoIterator<Item = i64>>(edges: I) -> Vec<i64> {
    edges.into_iter().collect::<BTreeSet<_>>().into_iter().collect()
}

/// Alternating-box scheme on the segment `[1, n_sites]` with box half-width
/// `u` and switch period `s`, releasing the `k` initially packed particles
/// one at a time from the right.
///
/// On `[iS, (i+1)S)` the blocked edges are `x = 2jU` (even `i`) or
/// `x = (2j+1)U` (odd `i`) for `j >= 1` and `x <= n_sites - 2U`. While
/// `i < 2k` the lowest blocked edge at or right of `m = k - ⌊i/2⌋` is swapped
/// for the edge `{m-1, m}` (dropped when `m = 1`, where that edge does not
/// exist). From `i = 2k` on the two plain partitions alternate forever.
pub fn make_box_censoring(n_sites: usize, k: usize, u: usize, s: f64) -> Result<CensoringScheme> {
    if u == 0 || !(s > 0.0) {
        return Err(SepError::InvalidParameter(format!("box half-width {u} and period {s} must be positive")));
    }
    if k == 0 || k >= n_sites {
        return Err(SepError::InvalidParameter(format!("need 1 <= k < N, got N = {n_sites}, k = {k}")));
    }
    let n = n_sites as i64;
    let u = u as i64;
    let base = |i: usize| -> BTreeSet<i64> {
        let first = if i.is_multiple_of(2) { 2 * u } else { 3 * u };
        (0..).map(|j| first + 2 * u * j).take_while(|&x| x <= n - 2 * u).collect()
    };
    let intervals = 2 * k + 2;
    let mut starts = Vec::with_capacity(intervals);
    let mut blocked = Vec::with_capacity(intervals);
    for i in 0..intervals {
        let mut set = base(i);
        if i < 2 * k {
            let m = (k - i / 2) as i64;
            if let Some(&x) = set.range(m..).next() {
                set.remove(&x);
            }
            if m >= 2 {
                set.insert(m - 1);
            }
        }
        starts.push(i as f64 * s);
        blocked.push(set.into_iter().collect());
    }
    Ok(CensoringScheme { starts, blocked, cycle: Some(Cycle { from: 2 * k, end: intervals as f64 * s }) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn piecewise_is_right_continuous() {
        let c = CensoringScheme::piecewise(vec![0.0, 1.0, 2.0], vec![vec![1], vec![2], vec![]]).unwrap();
        assert_eq!(c.blocked_at(0.0), &[1]);
        assert_eq!(c.blocked_at(0.999), &[1]);
        assert_eq!(c.blocked_at(1.0), &[2]);
        assert_eq!(c.blocked_at(5.0), &[] as &[i64]);
        assert!(CensoringScheme::piecewise(vec![0.5], vec![vec![]]).is_err());
        assert!(CensoringScheme::piecewise(vec![0.0, 0.0], vec![vec![], vec![]]).is_err());
    }

    #[test]
    fn box_scheme_partitions() {
        // k = 1 keeps the particle-release edits away from the far boxes.
        let c = make_box_censoring(40, 1, 3, 1.0).unwrap();
        assert_eq!(c.blocked_at(2.5), &[6, 12, 18, 24, 30]);
        assert_eq!(c.blocked_at(3.5), &[9, 15, 21, 27, 33]);
        assert_eq!(c.blocked_at(102.5), c.blocked_at(2.5));
        assert_eq!(c.blocked_at(103.5), c.blocked_at(3.5));
    }

    #[test]
    fn box_scheme_first_intervals() {
        let c = make_box_censoring(40, 3, 3, 1.0).unwrap();
        // i = 0: m = 3, lowest edge >= 3 is 6 -> replaced by {2,3}.
        assert_eq!(c.blocked_at(0.0), &[2, 12, 18, 24, 30]);
        // i = 1: m = 3, lowest odd-partition edge >= 3 is 9.
        assert_eq!(c.blocked_at(1.0), &[2, 15, 21, 27, 33]);
        // i = 2: m = 2, edge 6 replaced by {1,2}.
        assert_eq!(c.blocked_at(2.0), &[1, 12, 18, 24, 30]);
        // i = 4: m = 1, edge 6 removed, nothing added.
        assert_eq!(c.blocked_at(4.0), &[12, 18, 24, 30]);
        // i = 6: plain partition.
        assert_eq!(c.blocked_at(6.0), &[6, 12, 18, 24, 30]);
    }

    #[test]
    fn box_sizes_bounded() {
        let n = 50;
        let u = 4;
        let c = make_box_censoring(n, 1, u, 1.0).unwrap();
        for t in [2.5, 3.5] {
            let mut cuts = vec![0i64];
            cuts.extend_from_slice(c.blocked_at(t));
            cuts.push(n as i64);
            for w in cuts.windows(2) {
                let size = w[1] - w[0];
                assert!(size <= 4 * u as i64, "box of size {size}");
            }
            for w in cuts[1..cuts.len() - 1].windows(2) {
                assert_eq!(w[1] - w[0], 2 * u as i64);
            }
        }
    }

    #[test]
    fn pieces_cover_interval() {
        let c = make_box_censoring(30, 2, 2, 0.5).unwrap();
        let p = c.pieces(7.3);
        assert_eq!(p.first().unwrap().0, 0.0);
        assert!((p.last().unwrap().1 - 7.3).abs() < 1e-12);
        for w in p.windows(2) {
            assert!((w[0].1 - w[1].0).abs() < 1e-12);
        }
        for (a, b, edges) in &p {
            assert_eq!(c.blocked_at((a + b) / 2.0), *edges);
        }
        let empty = CensoringScheme::empty();
        assert_eq!(empty.pieces(3.0).len(), 1);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(make_box_censoring(10, 2, 0, 1.0).is_err());
        assert!(make_box_censoring(10, 2, 1, 0.0).is_err());
        assert!(make_box_censoring(10, 0, 1, 1.0).is_err());
    }
}
