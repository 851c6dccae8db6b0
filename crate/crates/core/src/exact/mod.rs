//! Exact analysis on the enumerated state space.
//!
//! Generators are stored as sparse rows. Transient laws use uniformization:
//! `p exp(tQ) = sum_j Pois(Λt; j) p P^j` with `P = I + Q/Λ`, truncated once
//! the remaining Poisson mass drops below [`TRUNCATION`], which bounds the
//! L1 error by the same amount.

mod dominance;
mod mixing;
mod passage;
mod stationary;

use std::collections::HashMap;

use rayon::prelude::*;

use crate::env::Environment;
use crate::error::{Result, SepError};
use crate::graphical::CensoringScheme;
use crate::scalar::Scalar;
use crate::statespace::{Configuration, StateSpace};

pub use dominance::{stochastic_dominance, stochastic_dominance_with, Dominance, DominanceMethod, UPSET_VISIT_CAP};
pub use mixing::{exact_mixing_time, worst_case_tv, MixingTime, MIXING_TOLERANCE};
pub use passage::{exact_pi_a, first_passage_tail, mean_first_passage, pi_a_bound};
pub use stationary::{solve_stationary, stationary, stationary_by_solve, DENSE_SOLVE_LIMIT};

/// L1 truncation error of one uniformized step.
pub const TRUNCATION: f64 = 1e-10;

/// Sparse continuous-time generator.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix<T> {
    rows: Vec<Vec<(usize, T)>>,
    diag: Vec<T>,
    n: usize,
    k: usize,
}

impl<T: Scalar> GeneratorMatrix<T> {
    /// Generator from off-diagonal rates; the diagonal balances each row.
    /// `n`, `k` are shape tags carried into distributions.
    pub fn from_rows(rows: Vec<Vec<(usize, T)>>, n: usize, k: usize) -> Result<Self> {
        let size = rows.len();
        let mut diag = Vec::with_capacity(size);
        for row in &rows {
            let mut out = T::zero();
            for &(j, r) in row {
                if j >= size || r < T::zero() || !r.is_finite() {
                    return Err(SepError::Numerical(format!("bad rate {r} to state {j}")));
                }
                out = out + r;
            }
            diag.push(-out);
        }
        Ok(GeneratorMatrix { rows, diag, n, k })
    }

    /// Generator of the exclusion process on `Ω_{N,k}`, `N = env.len()`.
    pub fn sep(env: &Environment, space: &StateSpace) -> Result<Self> {
        Self::sep_censored(env, space, &[])
    }

    /// As [`GeneratorMatrix::sep`] with the rates across the given edges set
    /// to zero. Edges are labelled by their left site.
    pub fn sep_censored(env: &Environment, space: &StateSpace, blocked: &[i64]) -> Result<Self> {
        let n = space.n();
        if env.len() != n {
            return Err(SepError::Mismatch(format!("environment has {} sites, state space {n}", env.len())));
        }
        let first = env.first_site();
        let open: Vec<bool> = (0..n.saturating_sub(1)).map(|i| !blocked.contains(&(first + i as i64))).collect();
        let w: Vec<T> = env.rates().iter().map(|&r| T::of(r)).collect();
        let rows = space
            .masks()
            .iter()
            .map(|&m| {
                let mut row = Vec::new();
                for i in 0..n {
                    if m >> i & 1 == 0 {
                        continue;
                    }
                    if i + 1 < n && open[i] && m >> (i + 1) & 1 == 0 && w[i] > T::zero() {
                        row.push((space.index_of_mask(m ^ (0b11 << i)), w[i]));
                    }
                    let left = T::one() - w[i];
                    if i > 0 && open[i - 1] && m >> (i - 1) & 1 == 0 && left > T::zero() {
                        row.push((space.index_of_mask(m ^ (0b11 << (i - 1))), left));
                    }
                }
                row
            })
            .collect();
        Self::from_rows(rows, n, space.k())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n, self.k)
    }

    /// Off-diagonal entries of row `i`.
    pub fn row(&self, i: usize) -> &[(usize, T)] {
        &self.rows[i]
    }

    pub fn diagonal(&self) -> &[T] {
        &self.diag
    }

    /// Rate `Q(i, j)` for `i != j`.
    pub fn rate(&self, i: usize, j: usize) -> T {
        if i == j {
            return self.diag[i];
        }
        self.rows[i].iter().filter(|&&(c, _)| c == j).map(|&(_, r)| r).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let n = self.len();
        let mut out = vec![vec![T::zero(); n]; n];
        for (i, row) in self.rows.iter().enumerate() {
            out[i][i] = self.diag[i];
            for &(j, r) in row {
                out[i][j] = out[i][j] + r;
            }
        }
        out
    }

    /// Largest exit rate.
    pub fn max_exit_rate(&self) -> T {
        self.diag.iter().fold(T::zero(), |m, &d| m.max(-d))
    }

    /// Same chain with the listed states made absorbing.
    pub fn with_absorbing(&self, absorbing: &[bool]) -> Self {
        let rows = self.rows.iter().zip(absorbing).map(|(r, &a)| if a { Vec::new() } else { r.clone() }).collect();
        Self::from_rows(rows, self.n, self.k).expect("rates already validated")
    }

    /// Largest `|row sum|`.
    pub fn max_row_sum(&self) -> T {
        self.rows
            .iter()
            .zip(&self.diag)
            .map(|(r, &d)| (r.iter().map(|&(_, x)| x).sum::<T>() + d).abs())
            .fold(T::zero(), T::max)
    }

    /// `out = v P` with `P = I + Q/Λ`.
    fn step(&self, v: &[T], out: &mut [T], inv_lambda: T) {
        for (o, (&x, &d)) in out.iter_mut().zip(v.iter().zip(&self.diag)) {
            *o = x + x * d * inv_lambda;
        }
        for (i, row) in self.rows.iter().enumerate() {
            let x = v[i];
            if x == T::zero() {
                continue;
            }
            let s = x * inv_lambda;
            for &(j, r) in row {
                out[j] = out[j] + s * r;
            }
        }
    }
}

/// Probability vector over an enumerated state space.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<T> {
    probs: Vec<T>,
    n: usize,
    k: usize,
}

impl<T: Scalar> Distribution<T> {
    /// Wraps a vector whose entries are non-negative and sum to one within
    /// a tolerance suited to `T`.
    pub fn new(probs: Vec<T>, n: usize, k: usize) -> Result<Self> {
        let total: T = probs.iter().copied().sum();
        let tol = T::of(1e-6).max(T::epsilon() * T::of(probs.len() as f64 * 8.0));
        if probs.iter().any(|&p| p < -tol || !p.is_finite()) || (total - T::one()).abs() > tol {
            return Err(SepError::Numerical(format!("not a probability vector (total {total})")));
        }
        Ok(Distribution { probs, n, k })
    }

    pub fn point_mass(space: &StateSpace, eta: &Configuration) -> Result<Self> {
        let mut probs = vec![T::zero(); space.len()];
        probs[space.index_of(eta)?] = T::one();
        Ok(Distribution { probs, n: space.n(), k: space.k() })
    }

    pub fn uniform(space: &StateSpace) -> Self {
        let p = T::one() / T::of(space.len() as f64);
        Distribution { probs: vec![p; space.len()], n: space.n(), k: space.k() }
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<T> {
        self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n, self.k)
    }

    pub fn total(&self) -> T {
        self.probs.iter().copied().sum()
    }

    /// Mass of the states selected by `pred` (called with state indices).
    pub fn mass_where<F: Fn(usize) -> bool>(&self, pred: F) -> T {
        self.probs.iter().enumerate().filter(|&(i, _)| pred(i)).map(|(_, &p)| p).sum()
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() || self.shape() != other.shape() {
            return Err(SepError::Mismatch("distributions live on different state spaces".into()));
        }
        Ok(())
    }
}

/// Half the L1 distance.
pub fn tv_distance<T: Scalar>(p: &Distribution<T>, q: &Distribution<T>) -> Result<T> {
    p.check_same(q)?;
    Ok(tv_slices(&p.probs, &q.probs))
}

pub(crate) fn tv_slices<T: Scalar>(p: &[T], q: &[T]) -> T {
    p.iter().zip(q).map(|(&a, &b)| (a - b).abs()).sum::<T>() / T::of(2.0)
}

/// Log Poisson weights for `exp(-λt)` uniformization, up to the index at
/// which the tail mass drops below [`TRUNCATION`]. Computed in `f64`.
pub(crate) fn poisson_weights(mean: f64) -> Vec<f64> {
    if mean <= 0.0 {
        return vec![1.0];
    }
    let ln_mean = mean.ln();
    let mut lw = -mean;
    let mut weights = Vec::new();
    let mut acc = 0.0;
    let mut j = 0usize;
    loop {
        let w = lw.exp();
        weights.push(w);
        acc += w;
        if j as f64 > mean && 1.0 - acc <= TRUNCATION {
            break;
        }
        // Hard stop far out in the tail, where the remaining mass is far
        // below any representable deficit of `acc`.
        if j as f64 > mean + 40.0 * mean.sqrt() + 100.0 {
            break;
        }
        j += 1;
        lw += ln_mean - (j as f64).ln();
    }
    weights
}

/// Advances each row of `rows` (a batch of distributions) by time `t`.
pub(crate) fn propagate_rows<T: Scalar>(gen: &GeneratorMatrix<T>, rows: &mut [Vec<T>], t: f64) {
    let lambda = gen.max_exit_rate().to_f64_lossy();
    if t <= 0.0 || lambda <= T::rate_epsilon().to_f64_lossy() {
        return;
    }
    let weights: Vec<T> = poisson_weights(lambda * t).into_iter().map(T::of).collect();
    let inv = T::of(1.0 / lambda);
    rows.par_iter_mut().for_each(|row| {
        let n = row.len();
        let mut cur = row.clone();
        let mut next = vec![T::zero(); n];
        let mut acc: Vec<T> = cur.iter().map(|&x| x * weights[0]).collect();
        for &w in &weights[1..] {
            gen.step(&cur, &mut next, inv);
            std::mem::swap(&mut cur, &mut next);
            if w > T::zero() {
                for (a, &x) in acc.iter_mut().zip(&cur) {
                    *a = *a + w * x;
                }
            }
        }
        *row = acc;
    });
}

/// `init · exp(tQ)`.
pub fn distribution_at<T: Scalar>(init: &Distribution<T>, gen: &GeneratorMatrix<T>, t: f64) -> Result<Distribution<T>> {
    if !(t >= 0.0) {
        return Err(SepError::InvalidParameter(format!("time {t} must be non-negative")));
    }
    if init.len() != gen.len() {
        return Err(SepError::Mismatch("distribution and generator sizes differ".into()));
    }
    let mut rows = vec![init.probs.clone()];
    propagate_rows(gen, &mut rows, t);
    Ok(Distribution { probs: rows.pop().unwrap(), n: init.n, k: init.k })
}

/// Law at time `t` of the dynamics censored by `scheme`: the product of the
/// exponentials of the censored generators over the constant pieces.
pub fn censored_distribution_at<T: Scalar>(
    init: &Distribution<T>,
    env: &Environment,
    space: &StateSpace,
    scheme: &CensoringScheme,
    t: f64,
) -> Result<Distribution<T>> {
    if !(t >= 0.0) {
        return Err(SepError::InvalidParameter(format!("time {t} must be non-negative")));
    }
    let mut cache: HashMap<Vec<i64>, GeneratorMatrix<T>> = HashMap::new();
    let mut cur = init.clone();
    for (from, to, edges) in scheme.pieces(t) {
        if !cache.contains_key(edges) {
            cache.insert(edges.to_vec(), GeneratorMatrix::sep_censored(env, space, edges)?);
        }
        cur = distribution_at(&cur, &cache[edges], to - from)?;
    }
    Ok(cur)
}
