//! Stationary laws: the reversible product formula, and a generic solve on
//! the unique closed communicating class.

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::env::Environment;
use crate::error::{Result, SepError};
use crate::scalar::Scalar;
use crate::statespace::StateSpace;

use super::{Distribution, GeneratorMatrix};

/// Closed classes up to this size are solved by dense LU; larger ones by
/// Gauss-Seidel sweeps.
pub const DENSE_SOLVE_LIMIT: usize = 1024;

const GS_MAX_SWEEPS: usize = 1_000_000;

/// Stationary law of the exclusion process on `Ω_{N,k}`, `N = env.len()`.
///
/// With every rate strictly inside `(0, 1)` the chain is reversible and
/// `π(η) ∝ ∏_i ∏_{x < z_i} ω(x) / (1 - ω(x+1))` over the particle positions
/// `z_i`, evaluated in log space. Otherwise the generator is solved on its
/// closed class.
pub fn stationary<T: Scalar>(env: &Environment, k: usize) -> Result<Distribution<T>> {
    let space = StateSpace::new(env.len(), k)?;
    if !env.is_interior() {
        return stationary_by_solve(env, k);
    }
    let w = env.rates();
    let n = w.len();
    // s[i]: log weight of one particle at 0-based position i.
    let mut s = vec![0.0f64; n];
    for i in 1..n {
        s[i] = s[i - 1] + w[i - 1].ln() - (1.0 - w[i]).ln();
    }
    let logs: Vec<f64> =
        space.masks().iter().map(|&m| (0..n).filter(|&i| m >> i & 1 == 1).map(|i| s[i]).sum()).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = logs.iter().map(|&l| (l - top).exp()).collect();
    let z: f64 = unnorm.iter().sum();
    let probs = unnorm.into_iter().map(|p| T::of(p / z)).collect();
    Distribution::new(probs, n, k)
}

/// Stationary law from the generator alone (independent of the product
/// formula).
pub fn stationary_by_solve<T: Scalar>(env: &Environment, k: usize) -> Result<Distribution<T>> {
    let space = StateSpace::new(env.len(), k)?;
    let gen = GeneratorMatrix::<T>::sep(env, &space)?;
    Distribution::new(solve_stationary(&gen)?, env.len(), k)
}

/// Solves `πQ = 0`, `Σπ = 1` on the unique closed class of `gen`, with zero
/// mass elsewhere.
pub fn solve_stationary<T: Scalar>(gen: &GeneratorMatrix<T>) -> Result<Vec<T>> {
    let class = closed_class(gen)?;
    let size = gen.len();
    let mut local = vec![usize::MAX; size];
    for (a, &i) in class.iter().enumerate() {
        local[i] = a;
    }
    let sub = if class.len() <= DENSE_SOLVE_LIMIT {
        dense_solve(gen, &class, &local)?
    } else {
        gauss_seidel(gen, &class, &local)?
    };
    let mut out = vec![T::zero(); size];
    for (a, &i) in class.iter().enumerate() {
        out[i] = sub[a];
    }
    Ok(out)
}

/// States of the unique closed strongly connected component, sorted.
fn closed_class<T: Scalar>(gen: &GeneratorMatrix<T>) -> Result<Vec<usize>> {
    let n = gen.len();
    let mut g = DiGraph::<(), ()>::with_capacity(n, n * 4);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for i in 0..n {
        for &(j, r) in gen.row(i) {
            if r > T::zero() && j != i {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let sccs = tarjan_scc(&g);
    let mut comp = vec![0usize; n];
    for (c, scc) in sccs.iter().enumerate() {
        for v in scc {
            comp[v.index()] = c;
        }
    }
    let mut closed = vec![true; sccs.len()];
    for i in 0..n {
        for &(j, r) in gen.row(i) {
            if r > T::zero() && comp[i] != comp[j] {
                closed[comp[i]] = false;
            }
        }
    }
    let mut found = closed.iter().enumerate().filter(|&(_, &c)| c).map(|(c, _)| c);
    let first = found.next().ok_or_else(|| SepError::Numerical("generator has no closed class".into()))?;
    if found.next().is_some() {
        return Err(SepError::Numerical("generator has several closed classes".into()));
    }
    let mut class: Vec<usize> = sccs[first].iter().map(|v| v.index()).collect();
    class.sort_unstable();
    Ok(class)
}

fn dense_solve<T: Scalar>(gen: &GeneratorMatrix<T>, class: &[usize], local: &[usize]) -> Result<Vec<T>> {
    let m = class.len();
    // Rows of A are the columns of Q restricted to the class; the last
    // equation is replaced by the normalization.
    let mut a = DMatrix::<f64>::zeros(m, m);
    for (ai, &i) in class.iter().enumerate() {
        a[(ai, ai)] += gen.diagonal()[i].to_f64_lossy();
        for &(j, r) in gen.row(i) {
            let aj = local[j];
            if aj != usize::MAX {
                a[(aj, ai)] += r.to_f64_lossy();
            }
        }
    }
    for c in 0..m {
        a[(m - 1, c)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(m);
    b[m - 1] = 1.0;
    let x = a.lu().solve(&b).ok_or_else(|| SepError::Numerical("singular stationary system".into()))?;
    Ok(x.iter().map(|&v| T::of(v.max(0.0))).collect())
}

fn gauss_seidel<T: Scalar>(gen: &GeneratorMatrix<T>, class: &[usize], local: &[usize]) -> Result<Vec<T>> {
    let m = class.len();
    let mut incoming: Vec<Vec<(usize, T)>> = vec![Vec::new(); m];
    for (ai, &i) in class.iter().enumerate() {
        for &(j, r) in gen.row(i) {
            if local[j] != usize::MAX {
                incoming[local[j]].push((ai, r));
            }
        }
    }
    let exit: Vec<T> = class.iter().map(|&i| -gen.diagonal()[i]).collect();
    let mut pi = vec![T::one() / T::of(m as f64); m];
    let tol = T::epsilon() * T::of(64.0);
    for _ in 0..GS_MAX_SWEEPS {
        let mut change = T::zero();
        for j in 0..m {
            let inflow: T = incoming[j].iter().map(|&(i, r)| pi[i] * r).sum();
            let new = inflow / exit[j];
            change = change.max((new - pi[j]).abs() / new.max(T::min_positive_value()));
            pi[j] = new;
        }
        let z: T = pi.iter().copied().sum();
        for p in &mut pi {
            *p = *p / z;
        }
        if change <= tol {
            return Ok(pi);
        }
    }
    Err(SepError::Numerical("Gauss-Seidel did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{sample_environment, EnvironmentLaw};

    #[test]
    fn two_site_constant() {
        let p = 0.3;
        let pi = stationary::<f64>(&Environment::constant(p, 2).unwrap(), 1).unwrap();
        let space = StateSpace::new(2, 1).unwrap();
        let i01 = space.index_of(&"01".parse().unwrap()).unwrap();
        let i10 = space.index_of(&"10".parse().unwrap()).unwrap();
        assert!((pi.probs()[i01] - p).abs() < 1e-14);
        assert!((pi.probs()[i10] - (1.0 - p)).abs() < 1e-14);
    }

    #[test]
    fn three_site_geometric() {
        let p: f64 = 0.7;
        let r = p / (1.0 - p);
        let pi = stationary::<f64>(&Environment::constant(p, 3).unwrap(), 1).unwrap();
        let z = 1.0 + r + r * r;
        let space = StateSpace::new(3, 1).unwrap();
        for (lit, want) in [("100", 1.0 / z), ("010", r / z), ("001", r * r / z)] {
            let i = space.index_of(&lit.parse().unwrap()).unwrap();
            assert!((pi.probs()[i] - want).abs() < 1e-14, "{lit}");
        }
    }

    #[test]
    fn detailed_balance() {
        let law = EnvironmentLaw::uniform(0.1, 0.95).unwrap();
        for seed in 0..10 {
            let env = sample_environment(&law, 7, seed).unwrap();
            let space = StateSpace::new(7, 3).unwrap();
            let g = GeneratorMatrix::<f64>::sep(&env, &space).unwrap();
            let pi = stationary::<f64>(&env, 3).unwrap();
            for i in 0..space.len() {
                for &(j, r) in g.row(i) {
                    let back = g.rate(j, i);
                    assert!((pi.probs()[i] * r - pi.probs()[j] * back).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn product_formula_matches_solve() {
        let law = EnvironmentLaw::uniform(0.3, 0.99).unwrap();
        for seed in 0..10 {
            let env = sample_environment(&law, 8, seed).unwrap();
            let a = stationary::<f64>(&env, 4).unwrap();
            let b = stationary_by_solve::<f64>(&env, 4).unwrap();
            let gap = a.probs().iter().zip(b.probs()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(gap < 1e-10, "seed {seed}: {gap}");
        }
    }

    #[test]
    fn rate_one_site_uses_closed_class() {
        // ω(2) = 1: a particle at site 2 never steps left, so states with a
        // hole at 1 and a particle at 2 cannot be re-entered from the right.
        let env = Environment::new(vec![0.6, 1.0, 0.7, 0.8]).unwrap();
        let pi = stationary::<f64>(&env, 2).unwrap();
        let space = StateSpace::new(4, 2).unwrap();
        let g = GeneratorMatrix::<f64>::sep(&env, &space).unwrap();
        // Stationarity.
        for j in 0..space.len() {
            let flow: f64 = (0..space.len()).map(|i| pi.probs()[i] * g.rate(i, j)).sum();
            assert!(flow.abs() < 1e-12);
        }
        let top = space.index_of(&"1100".parse().unwrap()).unwrap();
        assert_eq!(pi.probs()[top], 0.0);
    }

    #[test]
    fn gauss_seidel_agrees_with_dense() {
        let law = EnvironmentLaw::uniform(0.3, 0.9).unwrap();
        let env = sample_environment(&law, 8, 2).unwrap();
        let space = StateSpace::new(8, 4).unwrap();
        let g = GeneratorMatrix::<f64>::sep(&env, &space).unwrap();
        let class: Vec<usize> = (0..space.len()).collect();
        let dense = dense_solve(&g, &class, &class).unwrap();
        let gs = gauss_seidel(&g, &class, &class).unwrap();
        for (a, b) in dense.iter().zip(&gs) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
