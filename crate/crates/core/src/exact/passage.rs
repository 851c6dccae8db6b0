//! First passage quantities and the event-A estimates.

use nalgebra::{DMatrix, DVector};

use crate::env::Environment;
use crate::error::{Result, SepError};
use crate::scalar::Scalar;
use crate::statespace::{Configuration, StateSpace};

use super::{distribution_at, stationary, Distribution, GeneratorMatrix};

/// `E_from[τ_to]`, solved from `Q_{BB} m = -1` on the states `B != to`.
pub fn mean_first_passage<T: Scalar>(
    env: &Environment,
    k: usize,
    from: &Configuration,
    to: &Configuration,
) -> Result<f64> {
    let space = StateSpace::new(env.len(), k)?;
    let gen = GeneratorMatrix::<T>::sep(env, &space)?;
    let target = space.index_of(to)?;
    let start = space.index_of(from)?;
    if start == target {
        return Ok(0.0);
    }
    let local = |i: usize| if i < target { i } else { i - 1 };
    let m = space.len() - 1;
    let mut a = DMatrix::<f64>::zeros(m, m);
    for i in (0..space.len()).filter(|&i| i != target) {
        a[(local(i), local(i))] += gen.diagonal()[i].to_f64_lossy();
        for &(j, r) in gen.row(i) {
            if j != target {
                a[(local(i), local(j))] += r.to_f64_lossy();
            }
        }
    }
    let b = DVector::<f64>::from_element(m, -1.0);
    let x = a.lu().solve(&b).ok_or_else(|| SepError::Numerical(format!("{to} is not reachable from every state")))?;
    let v = x[local(start)];
    if !v.is_finite() || v < 0.0 {
        return Err(SepError::Numerical(format!("{to} is not reachable from every state")));
    }
    Ok(v)
}

/// `P_from(τ_to > s)`, from the law at time `s` of the chain absorbed at `to`.
pub fn first_passage_tail<T: Scalar>(
    env: &Environment,
    k: usize,
    from: &Configuration,
    to: &Configuration,
    s: f64,
) -> Result<f64> {
    let space = StateSpace::new(env.len(), k)?;
    let target = space.index_of(to)?;
    let mut absorbing = vec![false; space.len()];
    absorbing[target] = true;
    let gen = GeneratorMatrix::<T>::sep(env, &space)?.with_absorbing(&absorbing);
    let p = distribution_at(&Distribution::<T>::point_mass(&space, from)?, &gen, s)?;
    Ok((T::one() - p.probs()[target]).to_f64_lossy().clamp(0.0, 1.0))
}

fn check_half_filled(n: usize, k: usize) -> Result<()> {
    if 2 * k > n || k == 0 {
        return Err(SepError::InvalidParameter(format!("event-A estimates need 1 <= k <= N/2, got N = {n}, k = {k}")));
    }
    Ok(())
}

/// `N² · max_{j ≤ ⌊N/4⌋, ⌈N/2⌉ ≤ l ≤ N} ∏_{x=j}^{l-1} (1 - ω(x+1)) / ω(x)`.
///
/// Moving a particle of a configuration in `A` from its leftmost position
/// `j` to the rightmost empty site `l` multiplies the stationary weight by
/// the inverse of this product, and each image has at most `N²` preimages.
/// Accumulated in log space; a factor with `ω(x+1) = 1` contributes zero.
pub fn pi_a_bound(env: &Environment, k: usize) -> Result<f64> {
    let n = env.len();
    check_half_filled(n, k)?;
    let w = env.rates();
    let quarter = n / 4;
    if quarter == 0 {
        return Ok(0.0);
    }
    // cum[x] = Σ_{y=1}^{x} ln((1 - ω(y+1)) / ω(y)), sites 1-based.
    let mut cum = vec![0.0f64; n];
    for x in 1..n {
        cum[x] = cum[x - 1] + (1.0 - w[x]).ln() - w[x - 1].ln();
    }
    let half = n.div_ceil(2);
    let mut best = f64::NEG_INFINITY;
    for j in 1..=quarter {
        for l in half.max(j + 1)..=n {
            best = best.max(cum[l - 1] - cum[j - 1]);
        }
    }
    Ok((n as f64).powi(2) * best.exp())
}

/// `π(A)` from the exact stationary law.
pub fn exact_pi_a<T: Scalar>(env: &Environment, k: usize) -> Result<f64> {
    let n = env.len();
    check_half_filled(n, k)?;
    let space = StateSpace::new(n, k)?;
    let pi = stationary::<T>(env, k)?;
    let low = (1u64 << (n / 4)) - 1;
    Ok(pi.mass_where(|i| space.mask(i) & low != 0).to_f64_lossy())
}
