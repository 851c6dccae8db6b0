//! Total variation mixing time over all point-mass initial states.

use crate::env::Environment;
use crate::error::{Result, SepError};
use crate::scalar::Scalar;
use crate::statespace::StateSpace;

use super::{propagate_rows, stationary, tv_slices, GeneratorMatrix};

/// Width of the final bisection bracket.
pub const MIXING_TOLERANCE: f64 = 1e-6;

/// Slack allowed when checking that the worst-case distance does not
/// increase between evaluation points.
const MONOTONE_SLACK: f64 = 1e-9;

const MAX_DOUBLINGS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct MixingTime {
    /// Upper end of the final bracket: the worst-case distance is below
    /// `ε` here and at least `ε` within [`MIXING_TOLERANCE`] before.
    pub time: f64,
    /// Worst-case distance at `time`.
    pub distance: f64,
    /// Number of worst-case distance evaluations performed.
    pub evaluations: usize,
}

fn worst<T: Scalar>(rows: &[Vec<T>], pi: &[T]) -> f64 {
    rows.iter().map(|r| tv_slices(r, pi).to_f64_lossy()).fold(0.0, f64::max)
}

fn identity<T: Scalar>(n: usize) -> Vec<Vec<T>> {
    (0..n)
        .map(|i| {
            let mut r = vec![T::zero(); n];
            r[i] = T::one();
            r
        })
        .collect()
}

/// `max_η ‖P_η(η_t ∈ ·) − π‖_TV` at each of the (sorted) `times`.
pub fn worst_case_tv<T: Scalar>(env: &Environment, k: usize, times: &[f64]) -> Result<Vec<f64>> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(SepError::InvalidParameter("times must be sorted and non-negative".into()));
    }
    let space = StateSpace::new(env.len(), k)?;
    let gen = GeneratorMatrix::<T>::sep(env, &space)?;
    let pi = stationary::<T>(env, k)?.into_probs();
    let mut rows = identity::<T>(space.len());
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        propagate_rows(&gen, &mut rows, t - now);
        now = t;
        out.push(worst(&rows, &pi));
    }
    Ok(out)
}

/// `inf{t ≥ 0 : max_η ‖P_η(η_t ∈ ·) − π‖_TV < ε}`.
///
/// The worst-case distance is bracketed by doubling and then bisected. All
/// rows are carried forward from the lower end of the bracket, so each
/// evaluation only propagates over the bracket increment. Every evaluation
/// is checked against the bracket ends; a violation of monotonicity beyond
/// rounding aborts with a numerical error instead of returning a time.
pub fn exact_mixing_time<T: Scalar>(env: &Environment, k: usize, eps: f64) -> Result<MixingTime> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(SepError::InvalidParameter(format!("ε = {eps} must lie in (0, 1)")));
    }
    let space = StateSpace::new(env.len(), k)?;
    let gen = GeneratorMatrix::<T>::sep(env, &space)?;
    let pi = stationary::<T>(env, k)?.into_probs();
    let mut lo_rows = identity::<T>(space.len());
    let mut lo_t = 0.0;
    let mut lo_d = worst(&lo_rows, &pi);
    let mut evaluations = 1;
    if lo_d < eps {
        return Ok(MixingTime { time: 0.0, distance: lo_d, evaluations });
    }
    let rate = gen.max_exit_rate().to_f64_lossy().max(1e-12);
    let mut step = 1.0 / rate;
    let non_increasing = |before: f64, after: f64| -> Result<()> {
        if after > before + MONOTONE_SLACK {
            Err(SepError::Numerical(format!("worst-case distance rose from {before} to {after}")))
        } else {
            Ok(())
        }
    };
    // Bracket: advance lo until one more step lands below ε.
    let (mut hi_t, mut hi_d) = {
        let mut found = None;
        for _ in 0..MAX_DOUBLINGS {
            let mut rows = lo_rows.clone();
            propagate_rows(&gen, &mut rows, step);
            let d = worst(&rows, &pi);
            evaluations += 1;
            non_increasing(lo_d, d)?;
            if d < eps {
                found = Some((lo_t + step, d));
                break;
            }
            lo_rows = rows;
            lo_t += step;
            lo_d = d;
            step *= 2.0;
        }
        found.ok_or_else(|| SepError::Numerical("worst-case distance never fell below ε".into()))?
    };
    while hi_t - lo_t > MIXING_TOLERANCE {
        let half = (hi_t - lo_t) / 2.0;
        let mut rows = lo_rows.clone();
        propagate_rows(&gen, &mut rows, half);
        let d = worst(&rows, &pi);
        evaluations += 1;
        non_increasing(lo_d, d)?;
        non_increasing(d, hi_d)?;
        if d < eps {
            hi_t = lo_t + half;
            hi_d = d;
        } else {
            lo_rows = rows;
            lo_t += half;
            lo_d = d;
        }
    }
    Ok(MixingTime { time: hi_t, distance: hi_d, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{sample_environment, EnvironmentLaw};

    #[test]
    fn two_state_is_ln_two() {
        let env = Environment::constant(0.5, 2).unwrap();
        let m = exact_mixing_time::<f64>(&env, 1, 0.25).unwrap();
        assert!((m.time - std::f64::consts::LN_2).abs() <= 1e-6, "{}", m.time);
    }

    #[test]
    fn monotone_in_eps() {
        let law = EnvironmentLaw::uniform(0.55, 0.95).unwrap();
        for seed in 0..5 {
            let env = sample_environment(&law, 6, seed).unwrap();
            let a = exact_mixing_time::<f64>(&env, 3, 0.125).unwrap().time;
            let b = exact_mixing_time::<f64>(&env, 3, 0.25).unwrap().time;
            assert!(a >= b);
            // Above the initial worst-case distance, which is below one, the
            // mixing time is zero.
            let d0 = worst_case_tv::<f64>(&env, 3, &[0.0]).unwrap()[0];
            assert!(d0 < 1.0);
            let c = exact_mixing_time::<f64>(&env, 3, (1.0 + d0) / 2.0).unwrap().time;
            assert_eq!(c, 0.0);
        }
    }

    #[test]
    fn worst_case_curve_non_increasing() {
        let env = Environment::new(vec![0.7, 0.55, 0.9, 0.6, 0.8, 0.65]).unwrap();
        let grid: Vec<f64> = (0..40).map(|i| i as f64 * 0.25).collect();
        let d = worst_case_tv::<f64>(&env, 3, &grid).unwrap();
        assert!((d[0] - d[0].min(1.0)).abs() < 1e-15);
        for w in d.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn bracket_matches_grid() {
        let env = Environment::new(vec![0.7, 0.6, 0.9, 0.8]).unwrap();
        let m = exact_mixing_time::<f64>(&env, 2, 0.25).unwrap();
        let d = worst_case_tv::<f64>(&env, 2, &[m.time - 2e-6, m.time]).unwrap();
        assert!(d[0] >= 0.25 - 1e-6 && d[1] < 0.25);
    }
}
