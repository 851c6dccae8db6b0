//! Graphical construction of the exclusion process.
//!
//! Every site carries a rate-2 clock. At a ring of site `x` a fair coin and
//! a uniform mark `U` are drawn: on HEAD (and `x` not the right edge) a
//! particle at `x` jumps to a vacant `x+1` iff `U <= w(x)`; on TAIL (and `x`
//! not the left edge) a particle at `x` jumps to a vacant `x-1` iff
//! `U > w(x)`. This gives jump rates `w(x)` to the right and `1 - w(x)` to
//! the left, and driving several trajectories with one [`EventStream`] is
//! the canonical coupling: monotone in the initial state and in the
//! environment.

mod censor;
mod second_class;
mod stream;

use std::io::Write;

pub use censor::{make_box_censoring, CensoringScheme};
pub use second_class::{
    evolve_second_class, project_2to0, project_2to1, project_star, SecondClassRun, StarProjection,
    ThreeSpeciesConfiguration,
};
pub use stream::{Coin, Event, EventStream, MergedEvents, SiteClock, CLOCK_RATE};

use crate::env::Environment;
use crate::error::{Result, SepError};
use crate::statespace::{ground_state, leq_unchecked, top_state, Configuration};

/// Applies one ring at storage index `i`. Returns the `(from, to)` indices
/// of the particle that moved, if any.
#[inline]
pub(crate) fn apply_event(occ: &mut [bool], rates: &[f64], i: usize, coin: Coin, u: f64) -> Option<(usize, usize)> {
    match coin {
        Coin::Head => {
            if i + 1 < occ.len() && u <= rates[i] && occ[i] && !occ[i + 1] {
                occ[i] = false;
                occ[i + 1] = true;
                return Some((i, i + 1));
            }
        }
        Coin::Tail => {
            if i > 0 && u > rates[i] && occ[i] && !occ[i - 1] {
                occ[i] = false;
                occ[i - 1] = true;
                return Some((i, i - 1));
            }
        }
    }
    None
}

/// Left endpoint label of the edge a ring at `site` would use.
#[inline]
pub(crate) fn edge_of(site: i64, coin: Coin) -> i64 {
    match coin {
        Coin::Head => site,
        Coin::Tail => site - 1,
    }
}

fn check_shape(eta: &Configuration, env: &Environment) -> Result<()> {
    if eta.len() != env.len() {
        return Err(SepError::Mismatch(format!("configuration has {} sites, environment {}", eta.len(), env.len())));
    }
    Ok(())
}

fn events_for(env: &Environment, stream: &EventStream, t: f64) -> Result<MergedEvents> {
    stream.check_time(t)?;
    stream.events_in(env.first_site(), env.last_site())
}

/// State at time `t` started from `eta0`.
pub fn evolve(eta0: &Configuration, env: &Environment, stream: &EventStream, t: f64) -> Result<Configuration> {
    check_shape(eta0, env)?;
    let mut eta = eta0.clone();
    let first = env.first_site();
    let rates = env.rates();
    for ev in events_for(env, stream, t)? {
        if ev.time > t {
            break;
        }
        apply_event(eta.bits_mut(), rates, (ev.site - first) as usize, ev.coin, ev.u);
    }
    Ok(eta)
}

/// Every state change up to `t`, starting with `(0, eta0)`.
pub fn trajectory(
    eta0: &Configuration,
    env: &Environment,
    stream: &EventStream,
    t: f64,
) -> Result<Vec<(f64, Configuration)>> {
    check_shape(eta0, env)?;
    let mut eta = eta0.clone();
    let mut out = vec![(0.0, eta.clone())];
    let first = env.first_site();
    for ev in events_for(env, stream, t)? {
        if ev.time > t {
            break;
        }
        if apply_event(eta.bits_mut(), env.rates(), (ev.site - first) as usize, ev.coin, ev.u).is_some() {
            out.push((ev.time, eta.clone()));
        }
    }
    Ok(out)
}

/// Writes `time,configuration` rows.
pub fn write_trajectory_csv<W: Write>(rows: &[(f64, Configuration)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "configuration"])?;
    for (t, c) in rows {
        w.write_record([format!("{t}"), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn check_coupled(starts: &[Configuration], envs: &[Environment]) -> Result<()> {
    if starts.len() != envs.len() || starts.is_empty() {
        return Err(SepError::Mismatch("need one environment per starting configuration".into()));
    }
    let (first, last) = (envs[0].first_site(), envs[0].last_site());
    for (s, e) in starts.iter().zip(envs) {
        check_shape(s, e)?;
        if e.first_site() != first || e.last_site() != last {
            return Err(SepError::Mismatch("coupled environments must share one site range".into()));
        }
    }
    Ok(())
}

/// Coupled evolution under one shared stream.
pub fn evolve_coupled(
    starts: &[Configuration],
    envs: &[Environment],
    stream: &EventStream,
    t: f64,
) -> Result<Vec<Configuration>> {
    evolve_coupled_observed(starts, envs, stream, t, |_, _| {})
}

/// As [`evolve_coupled`], calling `observe(time, states)` after every ring
/// that moved at least one particle.
pub fn evolve_coupled_observed<F>(
    starts: &[Configuration],
    envs: &[Environment],
    stream: &EventStream,
    t: f64,
    mut observe: F,
) -> Result<Vec<Configuration>>
where
    F: FnMut(f64, &[Configuration]),
{
    check_coupled(starts, envs)?;
    let mut states = starts.to_vec();
    let first = envs[0].first_site();
    for ev in events_for(&envs[0], stream, t)? {
        if ev.time > t {
            break;
        }
        let i = (ev.site - first) as usize;
        let mut moved = false;
        for (s, e) in states.iter_mut().zip(envs) {
            moved |= apply_event(s.bits_mut(), e.rates(), i, ev.coin, ev.u).is_some();
        }
        if moved {
            observe(ev.time, &states);
        }
    }
    Ok(states)
}

/// Counts order violations along a coupled pair `lower ⪯ upper`.
pub fn coupled_order_violations(
    lower: (&Configuration, &Environment),
    upper: (&Configuration, &Environment),
    stream: &EventStream,
    t: f64,
) -> Result<usize> {
    let mut violations = usize::from(!leq_unchecked(lower.0.bits(), upper.0.bits()));
    evolve_coupled_observed(
        &[lower.0.clone(), upper.0.clone()],
        &[lower.1.clone(), upper.1.clone()],
        stream,
        t,
        |_, s| {
            if !leq_unchecked(s[0].bits(), s[1].bits()) {
                violations += 1;
            }
        },
    )?;
    Ok(violations)
}

/// Dynamics with the rings on blocked edges suppressed.
pub fn evolve_censored(
    eta0: &Configuration,
    env: &Environment,
    stream: &EventStream,
    scheme: &CensoringScheme,
    t: f64,
) -> Result<Configuration> {
    check_shape(eta0, env)?;
    let mut eta = eta0.clone();
    let first = env.first_site();
    for ev in events_for(env, stream, t)? {
        if ev.time > t {
            break;
        }
        if scheme.is_blocked(edge_of(ev.site, ev.coin), ev.time) {
            continue;
        }
        apply_event(eta.bits_mut(), env.rates(), (ev.site - first) as usize, ev.coin, ev.u);
    }
    Ok(eta)
}

/// Censored and uncensored trajectories observed on a time grid, driven by
/// the same stream. Returns the states at each grid time.
pub fn evolve_censored_on_grid(
    eta0: &Configuration,
    env: &Environment,
    stream: &EventStream,
    scheme: Option<&CensoringScheme>,
    grid: &[f64],
) -> Result<Vec<Configuration>> {
    check_shape(eta0, env)?;
    let t_end = grid.iter().copied().fold(0.0, f64::max);
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(SepError::InvalidParameter("time grid must be non-decreasing".into()));
    }
    let mut eta = eta0.clone();
    let mut out = Vec::with_capacity(grid.len());
    let mut next = 0;
    let first = env.first_site();
    for ev in events_for(env, stream, t_end)? {
        while next < grid.len() && grid[next] < ev.time {
            out.push(eta.clone());
            next += 1;
        }
        if next == grid.len() {
            break;
        }
        if let Some(s) = scheme {
            if s.is_blocked(edge_of(ev.site, ev.coin), ev.time) {
                continue;
            }
        }
        apply_event(eta.bits_mut(), env.rates(), (ev.site - first) as usize, ev.coin, ev.u);
    }
    while out.len() < grid.len() {
        out.push(eta.clone());
    }
    Ok(out)
}

/// First ring at which the trajectories from `θ_{N,k}` and `ϑ_{N,k}` agree;
/// `None` if they are still apart at `horizon`.
///
/// By monotonicity every other initial state is sandwiched between the two,
/// so this bounds the coupling time of the whole grand coupling.
pub fn coalescence_time(env: &Environment, k: usize, stream: &EventStream, horizon: f64) -> Result<Option<f64>> {
    let n = env.len();
    let mut hi = top_state(n, k)?;
    let mut lo = ground_state(n, k)?;
    let rates = env.rates();
    let first = env.first_site();
    let mut mismatched = hi.bits().iter().zip(lo.bits()).filter(|(a, b)| a != b).count();
    if mismatched == 0 {
        return Ok(Some(0.0));
    }
    for ev in events_for(env, stream, horizon)? {
        if ev.time > horizon {
            break;
        }
        let i = (ev.site - first) as usize;
        // A ring only touches sites i and i ± 1.
        let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
        let local = |hi: &Configuration, lo: &Configuration| (a..=b).filter(|&s| hi.bits()[s] != lo.bits()[s]).count();
        let before = local(&hi, &lo);
        let moved_hi = apply_event(hi.bits_mut(), rates, i, ev.coin, ev.u).is_some();
        let moved_lo = apply_event(lo.bits_mut(), rates, i, ev.coin, ev.u).is_some();
        if !(moved_hi || moved_lo) {
            continue;
        }
        mismatched = mismatched + local(&hi, &lo) - before;
        if mismatched == 0 {
            return Ok(Some(ev.time));
        }
    }
    Ok(None)
}

/// First time the trajectory from `eta0` equals `ϑ_{N,k}`.
pub fn hitting_time_ground(
    eta0: &Configuration,
    env: &Environment,
    stream: &EventStream,
    horizon: f64,
) -> Result<Option<f64>> {
    let target = ground_state(eta0.len(), eta0.particles())?;
    let hit = hitting_time_window(eta0, &target, env, stream, horizon, false)?;
    Ok(hit.time)
}

/// Outcome of a hitting-time run on a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowHit {
    pub time: Option<f64>,
    /// An edge site of the window changed value before the target was hit.
    pub boundary_touched: bool,
}

/// First time the trajectory from `eta0` equals `target`.
///
/// With `track_boundary` the window is read as a piece of the integers whose
/// outside continues the initial edge values; the run stops, flagged, as soon
/// as either edge site changes, since the windowed and unwindowed dynamics
/// may differ from then on.
pub fn hitting_time_window(
    eta0: &Configuration,
    target: &Configuration,
    env: &Environment,
    stream: &EventStream,
    horizon: f64,
    track_boundary: bool,
) -> Result<WindowHit> {
    check_shape(eta0, env)?;
    check_shape(target, env)?;
    if eta0 == target {
        return Ok(WindowHit { time: Some(0.0), boundary_touched: false });
    }
    let n = eta0.len();
    let mut eta = eta0.clone();
    let (left0, right0) = (eta0.bits()[0], eta0.bits()[n - 1]);
    let first = env.first_site();
    // Track the number of mismatched sites so the equality test is O(1).
    let mut mismatched = eta.bits().iter().zip(target.bits()).filter(|(a, b)| a != b).count();
    let tb = target.bits();
    for ev in events_for(env, stream, horizon)? {
        if ev.time > horizon {
            break;
        }
        let i = (ev.site - first) as usize;
        if let Some((from, to)) = apply_event(eta.bits_mut(), env.rates(), i, ev.coin, ev.u) {
            let bits = eta.bits();
            for s in [from, to] {
                if bits[s] == tb[s] {
                    mismatched -= 1;
                } else {
                    mismatched += 1;
                }
            }
            if track_boundary && (bits[0] != left0 || bits[n - 1] != right0) {
                return Ok(WindowHit { time: None, boundary_touched: true });
            }
            if mismatched == 0 {
                return Ok(WindowHit { time: Some(ev.time), boundary_touched: false });
            }
        }
    }
    Ok(WindowHit { time: None, boundary_touched: false })
}
