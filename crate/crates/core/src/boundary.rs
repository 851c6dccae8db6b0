//! Boundary-driven exclusion on a box `{1..M}`: particles enter at site 1
//! at rate 1 when it is vacant, leave from site `M` at rate 1, and jump
//! right at rate `1/2 + c` and left at rate `1/2 - c` inside the box.
//!
//! Also hosts the modified exclusion process on a segment, whose occupancy
//! on a low-drift interval follows the boundary-driven chain for as long as
//! particles remain to the left of the interval.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::Environment;
use crate::error::{Result, SepError};
use crate::exact::{solve_stationary, GeneratorMatrix};
use crate::graphical::{apply_event, Coin, Event, EventStream};
use crate::scalar::Scalar;
use crate::seed;
use crate::statespace::Configuration;

/// Largest box solved exactly (`2^M` states).
pub const MAX_EXACT_BOX: usize = 14;

/// Default burn-in factor: `10 M²` time units before stationary sampling.
pub const BURN_IN_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryChainSpec {
    m: usize,
    c: f64,
}

impl BoundaryChainSpec {
    pub fn new(m: usize, c: f64) -> Result<Self> {
        if m < 2 {
            return Err(SepError::InvalidParameter(format!("box length {m} < 2")));
        }
        if !(c.abs() < 0.5) {
            return Err(SepError::InvalidParameter(format!("tilt {c} must lie in (-1/2, 1/2)")));
        }
        Ok(BoundaryChainSpec { m, c })
    }

    pub fn symmetric(m: usize) -> Result<Self> {
        Self::new(m, 0.0)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn right_rate(&self) -> f64 {
        0.5 + self.c
    }

    pub fn left_rate(&self) -> f64 {
        0.5 - self.c
    }

    pub fn burn_in(&self) -> f64 {
        BURN_IN_FACTOR * (self.m * self.m) as f64
    }

    fn check_state(&self, sigma: &[bool]) -> Result<()> {
        if sigma.len() != self.m {
            return Err(SepError::Mismatch(format!("box state has {} sites, expected {}", sigma.len(), self.m)));
        }
        Ok(())
    }
}

/// Number of particles annihilated at site `M`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AnnihilationCounter {
    z: u64,
}

impl AnnihilationCounter {
    pub fn count(&self) -> u64 {
        self.z
    }

    fn bump(&mut self) {
        self.z += 1;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryRun {
    pub state: Vec<bool>,
    pub counter: AnnihilationCounter,
}

/// Kinds of boundary-chain transitions, reported to observers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMove {
    Right(usize),
    Left(usize),
    Creation,
    Annihilation,
}

fn apply_move(sigma: &mut [bool], mv: BoundaryMove, counter: &mut AnnihilationCounter) {
    let m = sigma.len();
    match mv {
        BoundaryMove::Right(i) => {
            sigma[i] = false;
            sigma[i + 1] = true;
        }
        BoundaryMove::Left(i) => {
            sigma[i] = false;
            sigma[i - 1] = true;
        }
        BoundaryMove::Creation => sigma[0] = true,
        BoundaryMove::Annihilation => {
            sigma[m - 1] = false;
            counter.bump();
        }
    }
}

/// Event-driven (Gillespie) simulation up to `horizon`.
pub fn simulate_boundary(spec: &BoundaryChainSpec, sigma0: &[bool], horizon: f64, seed: u64) -> Result<BoundaryRun> {
    simulate_boundary_observed(spec, sigma0, horizon, &mut seed::child_rng(seed, 0), |_, _, _| {})
}

/// As [`simulate_boundary`] with an explicit generator, calling
/// `observe(time, move, state_after)` at every transition.
pub fn simulate_boundary_observed<F>(
    spec: &BoundaryChainSpec,
    sigma0: &[bool],
    horizon: f64,
    rng: &mut ChaCha8Rng,
    mut observe: F,
) -> Result<BoundaryRun>
where
    F: FnMut(f64, BoundaryMove, &[bool]),
{
    spec.check_state(sigma0)?;
    let m = spec.m;
    let (right, left) = (spec.right_rate(), spec.left_rate());
    let mut sigma = sigma0.to_vec();
    let mut counter = AnnihilationCounter::default();
    let mut moves: Vec<(BoundaryMove, f64)> = Vec::with_capacity(2 * m);
    let mut t = 0.0;
    loop {
        moves.clear();
        if !sigma[0] {
            moves.push((BoundaryMove::Creation, 1.0));
        }
        if sigma[m - 1] {
            moves.push((BoundaryMove::Annihilation, 1.0));
        }
        for i in 0..m - 1 {
            match (sigma[i], sigma[i + 1]) {
                (true, false) => moves.push((BoundaryMove::Right(i), right)),
                (false, true) => moves.push((BoundaryMove::Left(i + 1), left)),
                _ => {}
            }
        }
        let total: f64 = moves.iter().map(|&(_, r)| r).sum();
        t += -(1.0 - rng.random::<f64>()).ln() / total;
        if t > horizon {
            break;
        }
        let mut pick = rng.random::<f64>() * total;
        let mut chosen = moves[moves.len() - 1].0;
        for &(mv, r) in &moves {
            if pick < r {
                chosen = mv;
                break;
            }
            pick -= r;
        }
        apply_move(&mut sigma, chosen, &mut counter);
        observe(t, chosen, &sigma);
    }
    Ok(BoundaryRun { state: sigma, counter })
}

/// The boundary-chain move a stream event at box site `i` (0-based)
/// triggers, if any.
///
/// A site clock rings at rate 2 with a fair coin, so HEAD and TAIL each
/// ring at rate 1: TAIL at a vacant site 1 is a creation, HEAD at an
/// occupied site `M` an annihilation, and inside the box the usual
/// `U <= 1/2 + c` rule gives rates `1/2 ± c`.
pub fn boundary_move_for_event(
    spec: &BoundaryChainSpec,
    sigma: &[bool],
    i: usize,
    coin: Coin,
    u: f64,
) -> Option<BoundaryMove> {
    let m = spec.m;
    let p = spec.right_rate();
    match coin {
        Coin::Head if i == m - 1 => sigma[i].then_some(BoundaryMove::Annihilation),
        Coin::Head => (u <= p && sigma[i] && !sigma[i + 1]).then_some(BoundaryMove::Right(i)),
        Coin::Tail if i == 0 => (!sigma[0]).then_some(BoundaryMove::Creation),
        Coin::Tail => (u > p && sigma[i] && !sigma[i - 1]).then_some(BoundaryMove::Left(i)),
    }
}

/// Boundary chain driven by the stream's events on sites
/// `first..first+M-1`, which play the roles of box sites `1..M`.
pub fn simulate_boundary_on_stream(
    spec: &BoundaryChainSpec,
    sigma0: &[bool],
    stream: &EventStream,
    first: i64,
    horizon: f64,
) -> Result<BoundaryRun> {
    spec.check_state(sigma0)?;
    stream.check_time(horizon)?;
    let mut sigma = sigma0.to_vec();
    let mut counter = AnnihilationCounter::default();
    for ev in stream.events_in(first, first + spec.m as i64 - 1)? {
        if ev.time > horizon {
            break;
        }
        let i = (ev.site - first) as usize;
        if let Some(mv) = boundary_move_for_event(spec, &sigma, i, ev.coin, ev.u) {
            apply_move(&mut sigma, mv, &mut counter);
        }
    }
    Ok(BoundaryRun { state: sigma, counter })
}

/// Generator of the boundary chain on `{0,1}^M`; bit `i-1` is site `i`.
pub fn boundary_generator<T: Scalar>(spec: &BoundaryChainSpec) -> Result<GeneratorMatrix<T>> {
    let m = spec.m;
    if m > MAX_EXACT_BOX {
        return Err(SepError::CapExceeded { n: m, k: 0, size: 1u128 << m, cap: 1 << MAX_EXACT_BOX });
    }
    let right = T::of(spec.right_rate());
    let left = T::of(spec.left_rate());
    let rows = (0..1usize << m)
        .map(|s| {
            let mut row = Vec::new();
            if s & 1 == 0 {
                row.push((s | 1, T::one()));
            }
            if s >> (m - 1) & 1 == 1 {
                row.push((s ^ 1 << (m - 1), T::one()));
            }
            for i in 0..m - 1 {
                match (s >> i & 1, s >> (i + 1) & 1) {
                    (1, 0) => row.push((s ^ 0b11 << i, right)),
                    (0, 1) => row.push((s ^ 0b11 << i, left)),
                    _ => {}
                }
            }
            row
        })
        .collect();
    GeneratorMatrix::from_rows(rows, m, 0)
}

/// Stationary law of the boundary chain, indexed by bitmask.
pub fn boundary_stationary<T: Scalar>(spec: &BoundaryChainSpec) -> Result<Vec<T>> {
    solve_stationary(&boundary_generator::<T>(spec)?)
}

/// Density profile `E[σ(i)]`, `i = 1..M`, with optional standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryProfile<T> {
    pub m: usize,
    pub c: f64,
    pub density: Vec<T>,
    pub stderr: Option<Vec<T>>,
}

/// Profile of the exact stationary law.
pub fn exact_boundary_profile<T: Scalar>(spec: &BoundaryChainSpec) -> Result<BoundaryProfile<T>> {
    let pi = boundary_stationary::<T>(spec)?;
    let density =
        (0..spec.m).map(|i| pi.iter().enumerate().filter(|&(s, _)| s >> i & 1 == 1).map(|(_, &p)| p).sum()).collect();
    Ok(BoundaryProfile { m: spec.m, c: spec.c, density, stderr: None })
}

/// The symmetric stationary profile `(M + 1/2 - i) / M`.
pub fn linear_profile(m: usize) -> Vec<f64> {
    (1..=m).map(|i| (m as f64 + 0.5 - i as f64) / m as f64).collect()
}

/// Upper bound `2cM + 2/(M+1)` on the density at site `M` for tilt `c >= 0`.
pub fn exit_density_bound(m: usize, c: f64) -> f64 {
    2.0 * c * m as f64 + 2.0 / (m as f64 + 1.0)
}

/// `Δρ(x) = ρ(x+1) + ρ(x-1) - 2ρ(x)` on `x = 1..M` for the profile extended
/// by `ρ(0) = 2 - ρ(1)` and `ρ(M+1) = -ρ(M)`.
pub fn extended_laplacian(profile: &[f64]) -> Vec<f64> {
    let m = profile.len();
    let mut ext = Vec::with_capacity(m + 2);
    ext.push(2.0 - profile[0]);
    ext.extend_from_slice(profile);
    ext.push(-profile[m - 1]);
    (1..=m).map(|x| ext[x + 1] + ext[x - 1] - 2.0 * ext[x]).collect()
}

/// Fit of `ln E[σ(M)]` against `M` for the chain tilted against the flow.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub gamma: f64,
    pub m_list: Vec<usize>,
    pub exit_density: Vec<f64>,
    pub slope: f64,
    /// `-(1/2) ln q` with `q = (1/2 + γ) / (1/2 - γ)`.
    pub predicted: f64,
}

/// Least-squares slope of `ln E[σ(M)]` against `M` at `c = -γ`.
pub fn exit_density_decay(gamma: f64, m_list: &[usize]) -> Result<DecayFit> {
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(SepError::InvalidParameter(format!("γ = {gamma} must lie in (0, 1/2)")));
    }
    if m_list.len() < 2 {
        return Err(SepError::InvalidParameter("need at least two box lengths".into()));
    }
    let exit: Vec<f64> = m_list
        .iter()
        .map(|&m| {
            let spec = BoundaryChainSpec::new(m, -gamma)?;
            Ok(*exact_boundary_profile::<f64>(&spec)?.density.last().unwrap())
        })
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = m_list.iter().map(|&m| m as f64).collect();
    let ys: Vec<f64> = exit.iter().map(|d| d.ln()).collect();
    let slope = ols_slope(&xs, &ys);
    let q = (0.5 + gamma) / (0.5 - gamma);
    Ok(DecayFit { gamma, m_list: m_list.to_vec(), exit_density: exit, slope, predicted: -0.5 * q.ln() })
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Draws a box state from a stationary vector indexed by bitmask.
pub fn sample_box_state<R: Rng + ?Sized>(pi: &[f64], m: usize, rng: &mut R) -> Vec<bool> {
    let mut u = rng.random::<f64>() * pi.iter().sum::<f64>();
    let mut s = pi.len() - 1;
    for (i, &p) in pi.iter().enumerate() {
        if u < p {
            s = i;
            break;
        }
        u -= p;
    }
    (0..m).map(|i| s >> i & 1 == 1).collect()
}

/// Monte Carlo profile along one long trajectory: burn-in, then `samples`
/// snapshots `spacing` apart. Standard errors use batch means over
/// `batches` consecutive blocks, which accounts for autocorrelation.
pub fn mc_boundary_profile(
    spec: &BoundaryChainSpec,
    burn_in: f64,
    samples: usize,
    spacing: f64,
    batches: usize,
    seed: u64,
) -> Result<BoundaryProfile<f64>> {
    if samples == 0 || batches < 2 || !samples.is_multiple_of(batches) || !(spacing > 0.0) {
        return Err(SepError::InvalidParameter("samples must be a positive multiple of at least two batches".into()));
    }
    let m = spec.m;
    let mut rng = seed::child_rng(seed, 0);
    let mut state = vec![false; m];
    let mut sums = vec![vec![0.0f64; m]; batches];
    let per_batch = samples / batches;
    let burn = simulate_boundary_observed(spec, &state, burn_in, &mut rng, |_, _, _| {})?;
    state = burn.state;
    for (b, sum) in sums.iter_mut().enumerate() {
        let _ = b;
        for _ in 0..per_batch {
            state = simulate_boundary_observed(spec, &state, spacing, &mut rng, |_, _, _| {})?.state;
            for (s, &x) in sum.iter_mut().zip(&state) {
                *s += f64::from(u8::from(x));
            }
        }
    }
    let nb = batches as f64;
    let means: Vec<Vec<f64>> = sums.iter().map(|s| s.iter().map(|x| x / per_batch as f64).collect()).collect();
    let density: Vec<f64> = (0..m).map(|i| means.iter().map(|b| b[i]).sum::<f64>() / nb).collect();
    let stderr = (0..m)
        .map(|i| {
            let var = means.iter().map(|b| (b[i] - density[i]).powi(2)).sum::<f64>() / (nb - 1.0);
            (var / nb).sqrt()
        })
        .collect();
    Ok(BoundaryProfile { m, c: spec.c, density, stderr: Some(stderr) })
}

/// Writes `M,c,site,density,stderr` rows; missing errors are left empty.
pub fn write_profile_csv<W: Write>(profiles: &[BoundaryProfile<f64>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["M", "c", "site", "density", "stderr"])?;
    for p in profiles {
        for (i, d) in p.density.iter().enumerate() {
            let se = p.stderr.as_ref().map(|s| s[i].to_string()).unwrap_or_default();
            w.write_record([p.m.to_string(), p.c.to_string(), (i + 1).to_string(), d.to_string(), se])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Sites `[x, y]` of a box, 1-based, `y = x + M - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub x: i64,
    pub y: i64,
}

impl Interval {
    pub fn len(&self) -> usize {
        (self.y - self.x + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.y < self.x
    }
}

/// Leftmost run of `M` consecutive sites with `ω <= level` whose start lies
/// in `[⌈N/8⌉, ⌊N/4⌋ - (M+1)]`.
pub fn find_low_drift_interval(env: &Environment, m: usize, level: f64) -> Result<Option<Interval>> {
    let n = env.len() as i64;
    let lo = (n + 7) / 8;
    let hi = n / 4 - (m as i64 + 1);
    if m == 0 || hi < lo.max(1) {
        return Err(SepError::InvalidParameter(format!(
            "no admissible start for a box of length {m} in a segment of {n} sites"
        )));
    }
    let first = env.first_site();
    let w = env.rates();
    for x in lo.max(1)..=hi {
        let start = (x - first) as usize;
        if w[start..start + m].iter().all(|&r| r <= level) {
            return Ok(Some(Interval { x, y: x + m as i64 - 1 }));
        }
    }
    Ok(None)
}

/// Rates `1/2 + c` where `ω <= 1/2 + c` and `1` elsewhere.
pub fn flattened_environment(env: &Environment, c: f64) -> Result<Environment> {
    let level = 0.5 + c;
    let rates = env.rates().iter().map(|&w| if w <= level { level } else { 1.0 }).collect();
    Environment::with_offset(rates, env.offset())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedRun {
    pub config: Configuration,
    /// First time no particle is left of the interval.
    pub tau_star: Option<f64>,
    /// Particles sent from `y` to the rightmost empty site.
    pub crossings: u64,
    /// `(time, L(ξ_t))` at every change of the leftmost particle.
    pub leftmost: Vec<(f64, usize)>,
}

/// Outcome of driving the modified process and the boundary chain on the
/// interval by one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingReport {
    pub run: ModifiedRun,
    /// Events up to `τ*` after which the interval occupancy differed from
    /// the boundary chain.
    pub occupancy_mismatches: usize,
    /// Events up to `τ*` after which the crossing count differed from the
    /// annihilation count.
    pub count_mismatches: usize,
    /// Annihilations of the boundary chain up to `min(τ*, horizon)`.
    pub annihilations: u64,
}

struct Modified<'a> {
    rates: &'a [f64],
    x: usize,
    y: usize,
}

impl Modified<'_> {
    /// Applies one ring at 0-based index `i`. Returns true for a crossing.
    fn apply(&self, occ: &mut [bool], i: usize, coin: Coin, u: f64) -> bool {
        let (x, y) = (self.x, self.y);
        match coin {
            Coin::Tail if i == x => {
                // Entry into x: the rightmost particle left of x jumps in.
                // Left moves out of x are suppressed.
                if !occ[x] {
                    if let Some(j) = (0..x).rev().find(|&j| occ[j]) {
                        occ[j] = false;
                        occ[x] = true;
                    }
                }
                false
            }
            // Ordinary jumps into x are replaced by the entry rule.
            Coin::Head if i + 1 == x => false,
            // Particles at y are sent to the rightmost empty site.
            Coin::Head if i == y => {
                if occ[y] {
                    if let Some(r) = (y + 1..occ.len()).rev().find(|&r| !occ[r]) {
                        occ[y] = false;
                        occ[r] = true;
                        return true;
                    }
                }
                false
            }
            Coin::Tail if i == y + 1 => false,
            _ => {
                apply_event(occ, self.rates, i, coin, u);
                false
            }
        }
    }
}

fn check_interval(env: &Environment, interval: Interval) -> Result<(usize, usize)> {
    let first = env.first_site();
    if interval.x <= first || interval.y >= env.last_site() || interval.y <= interval.x {
        return Err(SepError::InvalidParameter(format!(
            "interval [{}, {}] must sit strictly inside the segment",
            interval.x, interval.y
        )));
    }
    Ok(((interval.x - first) as usize, (interval.y - first) as usize))
}

fn run_modified<F>(
    eta0: &Configuration,
    env: &Environment,
    interval: Interval,
    c: f64,
    stream: &EventStream,
    horizon: f64,
    mut after: F,
) -> Result<ModifiedRun>
where
    F: FnMut(&Event, &[bool], u64, bool),
{
    if eta0.len() != env.len() {
        return Err(SepError::Mismatch("configuration and environment lengths differ".into()));
    }
    let (x, y) = check_interval(env, interval)?;
    stream.check_time(horizon)?;
    let flat = flattened_environment(env, c)?;
    let rule = Modified { rates: flat.rates(), x, y };
    let mut occ = eta0.bits().to_vec();
    let leftmost = |occ: &[bool]| occ.iter().position(|&b| b).map_or(occ.len() + 1, |p| p + 1);
    let mut path = vec![(0.0, leftmost(&occ))];
    let mut tau_star = (path[0].1 > x).then_some(0.0);
    let mut crossings = 0;
    for ev in stream.events_in(env.first_site(), env.last_site())? {
        if ev.time > horizon {
            break;
        }
        let i = (ev.site - env.first_site()) as usize;
        if rule.apply(&mut occ, i, ev.coin, ev.u) {
            crossings += 1;
        }
        let l = leftmost(&occ);
        if l != path.last().unwrap().1 {
            path.push((ev.time, l));
        }
        // L(ξ) >= x in 1-based sites means no particle on 0-based [0, x).
        if tau_star.is_none() && l > x {
            tau_star = Some(ev.time);
        }
        after(&ev, &occ, crossings, tau_star.is_some());
    }
    Ok(ModifiedRun { config: Configuration::from_bits(occ), tau_star, crossings, leftmost: path })
}

/// Modified exclusion process in the flattened environment with the
/// interval rules: entries into `x` only by pulling in the rightmost
/// particle on its left, no left moves out of `x`, particles at `y` sent to
/// the rightmost empty site at rate 1, and no left moves out of `y + 1`.
pub fn simulate_modified_process(
    eta0: &Configuration,
    env: &Environment,
    interval: Interval,
    c: f64,
    horizon: f64,
    seed: u64,
) -> Result<ModifiedRun> {
    let stream = EventStream::new(env.first_site(), env.last_site(), horizon, seed)?;
    run_modified(eta0, env, interval, c, &stream, horizon, |_, _, _, _| {})
}

/// Runs the modified process and the boundary chain on the interval from
/// one stream and compares them after every event up to `τ*`.
pub fn modified_coupling_report(
    eta0: &Configuration,
    env: &Environment,
    interval: Interval,
    c: f64,
    horizon: f64,
    seed: u64,
) -> Result<CouplingReport> {
    let (x, _) = check_interval(env, interval)?;
    let spec = BoundaryChainSpec::new(interval.len(), c)?;
    let stream = EventStream::new(env.first_site(), env.last_site(), horizon, seed)?;
    let mut sigma: Vec<bool> = eta0.bits()[x..x + spec.m].to_vec();
    let mut counter = AnnihilationCounter::default();
    let mut occupancy_mismatches = 0;
    let mut count_mismatches = 0;
    let mut done = false;
    let run = run_modified(eta0, env, interval, c, &stream, horizon, |ev, occ, crossings, reached| {
        if done {
            return;
        }
        if (interval.x..=interval.y).contains(&ev.site) {
            let i = (ev.site - interval.x) as usize;
            if let Some(mv) = boundary_move_for_event(&spec, &sigma, i, ev.coin, ev.u) {
                apply_move(&mut sigma, mv, &mut counter);
            }
        }
        if occ[x..x + spec.m] != sigma[..] {
            occupancy_mismatches += 1;
        }
        if crossings != counter.count() {
            count_mismatches += 1;
        }
        done = reached;
    })?;
    Ok(CouplingReport { run, occupancy_mismatches, count_mismatches, annihilations: counter.count() })
}
