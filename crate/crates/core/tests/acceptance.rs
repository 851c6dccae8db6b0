//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints exactly one PASS/FAIL line.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use statrs::distribution::{ChiSquared, ContinuousCDF};

use sep_core::boundary::{
    boundary_stationary, exact_boundary_profile, exit_density_bound, exit_density_decay, linear_profile,
    mc_boundary_profile, sample_box_state, simulate_boundary, BoundaryChainSpec,
};
use sep_core::env::{sample_environment, sample_window, EnvironmentLaw};
use sep_core::estimate::{certify_lower_bound, scaling_experiment, ScalingConfig, ScalingEstimator};
use sep_core::exact::{
    censored_distribution_at, distribution_at, exact_mixing_time, exact_pi_a, pi_a_bound, stationary,
    stationary_by_solve, stochastic_dominance_with, tv_distance, DominanceMethod,
};
use sep_core::graphical::{coupled_order_violations, evolve, evolve_second_class, make_box_censoring, project_2to1};
use sep_core::seed::{child_rng, tagged_seed, TAG_ENVIRONMENT, TAG_REPLICA};
use sep_core::statespace::{ground_state, top_state};
use sep_core::{
    Distribution, Environment, EventStream, GeneratorMatrix, Result, StateSpace, ThreeSpeciesConfiguration,
};

const SEED: u64 = 20_240_601;

/// A single trajectory over 10^4 time units lands inside the 5% band for
/// about 99% of seeds (sd of Z/t is 0.002); this one is fixed.
const ANNIHILATION_SEED: u64 = 1;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn law(text: &str) -> EnvironmentLaw {
    text.parse().expect("fixed law parses")
}

fn stationary_oracles() -> Result<Outcome> {
    let laws = [law("uniform(0.55,0.95)"), law("two_point(0.3,0.9,0.3)"), law("uniform(0.6,0.9)")];
    let mut worst = 0.0f64;
    for i in 0..100u64 {
        let n = 2 + (i % 7) as usize;
        let k = 1 + (i / 7) as usize % (n - 1).min(4);
        let env = sample_environment(&laws[i as usize % 3], n, tagged_seed(SEED, TAG_ENVIRONMENT, i))?;
        let a = stationary::<f64>(&env, k)?;
        let b = stationary_by_solve::<f64>(&env, k)?;
        worst = a.probs().iter().zip(b.probs()).map(|(x, y)| (x - y).abs()).fold(worst, f64::max);
    }
    outcome(worst <= 1e-10, format!("100 environments, max abs {worst:.2e}"))
}

fn boundary_profile() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for m in 2..=10 {
        let p = exact_boundary_profile::<f64>(&BoundaryChainSpec::symmetric(m)?)?;
        worst = p.density.iter().zip(linear_profile(m)).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    let spec = BoundaryChainSpec::symmetric(10)?;
    let mc = mc_boundary_profile(&spec, spec.burn_in(), 100_000, 1.0, 50, SEED)?;
    let se = mc.stderr.clone().expect("batch means give standard errors");
    let z = mc.density.iter().zip(linear_profile(10)).zip(&se).map(|((d, r), s)| (d - r).abs() / s).fold(0.0, f64::max);
    outcome(worst <= 1e-10 && z <= 3.0, format!("exact max abs {worst:.2e}, Monte Carlo max |z| {z:.2}"))
}

fn annihilation_rate() -> Result<Outcome> {
    let spec = BoundaryChainSpec::symmetric(5)?;
    let pi = boundary_stationary::<f64>(&spec)?;
    let start = sample_box_state(&pi, 5, &mut child_rng(ANNIHILATION_SEED, 1));
    let horizon = 10_000.0;
    let z = simulate_boundary(&spec, &start, horizon, ANNIHILATION_SEED)?.counter.count();
    let rate = z as f64 / horizon;
    outcome((rate - 0.1).abs() <= 0.005, format!("Z/t = {rate:.4}"))
}

fn tilted_bound() -> Result<Outcome> {
    let mut slack = f64::INFINITY;
    for m in 2..=12 {
        for c in [0.01, 0.05, 0.1] {
            let p = exact_boundary_profile::<f64>(&BoundaryChainSpec::new(m, c)?)?;
            slack = slack.min(exit_density_bound(m, c) - p.density[m - 1]);
        }
    }
    outcome(slack >= 0.0, format!("M = 2..12, smallest slack {slack:.4}"))
}

fn exit_density_decay_fit() -> Result<Outcome> {
    let m_list: Vec<usize> = (6..=12).collect();
    let fit = exit_density_decay(0.25, &m_list)?;
    let err = (fit.slope - fit.predicted).abs();
    outcome(err <= 0.1, format!("slope {:.4} vs {:.4}", fit.slope, fit.predicted))
}

fn monotone_coupling() -> Result<Outcome> {
    let laws = [law("uniform(0.55,1)"), law("two_point(0.25,1,0.3)"), law("two_point(0.5,1,0.3)")];
    let mut violations = 0;
    for i in 0..10_000u64 {
        let n = 2 + (i % 9) as usize;
        let k = 1 + (i / 9) as usize % (n - 1);
        let env = sample_environment(&laws[i as usize % 3], n, tagged_seed(SEED, TAG_ENVIRONMENT, i))?;
        let stream = EventStream::segment(n, 10.0, tagged_seed(SEED, TAG_REPLICA, i))?;
        violations += coupled_order_violations((&ground_state(n, k)?, &env), (&top_state(n, k)?, &env), &stream, 10.0)?;
    }
    outcome(violations == 0, format!("10^4 trajectories, {violations} violations"))
}

fn censoring_inequality() -> Result<Outcome> {
    let space = StateSpace::new(5, 2)?;
    let scheme = make_box_censoring(5, 2, 1, 0.5)?;
    let theta = Distribution::point_mass(&space, &top_state(5, 2)?)?;
    let mut margin = f64::INFINITY;
    let mut holds = true;
    for e in 0..5u64 {
        let env = sample_environment(&law("uniform(0.55,1)"), 5, tagged_seed(SEED, TAG_ENVIRONMENT, e))?;
        let gen = GeneratorMatrix::sep(&env, &space)?;
        for t in [0.5, 1.0, 2.0] {
            let plain = distribution_at(&theta, &gen, t)?;
            let censored = censored_distribution_at(&theta, &env, &space, &scheme, t)?;
            let d = stochastic_dominance_with(&censored, &plain, &space, DominanceMethod::UpSets)?;
            holds &= d.holds;
            margin = margin.min(d.margin);
        }
    }
    outcome(holds, format!("5 environments x 3 times, smallest up-set margin {margin:.2e}"))
}

fn two_state_mixing() -> Result<Outcome> {
    let t = exact_mixing_time::<f64>(&Environment::constant(0.5, 2)?, 1, 0.25)?.time;
    outcome((t - std::f64::consts::LN_2).abs() <= 1e-6, format!("t_mix = {t:.9}"))
}

fn event_a_machinery() -> Result<Outcome> {
    let laws = [law("uniform(0.9,0.99)"), law("uniform(0.55,0.95)"), law("two_point(0.8,1,0.5)")];
    let (n, k) = (12, 4);
    let theta = top_state(n, k)?;
    let mut bound_ok = true;
    let (mut certified, mut contradictions) = (0, 0);
    for i in 0..100u64 {
        let env = sample_environment(&laws[i as usize % 3], n, tagged_seed(SEED, TAG_ENVIRONMENT, 500 + i))?;
        bound_ok &= exact_pi_a::<f64>(&env, k)? <= pi_a_bound(&env, k)?;
        let mut t_mix = None;
        for (j, t) in [0.5, 1.0, 2.0, 4.0].into_iter().enumerate() {
            let cert = certify_lower_bound(&env, k, &theta, t, 2000, tagged_seed(SEED, TAG_REPLICA, 4 * i + j as u64))?;
            if cert.certified {
                certified += 1;
                let exact = match t_mix {
                    Some(v) => v,
                    None => *t_mix.insert(exact_mixing_time::<f64>(&env, k, 0.25)?.time),
                };
                if exact <= t {
                    contradictions += 1;
                }
            }
        }
    }
    outcome(
        bound_ok && contradictions == 0 && certified > 0,
        format!("bound held: {bound_ok}, {certified} certificates, {contradictions} contradictions"),
    )
}

const MARGINAL_LAW: &str = "two_point(0.5,1,0.3)";

fn scaling_trends() -> Result<Outcome> {
    let run = |text: &str, seed: u64| -> Result<(f64, Vec<f64>)> {
        let cfg = ScalingConfig {
            grid: vec![32, 64, 128, 256],
            estimator: ScalingEstimator::Coalescence,
            eps: 0.25,
            rho: 0.5,
            replicas: 200,
            environments: 5,
            seed,
        };
        let r = scaling_experiment(&law(text), &cfg)?;
        Ok((r.fit.slope, r.medians.iter().map(|&(n, m)| m / n as f64).collect()))
    };
    let started = Instant::now();
    let (non_nestling, _) = run("uniform(0.6,0.9)", SEED)?;
    let (plain, _) = run("two_point(0.25,1,0.3)", SEED)?;
    let (_, ratio) = run(MARGINAL_LAW, SEED)?;
    let elapsed = started.elapsed();
    let increasing = ratio.windows(2).all(|w| w[1] > w[0]);
    let passed =
        (0.85..=1.2).contains(&non_nestling) && plain >= 1.15 && increasing && elapsed < Duration::from_secs(30 * 60);
    let ratio: Vec<String> = ratio.iter().map(|r| format!("{r:.2}")).collect();
    outcome(passed, format!("slopes {non_nestling:.3} / {plain:.3}, {MARGINAL_LAW} estimate/N [{}]", ratio.join(", ")))
}

fn graphical_marginal() -> Result<Outcome> {
    let (n, k, t, replicas) = (6, 3, 1.0, 100_000u64);
    let space = StateSpace::new(n, k)?;
    let theta = top_state(n, k)?;
    let mut worst = 0.0f64;
    for e in 0..3u64 {
        let env = sample_environment(&law("uniform(0.55,0.95)"), n, tagged_seed(SEED, TAG_ENVIRONMENT, 900 + e))?;
        let exact =
            distribution_at(&Distribution::point_mass(&space, &theta)?, &GeneratorMatrix::sep(&env, &space)?, t)?;
        let mut counts = vec![0.0; space.len()];
        for r in 0..replicas {
            let stream = EventStream::segment(n, t, tagged_seed(SEED, TAG_REPLICA, e << 32 | r))?;
            counts[space.index_of(&evolve(&theta, &env, &stream, t)?)?] += 1.0;
        }
        let empirical = Distribution::new(counts.iter().map(|c| c / replicas as f64).collect(), n, k)?;
        worst = worst.max(tv_distance(&empirical, &exact)?);
    }
    outcome(worst <= 0.01, format!("3 environments, worst TV {worst:.4}"))
}

fn second_class_projection() -> Result<Outcome> {
    let (t, replicas) = (1.0, 100_000u64);
    let xi0 = ThreeSpeciesConfiguration::new(vec![1, 2, 1, 0, 2, 1, 0, 0], 1)?;
    let start = project_2to1(&xi0);
    let env = sample_window(&law("uniform(0.55,0.95)"), 1, 8, tagged_seed(SEED, TAG_ENVIRONMENT, 1000))?;
    let mut coupled: BTreeMap<u64, f64> = BTreeMap::new();
    let mut direct: BTreeMap<u64, f64> = BTreeMap::new();
    for r in 0..replicas {
        let s1 = EventStream::new(1, 8, t, tagged_seed(SEED, TAG_REPLICA, 2 * r))?;
        let s2 = EventStream::new(1, 8, t, tagged_seed(SEED, TAG_REPLICA, 2 * r + 1))?;
        let xi = evolve_second_class(&xi0, &env, &s1, t)?.config;
        *coupled.entry(project_2to1(&xi).to_mask()).or_default() += 1.0;
        *direct.entry(evolve(&start, &env, &s2, t)?.to_mask()).or_default() += 1.0;
    }
    // Two-sample chi-square with equal sample sizes, sparse cells pooled.
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut pool_a, mut pool_b) = (0.0, 0.0);
    let keys: std::collections::BTreeSet<u64> = coupled.keys().chain(direct.keys()).copied().collect();
    for key in keys {
        let a = coupled.get(&key).copied().unwrap_or(0.0);
        let b = direct.get(&key).copied().unwrap_or(0.0);
        if a + b < 20.0 {
            pool_a += a;
            pool_b += b;
        } else {
            cells.push((a, b));
        }
    }
    if pool_a + pool_b > 0.0 {
        cells.push((pool_a, pool_b));
    }
    let stat: f64 = cells.iter().map(|(a, b)| (a - b).powi(2) / (a + b)).sum();
    let df = (cells.len() - 1) as f64;
    let p = 1.0 - ChiSquared::new(df).expect("positive degrees of freedom").cdf(stat);
    outcome(p > 0.01, format!("chi-square {stat:.1} on {df} df, p = {p:.3}"))
}

type Criterion = (&'static str, Option<Duration>, fn() -> Result<Outcome>);

fn main() -> ExitCode {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria: [Criterion; 12] = [
        ("stationary product vs solve", secs(10), stationary_oracles),
        ("boundary density profile", secs(60), boundary_profile),
        ("annihilation rate", secs(30), annihilation_rate),
        ("tilted exit density bound", secs(60), tilted_bound),
        ("exit density decay", secs(120), exit_density_decay_fit),
        ("monotone coupling", secs(120), monotone_coupling),
        ("censoring inequality", secs(60), censoring_inequality),
        ("two-state mixing time", None, two_state_mixing),
        ("event A lower-bound rule", None, event_a_machinery),
        ("scaling trends", secs(30 * 60), scaling_trends),
        ("graphical vs exact marginal", secs(120), graphical_marginal),
        ("second class projection", None, second_class_projection),
    ];
    // Optional criterion numbers on the command line select a subset.
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.into_iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        let started = Instant::now();
        let result = check();
        let elapsed = started.elapsed();
        let (passed, detail) = match result {
            Ok(o) => {
                let in_time = limit.is_none_or(|l| elapsed <= l);
                let note = if in_time { String::new() } else { format!("; over the {:?} budget", limit.unwrap()) };
                (o.passed && in_time, format!("{}{note}", o.detail))
            }
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!passed);
        let tag = if passed { "PASS" } else { "FAIL" };
        println!("{tag} criterion {}: {name}: {detail} ({:.1}s)", i + 1, elapsed.as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
