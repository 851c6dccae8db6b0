//! Command implementations. Each returns its CSV bytes, a JSON summary and
//! the names of failed checks; nothing is written until a command finishes.

use anyhow::{Context, Result};
use serde_json::{json, Value};

use sep_core::boundary::{
    boundary_stationary, exact_boundary_profile, exit_density_bound, linear_profile, mc_boundary_profile,
    sample_box_state, simulate_boundary, write_profile_csv, BoundaryChainSpec, MAX_EXACT_BOX,
};
use sep_core::env::{classify, sample_environment, Environment, EnvironmentLaw};
use sep_core::estimate::{scaling_experiment, write_scaling_csv, ScalingConfig};
use sep_core::exact::{
    censored_distribution_at, distribution_at, exact_mixing_time, exact_pi_a, pi_a_bound, stationary,
    stationary_by_solve, stochastic_dominance_with, tv_distance, worst_case_tv, DominanceMethod,
};
use sep_core::graphical::{coupled_order_violations, make_box_censoring, trajectory, write_trajectory_csv};
use sep_core::seed::{tagged_seed, TAG_ENVIRONMENT, TAG_REPLICA};
use sep_core::statespace::{ground_state, top_state};
use sep_core::{Distribution, EventStream, GeneratorMatrix, StateSpace};

use crate::config::{Command, Settings};

pub struct Report {
    pub csv: Vec<u8>,
    pub summary: Value,
    pub failures: Vec<String>,
}

pub fn run(s: &Settings) -> Result<Report> {
    match s.command {
        Command::Simulate => simulate(s),
        Command::Exact => exact(s),
        Command::Boundary => boundary(s),
        Command::Censor => censor(s),
        Command::Scaling => scaling(s),
        Command::Validate => validate(s),
    }
}

fn environment(s: &Settings) -> Result<(Environment, u64)> {
    let env_seed = tagged_seed(s.seed, TAG_ENVIRONMENT, 0);
    Ok((sample_environment(&s.parsed_law, s.n, env_seed)?, env_seed))
}

fn simulate(s: &Settings) -> Result<Report> {
    let (env, env_seed) = environment(s)?;
    let stream_seed = tagged_seed(s.seed, TAG_REPLICA, 0);
    let stream = EventStream::segment(s.n, s.horizon, stream_seed)?;
    let rows = trajectory(&top_state(s.n, s.k)?, &env, &stream, s.horizon)?;
    let mut csv = Vec::new();
    write_trajectory_csv(&rows, &mut csv)?;
    let last = &rows.last().expect("trajectory holds its start").1;
    Ok(Report {
        csv,
        summary: json!({
            "environment_seed": env_seed,
            "stream_seed": stream_seed,
            "environment": env.rates(),
            "moves": rows.len() - 1,
            "final": last.to_string(),
            "final_leftmost": last.leftmost_particle()?,
        }),
        failures: vec![],
    })
}

fn exact(s: &Settings) -> Result<Report> {
    let (env, env_seed) = environment(s)?;
    let space = StateSpace::new(s.n, s.k)?;
    let pi = stationary::<f64>(&env, s.k)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["state", "probability"])?;
    for (i, p) in pi.probs().iter().enumerate() {
        w.write_record([space.state(i).to_string(), p.to_string()])?;
    }
    let csv = w.into_inner().context("flushing stationary law")?;
    let mixing = exact_mixing_time::<f64>(&env, s.k, s.eps)?;
    let initial = worst_case_tv::<f64>(&env, s.k, &[0.0])?[0];
    let event_a = if 2 * s.k <= s.n {
        json!({ "pi_a": exact_pi_a::<f64>(&env, s.k)?, "pi_a_bound": pi_a_bound(&env, s.k)? })
    } else {
        Value::Null
    };
    Ok(Report {
        csv,
        summary: json!({
            "environment_seed": env_seed,
            "environment": env.rates(),
            "states": space.len(),
            "mixing_time": mixing.time,
            "mixing_distance": mixing.distance,
            "initial_worst_distance": initial,
            "event_a": event_a,
        }),
        failures: vec![],
    })
}

fn boundary(s: &Settings) -> Result<Report> {
    let spec = BoundaryChainSpec::new(s.m, s.c)?;
    let mut profiles = Vec::new();
    let mut failures = Vec::new();
    let mut summary = json!({ "M": s.m, "c": s.c });
    if s.m <= MAX_EXACT_BOX {
        let exact = exact_boundary_profile::<f64>(&spec)?;
        let exit = *exact.density.last().expect("box is non-empty");
        summary["exact_exit_density"] = json!(exit);
        // The stationary annihilation rate equals the exit density.
        summary["exact_annihilation_rate"] = json!(exit);
        if s.c == 0.0 {
            let err = exact.density.iter().zip(linear_profile(s.m)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            summary["linear_profile_error"] = json!(err);
            if err > 1e-10 {
                failures.push("linear_profile".into());
            }
        }
        if s.c > 0.0 {
            let bound = exit_density_bound(s.m, s.c);
            summary["exit_density_bound"] = json!(bound);
            if exit > bound {
                failures.push("exit_density_bound".into());
            }
        }
        let pi = boundary_stationary::<f64>(&spec)?;
        let start = sample_box_state(&pi, s.m, &mut sep_core::seed::child_rng(s.seed, TAG_REPLICA));
        let run = simulate_boundary(&spec, &start, s.horizon, tagged_seed(s.seed, TAG_REPLICA, 1))?;
        summary["mc_annihilation_rate"] = json!(run.counter.count() as f64 / s.horizon);
        profiles.push(exact);
    }
    let batches = 50;
    let samples = s.replicas.div_ceil(batches) * batches;
    let mc = mc_boundary_profile(&spec, spec.burn_in(), samples, 1.0, batches, tagged_seed(s.seed, TAG_REPLICA, 0))?;
    summary["mc_samples"] = json!(samples);
    profiles.push(mc);
    let mut csv = Vec::new();
    write_profile_csv(&profiles, &mut csv)?;
    Ok(Report { csv, summary, failures })
}

fn censor(s: &Settings) -> Result<Report> {
    let (env, env_seed) = environment(s)?;
    let space = StateSpace::new(s.n, s.k)?;
    let scheme = make_box_censoring(s.n, s.k, s.box_width, s.period)?;
    let theta = Distribution::point_mass(&space, &top_state(s.n, s.k)?)?;
    let pi = stationary::<f64>(&env, s.k)?;
    let gen = GeneratorMatrix::sep(&env, &space)?;
    let times = [s.horizon / 4.0, s.horizon / 2.0, s.horizon];
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["time", "censored_tv", "uncensored_tv", "dominates", "margin"])?;
    let mut failures = Vec::new();
    for &t in &times {
        let plain = distribution_at(&theta, &gen, t)?;
        let censored = censored_distribution_at(&theta, &env, &space, &scheme, t)?;
        let d = stochastic_dominance_with(&censored, &plain, &space, DominanceMethod::Auto)?;
        if !d.holds {
            failures.push(format!("censoring_dominance_t{t}"));
        }
        w.write_record([
            t.to_string(),
            tv_distance(&censored, &pi)?.to_string(),
            tv_distance(&plain, &pi)?.to_string(),
            d.holds.to_string(),
            d.margin.to_string(),
        ])?;
    }
    Ok(Report {
        csv: w.into_inner().context("flushing censoring table")?,
        summary: json!({
            "environment_seed": env_seed,
            "environment": env.rates(),
            "box_width": s.box_width,
            "period": s.period,
        }),
        failures,
    })
}

fn scaling(s: &Settings) -> Result<Report> {
    let cfg = ScalingConfig {
        grid: s.grid.clone(),
        estimator: s.estimator,
        eps: s.eps,
        rho: s.rho,
        replicas: s.replicas,
        environments: s.environments,
        seed: s.seed,
    };
    let result = scaling_experiment(&s.parsed_law, &cfg)?;
    let mut rows = result.records.clone();
    rows.push(result.slope_record(s.eps, s.replicas, s.seed));
    let mut csv = Vec::new();
    write_scaling_csv(&rows, &mut csv)?;
    Ok(Report {
        csv,
        summary: json!({
            "regime": result.regime,
            "medians": result.medians,
            "slope": result.fit.slope,
            "slope_stderr": result.fit.stderr,
            "slope_ci": [result.fit.ci.0, result.fit.ci.1],
            "dropped_first": result.fit.dropped_first,
        }),
        failures: vec![],
    })
}

struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn ballistic_law() -> EnvironmentLaw {
    EnvironmentLaw::uniform(0.55, 1.0).expect("fixed law is valid")
}

fn check_stationary(seed: u64) -> Result<Check> {
    let law = ballistic_law();
    let mut worst = 0.0f64;
    for i in 0..30u64 {
        let n = 4 + (i % 5) as usize;
        let env = sample_environment(&law, n, tagged_seed(seed, TAG_ENVIRONMENT, i))?;
        let k = 1 + (i as usize % (n / 2));
        let a = stationary::<f64>(&env, k)?;
        let b = stationary_by_solve::<f64>(&env, k)?;
        worst = a.probs().iter().zip(b.probs()).map(|(x, y)| (x - y).abs()).fold(worst, f64::max);
    }
    Ok(Check { name: "stationary_product_vs_solve", passed: worst <= 1e-10, detail: format!("max abs {worst:e}") })
}

fn check_profile() -> Result<Check> {
    let mut worst = 0.0f64;
    for m in 2..=10 {
        let p = exact_boundary_profile::<f64>(&BoundaryChainSpec::symmetric(m)?)?;
        worst = p.density.iter().zip(linear_profile(m)).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    Ok(Check { name: "boundary_linear_profile", passed: worst <= 1e-10, detail: format!("max abs {worst:e}") })
}

fn check_annihilation(seed: u64) -> Result<Check> {
    let spec = BoundaryChainSpec::symmetric(5)?;
    let pi = boundary_stationary::<f64>(&spec)?;
    let mut rng = sep_core::seed::child_rng(seed, TAG_REPLICA);
    let (runs, horizon) = (8u64, 10_000.0);
    let mut total = 0u64;
    for r in 0..runs {
        let start = sample_box_state(&pi, 5, &mut rng);
        total += simulate_boundary(&spec, &start, horizon, tagged_seed(seed, TAG_REPLICA, r))?.counter.count();
    }
    let rate = total as f64 / (runs as f64 * horizon);
    Ok(Check {
        name: "annihilation_rate",
        passed: (rate - 0.1).abs() <= 0.005,
        detail: format!("Z/t = {rate} (expected 0.1)"),
    })
}

fn check_coupling(seed: u64) -> Result<Check> {
    let law = ballistic_law();
    let mut violations = 0;
    for i in 0..500u64 {
        let n = 4 + (i % 7) as usize;
        let env = sample_environment(&law, n, tagged_seed(seed, TAG_ENVIRONMENT, i))?;
        let k = 1 + (i as usize % (n - 1));
        let stream = EventStream::segment(n, 20.0, tagged_seed(seed, TAG_REPLICA, i))?;
        violations += coupled_order_violations((&ground_state(n, k)?, &env), (&top_state(n, k)?, &env), &stream, 20.0)?;
    }
    Ok(Check { name: "monotone_coupling", passed: violations == 0, detail: format!("{violations} violations") })
}

fn check_censoring(seed: u64) -> Result<Check> {
    let env = sample_environment(&ballistic_law(), 5, tagged_seed(seed, TAG_ENVIRONMENT, 0))?;
    let space = StateSpace::new(5, 2)?;
    let scheme = make_box_censoring(5, 2, 1, 0.5)?;
    let theta = Distribution::point_mass(&space, &top_state(5, 2)?)?;
    let gen = GeneratorMatrix::sep(&env, &space)?;
    let mut ok = true;
    for t in [0.5, 1.0, 2.0] {
        let plain = distribution_at(&theta, &gen, t)?;
        let censored = censored_distribution_at(&theta, &env, &space, &scheme, t)?;
        ok &= stochastic_dominance_with(&censored, &plain, &space, DominanceMethod::UpSets)?.holds;
    }
    Ok(Check { name: "censoring_dominance", passed: ok, detail: "box scheme, N = 5, k = 2".into() })
}

fn check_two_state() -> Result<Check> {
    let t = exact_mixing_time::<f64>(&Environment::constant(0.5, 2)?, 1, 0.25)?.time;
    let err = (t - std::f64::consts::LN_2).abs();
    Ok(Check { name: "two_state_mixing", passed: err <= 1e-6, detail: format!("t = {t}") })
}

fn check_event_a(seed: u64) -> Result<Check> {
    let law = ballistic_law();
    let mut ok = true;
    for i in 0..20u64 {
        let env = sample_environment(&law, 12, tagged_seed(seed, TAG_ENVIRONMENT, 100 + i))?;
        ok &= exact_pi_a::<f64>(&env, 4)? <= pi_a_bound(&env, 4)?;
    }
    Ok(Check { name: "pi_a_bound", passed: ok, detail: "20 environments, N = 12, k = 4".into() })
}

fn validate(s: &Settings) -> Result<Report> {
    let checks = vec![
        check_stationary(s.seed)?,
        check_profile()?,
        check_annihilation(s.seed)?,
        check_coupling(s.seed)?,
        check_censoring(s.seed)?,
        check_two_state()?,
        check_event_a(s.seed)?,
    ];
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["check", "passed", "detail"])?;
    for c in &checks {
        w.write_record([c.name, if c.passed { "true" } else { "false" }, c.detail.as_str()])?;
    }
    let failures: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.name.to_string()).collect();
    let passed = checks.len() - failures.len();
    let regime = classify(&s.parsed_law)?.regime.label();
    Ok(Report {
        csv: w.into_inner().context("flushing check table")?,
        summary: json!({ "checks": checks.len(), "passed": passed, "law_regime": regime }),
        failures,
    })
}
