//! Experiment configuration: command-line flags layered over an optional
//! TOML file with the same keys.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use sep_core::env::{classify, EnvironmentLaw};
use sep_core::estimate::ScalingEstimator;

/// Every setting is optional here; defaults depend on the command and are
/// filled in by [`Settings::resolve`].
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Environment law, e.g. "uniform(0.6,0.9)" or "two_point(0.25,1,0.3)".
    #[arg(long)]
    pub law: Option<String>,
    /// Segment length.
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated segment lengths for scaling runs.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    /// Particle count; overrides the density.
    #[arg(long)]
    pub k: Option<usize>,
    /// Particle density; k = floor(rho * N).
    #[arg(long)]
    pub rho: Option<f64>,
    /// Total variation threshold.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Monte Carlo replicas (samples for boundary profiles).
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Global seed; environments and replicas derive their seeds from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Time horizon.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Boundary box length.
    #[arg(long)]
    pub m: Option<usize>,
    /// Boundary tilt.
    #[arg(long)]
    pub c: Option<f64>,
    /// Scaling estimator: coalescence or hitting.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Environments per size in scaling runs.
    #[arg(long)]
    pub environments: Option<usize>,
    /// Box half-width for the censoring scheme.
    #[arg(long)]
    pub box_width: Option<usize>,
    /// Switch period for the censoring scheme.
    #[arg(long)]
    pub period: Option<f64>,
}

macro_rules! layer {
    ($flags:expr, $file:expr, $($field:ident),*) => {
        ExperimentConfig { $($field: $flags.$field.or($file.$field)),* }
    };
}

impl ExperimentConfig {
    /// `self` (flags) wins over `file`.
    pub fn over(self, file: ExperimentConfig) -> ExperimentConfig {
        layer!(
            self,
            file,
            law,
            n,
            grid,
            k,
            rho,
            eps,
            replicas,
            seed,
            horizon,
            out,
            m,
            c,
            estimator,
            environments,
            box_width,
            period
        )
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Exact,
    Boundary,
    Censor,
    Scaling,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Exact => "exact",
            Command::Boundary => "boundary",
            Command::Censor => "censor",
            Command::Scaling => "scaling",
            Command::Validate => "validate",
        }
    }
}

/// Fully resolved and validated settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub command: Command,
    pub law: String,
    #[serde(skip)]
    pub parsed_law: EnvironmentLaw,
    pub n: usize,
    pub k: usize,
    pub grid: Vec<usize>,
    pub rho: f64,
    pub eps: f64,
    pub replicas: usize,
    pub seed: u64,
    pub horizon: f64,
    #[serde(skip)]
    pub out: PathBuf,
    pub m: usize,
    pub c: f64,
    pub estimator: ScalingEstimator,
    pub environments: usize,
    pub box_width: usize,
    pub period: f64,
}

impl Settings {
    pub fn resolve(command: Command, cfg: ExperimentConfig) -> Result<Settings, String> {
        let law = cfg.law.unwrap_or_else(|| "uniform(0.6,0.9)".to_string());
        let parsed_law: EnvironmentLaw = law.parse().map_err(|e| format!("--law {law:?}: {e}"))?;
        classify(&parsed_law).map_err(|e| format!("--law {law:?}: {e}"))?;
        let rho = cfg.rho.unwrap_or(0.5);
        if !(rho > 0.0 && rho < 1.0) {
            return Err(format!("--rho {rho} must lie in (0, 1)"));
        }
        let n = cfg.n.unwrap_or(8);
        if n < 2 {
            return Err(format!("--n {n} must be at least 2"));
        }
        let k = match cfg.k {
            Some(k) => k,
            None => (rho * n as f64).floor() as usize,
        };
        if k == 0 || k >= n {
            return Err(format!("particle count {k} must lie in [1, N - 1] for N = {n}"));
        }
        let grid = cfg.grid.unwrap_or_else(|| vec![32, 64, 128, 256]);
        if grid.len() < 4 || grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] < 4 {
            return Err("--grid must list at least four increasing sizes, each at least 4".into());
        }
        let eps = cfg.eps.unwrap_or(0.25);
        if !(eps > 0.0 && eps < 1.0) {
            return Err(format!("--eps {eps} must lie in (0, 1)"));
        }
        let replicas = cfg.replicas.unwrap_or(match command {
            Command::Boundary => 100_000,
            _ => 200,
        });
        if replicas == 0 {
            return Err("--replicas must be positive".into());
        }
        let horizon = cfg.horizon.unwrap_or(match command {
            Command::Censor => 2.0,
            Command::Boundary => 10_000.0,
            _ => 10.0,
        });
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(format!("--horizon {horizon} must be positive"));
        }
        let m = cfg.m.unwrap_or(10);
        let c = cfg.c.unwrap_or(0.0);
        if m < 2 || !(c.abs() < 0.5) {
            return Err(format!("boundary box needs M >= 2 and |c| < 1/2, got M = {m}, c = {c}"));
        }
        let estimator: ScalingEstimator =
            cfg.estimator.as_deref().unwrap_or("coalescence").parse().map_err(|e| format!("--estimator: {e}"))?;
        let environments = cfg.environments.unwrap_or(sep_core::estimate::ENVIRONMENTS_PER_SIZE);
        let box_width = cfg.box_width.unwrap_or(1);
        let period = cfg.period.unwrap_or(0.5);
        if environments == 0 || box_width == 0 || !(period > 0.0) {
            return Err("environments, box width and period must be positive".into());
        }
        Ok(Settings {
            command,
            law,
            parsed_law,
            n,
            k,
            grid,
            rho,
            eps,
            replicas,
            seed: cfg.seed.unwrap_or(0),
            horizon,
            out: cfg.out.unwrap_or_else(|| PathBuf::from("sep-out")),
            m,
            c,
            estimator,
            environments,
            box_width,
            period,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let flags = ExperimentConfig { n: Some(6), ..Default::default() };
        let file = ExperimentConfig { n: Some(10), seed: Some(4), ..Default::default() };
        let merged = flags.over(file);
        assert_eq!(merged.n, Some(6));
        assert_eq!(merged.seed, Some(4));
    }

    #[test]
    fn density_sets_particle_count() {
        let s = Settings::resolve(Command::Exact, ExperimentConfig { n: Some(9), ..Default::default() }).unwrap();
        assert_eq!(s.k, 4);
        let bad = ExperimentConfig { rho: Some(1.0), ..Default::default() };
        assert!(Settings::resolve(Command::Exact, bad).is_err());
    }

    #[test]
    fn toml_keys_mirror_flags() {
        let cfg: ExperimentConfig =
            toml::from_str("law = \"uniform(0.6,0.9)\"\ngrid = [8, 16, 32, 64]\nseed = 3\n").unwrap();
        assert_eq!(cfg.grid, Some(vec![8, 16, 32, 64]));
        assert!(toml::from_str::<ExperimentConfig>("nonsense = 1").is_err());
    }
}
