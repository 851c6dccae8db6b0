//! Environment laws, sampled environments and regime classification.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Result, SepError};
use crate::seed;

/// Default interpolation parameter for the plain-nestling exponent.
pub const DEFAULT_DELTA_TILDE: f64 = 0.5;

/// Grid step used when searching for the plain-nestling depth `gamma`.
pub const GAMMA_GRID_STEP: f64 = 0.05;

/// Law of a single site rate `w(x)`, i.i.d. across sites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvironmentLaw {
    /// Point mass at `p`.
    Constant(f64),
    /// `P(w = p1) = alpha`, `P(w = p2) = 1 - alpha`.
    TwoPoint { p1: f64, p2: f64, alpha: f64 },
    /// Uniform on the closed interval `[a, b]`.
    Uniform { a: f64, b: f64 },
}

fn in_unit(p: f64) -> bool {
    p > 0.0 && p <= 1.0
}

impl EnvironmentLaw {
    pub fn constant(p: f64) -> Result<Self> {
        let law = EnvironmentLaw::Constant(p);
        law.validate()?;
        Ok(law)
    }

    pub fn two_point(p1: f64, p2: f64, alpha: f64) -> Result<Self> {
        let law = EnvironmentLaw::TwoPoint { p1, p2, alpha };
        law.validate()?;
        Ok(law)
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        let law = EnvironmentLaw::Uniform { a, b };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SepError::InvalidLaw(m));
        match *self {
            EnvironmentLaw::Constant(p) => {
                if !in_unit(p) {
                    return bad(format!("constant({p}) outside (0,1]"));
                }
            }
            EnvironmentLaw::TwoPoint { p1, p2, alpha } => {
                if !in_unit(p1) || !in_unit(p2) {
                    return bad(format!("twopoint support ({p1},{p2}) outside (0,1]"));
                }
                if p1 == p2 {
                    return bad("twopoint requires p1 != p2".into());
                }
                if !(0.0..=1.0).contains(&alpha) {
                    return bad(format!("twopoint weight {alpha} outside [0,1]"));
                }
            }
            EnvironmentLaw::Uniform { a, b } => {
                if !in_unit(a) || !in_unit(b) || a > b {
                    return bad(format!("uniform({a},{b}) is not a sub-interval of (0,1]"));
                }
            }
        }
        Ok(())
    }

    fn touches_zero(&self) -> bool {
        match *self {
            EnvironmentLaw::Constant(p) => p <= 0.0,
            EnvironmentLaw::TwoPoint { p1, p2, alpha } => (alpha > 0.0 && p1 <= 0.0) || (alpha < 1.0 && p2 <= 0.0),
            EnvironmentLaw::Uniform { a, .. } => a <= 0.0,
        }
    }

    /// Essential infimum of the law.
    pub fn essential_infimum(&self) -> f64 {
        match *self {
            EnvironmentLaw::Constant(p) => p,
            EnvironmentLaw::TwoPoint { p1, p2, alpha } => {
                if alpha <= 0.0 {
                    p2
                } else if alpha >= 1.0 {
                    p1
                } else {
                    p1.min(p2)
                }
            }
            EnvironmentLaw::Uniform { a, .. } => a,
        }
    }

    /// `P(w <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            EnvironmentLaw::Constant(p) => {
                if p <= x {
                    1.0
                } else {
                    0.0
                }
            }
            EnvironmentLaw::TwoPoint { p1, p2, alpha } => {
                let mut m = 0.0;
                if p1 <= x {
                    m += alpha;
                }
                if p2 <= x {
                    m += 1.0 - alpha;
                }
                m
            }
            EnvironmentLaw::Uniform { a, b } => {
                if x < a {
                    0.0
                } else if x >= b {
                    1.0
                } else {
                    (x - a) / (b - a)
                }
            }
        }
    }

    /// `P(w = x)`.
    pub fn atom(&self, x: f64) -> f64 {
        match *self {
            EnvironmentLaw::Constant(p) => {
                if p == x {
                    1.0
                } else {
                    0.0
                }
            }
            EnvironmentLaw::TwoPoint { p1, p2, alpha } => {
                let mut m = 0.0;
                if p1 == x {
                    m += alpha;
                }
                if p2 == x {
                    m += 1.0 - alpha;
                }
                m
            }
            EnvironmentLaw::Uniform { a, b } => {
                if a == b && a == x {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `P(w < x)`.
    pub fn prob_below(&self, x: f64) -> f64 {
        self.cdf(x) - self.atom(x)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            EnvironmentLaw::Constant(p) => p,
            EnvironmentLaw::TwoPoint { p1, p2, alpha } => {
                if rng.random::<f64>() < alpha {
                    p1
                } else {
                    p2
                }
            }
            EnvironmentLaw::Uniform { a, b } => {
                if a == b {
                    a
                } else {
                    // Closed interval; 1 - U lands in (0, 1].
                    a + (b - a) * (1.0 - rng.random::<f64>())
                }
            }
        }
    }
}

impl fmt::Display for EnvironmentLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            EnvironmentLaw::Constant(p) => write!(f, "constant({p})"),
            EnvironmentLaw::TwoPoint { p1, p2, alpha } => write!(f, "twopoint({p1},{p2},{alpha})"),
            EnvironmentLaw::Uniform { a, b } => write!(f, "uniform({a},{b})"),
        }
    }
}

fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: f64 = num.trim().parse().map_err(|_| SepError::Parse(format!("bad number '{s}'")))?;
        let d: f64 = den.trim().parse().map_err(|_| SepError::Parse(format!("bad number '{s}'")))?;
        if d == 0.0 {
            return Err(SepError::Parse(format!("zero denominator in '{s}'")));
        }
        return Ok(n / d);
    }
    s.parse().map_err(|_| SepError::Parse(format!("bad number '{s}'")))
}

impl FromStr for EnvironmentLaw {
    type Err = SepError;

    /// Accepts `constant(p)`, `twopoint(p1,p2,alpha)` and `uniform(a,b)`.
    /// Arguments may be decimals or simple fractions such as `1/4`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let open = s.find('(').ok_or_else(|| SepError::Parse(format!("missing '(' in law '{s}'")))?;
        if !s.ends_with(')') {
            return Err(SepError::Parse(format!("missing ')' in law '{s}'")));
        }
        let name = s[..open].trim().to_ascii_lowercase().replace(['_', '-'], "");
        let inner = &s[open + 1..s.len() - 1];
        let args = inner.split(',').map(parse_number).collect::<Result<Vec<f64>>>()?;
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(SepError::Parse(format!("{name} expects {n} arguments, got {}", args.len())))
            }
        };
        match name.as_str() {
            "constant" => {
                arity(1)?;
                EnvironmentLaw::constant(args[0])
            }
            "twopoint" => {
                arity(3)?;
                EnvironmentLaw::two_point(args[0], args[1], args[2])
            }
            "uniform" => {
                arity(2)?;
                EnvironmentLaw::uniform(args[0], args[1])
            }
            other => Err(SepError::Parse(format!("unknown law family '{other}'"))),
        }
    }
}

/// `E[(1 - w)/w]` in closed form. The law is ballistic iff this is `< 1`.
pub fn ballistic_expectation(law: &EnvironmentLaw) -> Result<f64> {
    if law.touches_zero() {
        return Err(SepError::DivergentExpectation);
    }
    law.validate()?;
    let g = |w: f64| (1.0 - w) / w;
    Ok(match *law {
        EnvironmentLaw::Constant(p) => g(p),
        EnvironmentLaw::TwoPoint { p1, p2, alpha } => alpha * g(p1) + (1.0 - alpha) * g(p2),
        EnvironmentLaw::Uniform { a, b } => {
            if a == b {
                g(a)
            } else {
                (b / a).ln() / (b - a) - 1.0
            }
        }
    })
}

/// Which of the three nestling regimes a ballistic law falls into.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    /// Essential infimum `1/2 + epsilon` with `epsilon > 0`.
    NonNestling { epsilon: f64 },
    /// Essential infimum exactly `1/2`.
    MarginalNestling { has_atom_at_half: bool },
    /// `P(w <= 1/2 - gamma) = beta > 0`.
    PlainNestling { beta: f64, gamma: f64 },
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::NonNestling { .. } => "non-nestling",
            Regime::MarginalNestling { has_atom_at_half: true } => "marginal-nestling-atom",
            Regime::MarginalNestling { has_atom_at_half: false } => "marginal-nestling",
            Regime::PlainNestling { .. } => "plain-nestling",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeClass {
    pub regime: Regime,
    pub ballistic_expectation: f64,
}

/// Classifies a ballistic law.
///
/// For plain nestling laws `gamma` is the largest multiple of
/// [`GAMMA_GRID_STEP`] below `1/2` with `P(w <= 1/2 - gamma) > 0`. If the
/// support dips below `1/2` by less than one grid step, `gamma` falls back to
/// half the gap `1/2 - ess inf`.
pub fn classify(law: &EnvironmentLaw) -> Result<RegimeClass> {
    let expectation = ballistic_expectation(law)?;
    if expectation >= 1.0 {
        return Err(SepError::NotBallistic(expectation));
    }
    let inf = law.essential_infimum();
    let regime = if inf > 0.5 {
        Regime::NonNestling { epsilon: inf - 0.5 }
    } else if inf == 0.5 {
        Regime::MarginalNestling { has_atom_at_half: law.atom(0.5) > 0.0 }
    } else {
        let steps = (0.5 / GAMMA_GRID_STEP).round() as u32;
        let grid_hit =
            (1..steps).rev().map(|j| f64::from(j) / f64::from(steps) * 0.5).find(|&gamma| law.cdf(0.5 - gamma) > 0.0);
        let gamma = grid_hit.unwrap_or((0.5 - inf) / 2.0);
        Regime::PlainNestling { beta: law.cdf(0.5 - gamma), gamma }
    };
    Ok(RegimeClass { regime, ballistic_expectation: expectation })
}

/// Output of [`delta_exponent`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaExponent {
    pub delta: f64,
    /// `q = (1/2 + gamma) / (1/2 - gamma)`.
    pub q: f64,
    /// Set when `delta >= 1/2`, which no ballistic law can produce.
    pub violates_half: bool,
}

/// Plain-nestling lower-bound exponent `delta = delta_tilde * ln q / (2 ln(1/beta))`.
pub fn delta_exponent(beta: f64, gamma: f64, delta_tilde: f64) -> Result<DeltaExponent> {
    let open_unit = |v: f64| v > 0.0 && v < 1.0;
    if !open_unit(beta) || !open_unit(delta_tilde) {
        return Err(SepError::InvalidParameter(format!(
            "beta = {beta}, delta_tilde = {delta_tilde} must lie in (0,1)"
        )));
    }
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(SepError::InvalidParameter(format!("gamma = {gamma} must lie in (0,1/2)")));
    }
    let q = (0.5 + gamma) / (0.5 - gamma);
    let delta = delta_tilde * q.ln() / (2.0 * (1.0 / beta).ln());
    Ok(DeltaExponent { delta, q, violates_half: delta >= 0.5 })
}

/// A realized environment on a window of consecutive sites.
///
/// `rates[i]` is the right-jump rate of site `offset + i`. Segments use
/// `offset = 1`; windows of the integers carry whatever offset they need.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    rates: Vec<f64>,
    offset: i64,
}

impl Environment {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        Self::with_offset(rates, 1)
    }

    pub fn with_offset(rates: Vec<f64>, offset: i64) -> Result<Self> {
        if rates.len() < 2 {
            return Err(SepError::InvalidParameter(format!("environment needs at least 2 sites, got {}", rates.len())));
        }
        if let Some(bad) = rates.iter().find(|&&w| !in_unit(w)) {
            return Err(SepError::InvalidParameter(format!("rate {bad} outside (0,1]")));
        }
        Ok(Environment { rates, offset })
    }

    pub fn constant(p: f64, n: usize) -> Result<Self> {
        Self::new(vec![p; n])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.rates.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    #[inline]
    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn first_site(&self) -> i64 {
        self.offset
    }

    pub fn last_site(&self) -> i64 {
        self.offset + self.rates.len() as i64 - 1
    }

    /// Rates indexed from the window's first site.
    #[inline]
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// `w(site)`; sites outside the window are an error.
    pub fn rate(&self, site: i64) -> Result<f64> {
        let idx = site - self.offset;
        if idx < 0 || idx as usize >= self.rates.len() {
            return Err(SepError::SiteOutOfWindow { site, first: self.first_site(), last: self.last_site() });
        }
        Ok(self.rates[idx as usize])
    }

    /// The environment shifted right by `n`: `w_n(x) = w(x - n)`.
    pub fn shift(&self, n: i64) -> Environment {
        Environment { rates: self.rates.clone(), offset: self.offset + n }
    }

    /// Sub-window `[first, last]` of this environment.
    pub fn window(&self, first: i64, last: i64) -> Result<Environment> {
        self.rate(first)?;
        self.rate(last)?;
        let a = (first - self.offset) as usize;
        let b = (last - self.offset) as usize;
        Environment::with_offset(self.rates[a..=b].to_vec(), first)
    }

    /// `self ⪯ other` in the environment order, i.e. `w(x) >= w̄(x)` on every
    /// site: `self` has at least as much rightward drift everywhere.
    pub fn precedes(&self, other: &Environment) -> bool {
        self.offset == other.offset
            && self.len() == other.len()
            && self.rates.iter().zip(&other.rates).all(|(a, b)| 1.0 - a <= 1.0 - b)
    }

    /// All rates strictly inside `(0,1)`.
    pub fn is_interior(&self) -> bool {
        self.rates.iter().all(|&w| w < 1.0)
    }
}

/// Draws `n` i.i.d. rates from `law`; deterministic in `seed`.
pub fn sample_environment(law: &EnvironmentLaw, n: usize, seed: u64) -> Result<Environment> {
    law.validate()?;
    if n < 2 {
        return Err(SepError::InvalidParameter(format!("N = {n} < 2")));
    }
    let mut rng = seed::child_rng(seed, seed::TAG_ENVIRONMENT);
    let rates = (0..n).map(|_| law.sample(&mut rng)).collect();
    Environment::new(rates)
}

/// Like [`sample_environment`] but on the window `[first, first + n - 1]`.
pub fn sample_window(law: &EnvironmentLaw, first: i64, n: usize, seed: u64) -> Result<Environment> {
    let env = sample_environment(law, n, seed)?;
    Ok(env.shift(first - 1))
}
