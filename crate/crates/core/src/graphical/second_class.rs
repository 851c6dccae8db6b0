//! Exclusion with second class particles and its three projections.
//!
//! Priorities are `1 > 2 > 0`. A ring uses the same HEAD/TAIL/U rule as the
//! plain process, but swaps the two values whenever the moving site
//! outranks its neighbour.

use std::fmt;
use std::str::FromStr;

use crate::env::Environment;
use crate::error::{Result, SepError};
use crate::statespace::Configuration;

use super::{Coin, EventStream};

/// Values in `{0, 1, 2}` on a window of the integers starting at `offset`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ThreeSpeciesConfiguration {
    vals: Vec<u8>,
    offset: i64,
}

#[inline]
fn rank(v: u8) -> u8 {
    match v {
        1 => 2,
        2 => 1,
        _ => 0,
    }
}

impl ThreeSpeciesConfiguration {
    pub fn new(vals: Vec<u8>, offset: i64) -> Result<Self> {
        if let Some(v) = vals.iter().find(|&&v| v > 2) {
            return Err(SepError::InvalidParameter(format!("species value {v} not in {{0,1,2}}")));
        }
        Ok(ThreeSpeciesConfiguration { vals, offset })
    }

    pub fn values(&self) -> &[u8] {
        &self.vals
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn first_site(&self) -> i64 {
        self.offset
    }

    pub fn last_site(&self) -> i64 {
        self.offset + self.vals.len() as i64 - 1
    }

    pub fn get(&self, site: i64) -> Option<u8> {
        let i = site - self.offset;
        (0..self.vals.len() as i64).contains(&i).then(|| self.vals[i as usize])
    }

    pub fn count(&self, species: u8) -> usize {
        self.vals.iter().filter(|&&v| v == species).count()
    }
}

impl fmt::Display for ThreeSpeciesConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.vals {
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl FromStr for ThreeSpeciesConfiguration {
    type Err = SepError;

    /// Parses a literal such as `"2102"`, placed at offset 1.
    fn from_str(s: &str) -> Result<Self> {
        let vals = s
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                '2' => Ok(2),
                _ => Err(SepError::Parse(format!("bad species literal {s:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        ThreeSpeciesConfiguration::new(vals, 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondClassRun {
    pub config: ThreeSpeciesConfiguration,
    /// A first class particle entered an edge site of the window, so the
    /// window may no longer stand in for the integers.
    pub boundary_touched: bool,
}

/// Evolves `xi0` up to time `t` under the shared stream.
pub fn evolve_second_class(
    xi0: &ThreeSpeciesConfiguration,
    env: &Environment,
    stream: &EventStream,
    t: f64,
) -> Result<SecondClassRun> {
    if xi0.len() != env.len() || xi0.offset != env.first_site() {
        return Err(SepError::Mismatch("configuration and environment windows differ".into()));
    }
    stream.check_time(t)?;
    let mut xi = xi0.clone();
    let n = xi.vals.len();
    let rates = env.rates();
    let first = env.first_site();
    let (left0, right0) = (xi0.vals[0], xi0.vals[n - 1]);
    let mut touched = false;
    for ev in stream.events_in(env.first_site(), env.last_site())? {
        if ev.time > t {
            break;
        }
        let i = (ev.site - first) as usize;
        let j = match ev.coin {
            Coin::Head if i + 1 < n && ev.u <= rates[i] => i + 1,
            Coin::Tail if i > 0 && ev.u > rates[i] => i - 1,
            _ => continue,
        };
        if rank(xi.vals[i]) > rank(xi.vals[j]) {
            xi.vals.swap(i, j);
            let edge_start = if j == 0 {
                Some(left0)
            } else if j == n - 1 {
                Some(right0)
            } else {
                None
            };
            if xi.vals[j] == 1 && edge_start.is_some_and(|v| v != 1) {
                touched = true;
            }
        }
    }
    Ok(SecondClassRun { config: xi, boundary_touched: touched })
}

/// Particle blindness: `{1, 2} -> 1`.
pub fn project_2to1(xi: &ThreeSpeciesConfiguration) -> Configuration {
    Configuration::from_bits(xi.vals.iter().map(|&v| v != 0).collect())
}

/// Second class / empty site blindness: `{2, 0} -> 0`.
pub fn project_2to0(xi: &ThreeSpeciesConfiguration) -> Configuration {
    Configuration::from_bits(xi.vals.iter().map(|&v| v == 1).collect())
}

/// Result of the star projection.
#[derive(Debug, Clone, PartialEq)]
pub struct StarProjection {
    /// Values at `u(first_label), u(first_label + 1), ...`: 1 for a second
    /// class particle, 0 for an empty site.
    pub config: Configuration,
    /// Label `i` of the first entry, so entry `j` is `ξ*(first_label + j)`.
    pub first_label: i64,
    /// The positions `u(i)` in the same order.
    pub positions: Vec<i64>,
}

/// Deletes the first class particles and relabels the remaining sites so
/// that label 0 sits at the anchor: the leftmost 2 at a non-positive site
/// if there is one in the window, else the leftmost 2 at a positive site.
pub fn project_star(xi: &ThreeSpeciesConfiguration) -> Result<StarProjection> {
    let sites: Vec<i64> = (xi.first_site()..=xi.last_site()).collect();
    let anchor = sites
        .iter()
        .copied()
        .find(|&s| s <= 0 && xi.get(s) == Some(2))
        .or_else(|| sites.iter().copied().find(|&s| s > 0 && xi.get(s) == Some(2)))
        .ok_or_else(|| SepError::InvalidParameter("star projection needs a second class particle".into()))?;
    let positions: Vec<i64> = sites.into_iter().filter(|&s| xi.get(s) != Some(1)).collect();
    let zero = positions.iter().position(|&s| s == anchor).expect("anchor is not a 1-site");
    let config = Configuration::from_bits(positions.iter().map(|&s| xi.get(s) == Some(2)).collect());
    Ok(StarProjection { config, first_label: -(zero as i64), positions })
}
