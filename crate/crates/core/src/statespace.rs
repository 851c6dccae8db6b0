//! Configurations, the prefix-sum partial order and the enumerated state
//! space used by the exact engine.
//!
//! Public site numbers are 1-based (`1..=N`) to match the segment `[N]`;
//! storage is 0-based.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;

use crate::error::{Result, SepError};

/// Default cap on `C(N, k)` for exact enumeration.
pub const DEFAULT_STATE_CAP: usize = 20_000;

/// Occupancy vector with cached particle count.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    occ: Vec<bool>,
    k: usize,
}

impl Configuration {
    pub fn from_bits(occ: Vec<bool>) -> Self {
        let k = occ.iter().filter(|&&b| b).count();
        Configuration { occ, k }
    }

    pub fn empty(n: usize) -> Self {
        Configuration { occ: vec![false; n], k: 0 }
    }

    /// Bit `i` of `mask` is site `i + 1`.
    pub fn from_mask(mask: u64, n: usize) -> Self {
        Self::from_bits((0..n).map(|i| mask >> i & 1 == 1).collect())
    }

    pub fn to_mask(&self) -> u64 {
        debug_assert!(self.occ.len() <= 64);
        self.occ.iter().enumerate().fold(0u64, |m, (i, &b)| if b { m | 1 << i } else { m })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.occ.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.occ.is_empty()
    }

    /// Number of particles.
    #[inline]
    pub fn particles(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn bits(&self) -> &[bool] {
        &self.occ
    }

    /// Mutable access for the dynamics; callers must only swap entries.
    #[inline]
    pub(crate) fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.occ
    }

    /// Occupancy of 1-based `site`.
    #[inline]
    pub fn occupied(&self, site: usize) -> bool {
        self.occ[site - 1]
    }

    pub fn set(&mut self, site: usize, value: bool) {
        let slot = &mut self.occ[site - 1];
        if *slot != value {
            *slot = value;
            if value {
                self.k += 1;
            } else {
                self.k -= 1;
            }
        }
    }

    /// Positions (1-based) of the particles from left to right.
    pub fn positions(&self) -> Vec<usize> {
        self.occ.iter().enumerate().filter_map(|(i, &b)| b.then_some(i + 1)).collect()
    }

    pub fn prefix_sums(&self) -> Vec<usize> {
        self.occ
            .iter()
            .scan(0usize, |acc, &b| {
                *acc += usize::from(b);
                Some(*acc)
            })
            .collect()
    }

    /// Leftmost occupied site `L(η)`.
    pub fn leftmost_particle(&self) -> Result<usize> {
        self.occ
            .iter()
            .position(|&b| b)
            .map(|i| i + 1)
            .ok_or_else(|| SepError::InvalidParameter("configuration has no particle".into()))
    }

    /// Rightmost vacant site `R(η)`.
    pub fn rightmost_empty(&self) -> Result<usize> {
        self.occ
            .iter()
            .rposition(|&b| !b)
            .map(|i| i + 1)
            .ok_or_else(|| SepError::InvalidParameter("configuration has no empty site".into()))
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.occ {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Configuration {
    type Err = SepError;

    fn from_str(s: &str) -> Result<Self> {
        let occ = s
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(SepError::Parse(format!("invalid occupancy character '{other}'"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        if occ.is_empty() {
            return Err(SepError::Parse("empty configuration literal".into()));
        }
        Ok(Configuration::from_bits(occ))
    }
}

fn check_nk(n: usize, k: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(SepError::InvalidParameter(format!("need 1 <= k <= N-1, got N = {n}, k = {k}")));
    }
    Ok(())
}

/// `ϑ_{N,k}`: all particles packed at the right end. Minimal in the order.
pub fn ground_state(n: usize, k: usize) -> Result<Configuration> {
    check_nk(n, k)?;
    Ok(Configuration::from_bits((1..=n).map(|i| i > n - k).collect()))
}

/// `θ_{N,k}`: all particles packed at the left end. Maximal in the order.
pub fn top_state(n: usize, k: usize) -> Result<Configuration> {
    check_nk(n, k)?;
    Ok(Configuration::from_bits((1..=n).map(|i| i <= k).collect()))
}

/// `η ⪯ ζ`: every prefix sum of `η` is at most that of `ζ`.
pub fn leq(eta: &Configuration, zeta: &Configuration) -> Result<bool> {
    if eta.len() != zeta.len() || eta.particles() != zeta.particles() {
        return Err(SepError::Mismatch(format!(
            "(N,k) = ({},{}) vs ({},{})",
            eta.len(),
            eta.particles(),
            zeta.len(),
            zeta.particles()
        )));
    }
    Ok(leq_unchecked(eta.bits(), zeta.bits()))
}

/// Prefix-sum comparison without the `(N,k)` check.
#[inline]
pub fn leq_unchecked(eta: &[bool], zeta: &[bool]) -> bool {
    let mut diff: i64 = 0;
    for (&a, &b) in eta.iter().zip(zeta) {
        diff += i64::from(b) - i64::from(a);
        if diff < 0 {
            return false;
        }
    }
    true
}

/// Event `A`: some site `x <= ⌊N/4⌋` is occupied.
pub fn in_event_a(eta: &Configuration) -> bool {
    let quarter = eta.len() / 4;
    eta.bits()[..quarter].iter().any(|&b| b)
}

/// Exact height function `H_η(x) = Σ_{z<=x} η(z) - x k / N`, `x ∈ [N-1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeightProfile(pub Vec<Rational64>);

impl HeightProfile {
    pub fn values(&self) -> &[Rational64] {
        &self.0
    }

    /// Pointwise `self <= other`.
    pub fn dominated_by(&self, other: &HeightProfile) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

pub fn height(eta: &Configuration) -> HeightProfile {
    let n = eta.len() as i64;
    let k = eta.particles() as i64;
    let sums = eta.prefix_sums();
    HeightProfile(
        (1..n).map(|x| Rational64::from_integer(sums[(x - 1) as usize] as i64) - Rational64::new(x * k, n)).collect(),
    )
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// `Ω_{N,k}` in colexicographic order of the occupied-site sets.
///
/// Index `i` corresponds to the `i`-th `k`-subset of `{1..N}` ordered by
/// largest element first, which is the same as increasing bitmask order with
/// site `x` at bit `x - 1`. [`StateSpace::index_of`] inverts the enumeration
/// through the combinatorial number system.
#[derive(Debug, Clone)]
pub struct StateSpace {
    n: usize,
    k: usize,
    masks: Vec<u64>,
    binom: Vec<Vec<u64>>,
}

impl StateSpace {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        Self::with_cap(n, k, DEFAULT_STATE_CAP)
    }

    pub fn with_cap(n: usize, k: usize, cap: usize) -> Result<Self> {
        if k > n || n > 63 {
            return Err(SepError::InvalidParameter(format!("unsupported (N,k) = ({n},{k})")));
        }
        let size = binomial(n, k);
        if size > cap as u128 {
            return Err(SepError::CapExceeded { n, k, size, cap });
        }
        let mut masks = Vec::with_capacity(size as usize);
        if k == 0 {
            masks.push(0);
        } else {
            // Gosper's hack walks k-subsets in increasing numeric order.
            let limit = 1u64 << n;
            let mut m: u64 = (1u64 << k) - 1;
            while m < limit {
                masks.push(m);
                let c = m & m.wrapping_neg();
                let r = m + c;
                m = (((r ^ m) >> 2) / c) | r;
            }
        }
        let binom = (0..=n).map(|a| (0..=k).map(|b| binomial(a, b) as u64).collect()).collect();
        Ok(StateSpace { n, k, masks, binom })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.masks.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    #[inline]
    pub fn masks(&self) -> &[u64] {
        &self.masks
    }

    #[inline]
    pub fn mask(&self, index: usize) -> u64 {
        self.masks[index]
    }

    pub fn state(&self, index: usize) -> Configuration {
        Configuration::from_mask(self.masks[index], self.n)
    }

    pub fn states(&self) -> Vec<Configuration> {
        (0..self.len()).map(|i| self.state(i)).collect()
    }

    /// Colex rank of a bitmask with exactly `k` bits among the low `n`.
    pub fn index_of_mask(&self, mask: u64) -> usize {
        let mut rank = 0u64;
        let mut rest = mask;
        let mut j = 1;
        while rest != 0 {
            let p = rest.trailing_zeros() as usize;
            rank += self.binom[p][j];
            rest &= rest - 1;
            j += 1;
        }
        rank as usize
    }

    pub fn index_of(&self, eta: &Configuration) -> Result<usize> {
        if eta.len() != self.n || eta.particles() != self.k {
            return Err(SepError::Mismatch(format!("configuration {eta} is not in Ω_{{{},{}}}", self.n, self.k)));
        }
        Ok(self.index_of_mask(eta.to_mask()))
    }

    /// Linear-extension key: sum of all prefix sums. Strictly larger for
    /// strictly larger configurations.
    pub fn height_sum(&self, index: usize) -> u64 {
        let m = self.masks[index];
        (0..self.n).filter(|&i| m >> i & 1 == 1).map(|i| (self.n - i) as u64).sum()
    }

    /// Indices of the upper covers of `index`: one particle moved one step
    /// to the left into a vacant site.
    pub fn upper_covers(&self, index: usize) -> Vec<usize> {
        let m = self.masks[index];
        (1..self.n)
            .filter(|&i| m >> i & 1 == 1 && m >> (i - 1) & 1 == 0)
            .map(|i| self.index_of_mask(m ^ (1 << i) ^ (1 << (i - 1))))
            .collect()
    }

    pub fn leq_index(&self, a: usize, b: usize) -> bool {
        mask_leq(self.masks[a], self.masks[b], self.n)
    }
}

/// Prefix-sum order on bitmasks.
#[inline]
pub fn mask_leq(a: u64, b: u64, n: usize) -> bool {
    let mut diff: i32 = 0;
    for i in 0..n {
        diff += (b >> i & 1) as i32 - (a >> i & 1) as i32;
        if diff < 0 {
            return false;
        }
    }
    true
}

/// Total ordering helper for a partial order check result.
pub fn compare(eta: &Configuration, zeta: &Configuration) -> Result<Option<Ordering>> {
    let le = leq(eta, zeta)?;
    let ge = leq(zeta, eta)?;
    Ok(match (le, ge) {
        (true, true) => Some(Ordering::Equal),
        (true, false) => Some(Ordering::Less),
        (false, true) => Some(Ordering::Greater),
        (false, false) => None,
    })
}

/// Enumerates `Ω_{N,k}` with the default cap.
pub fn enumerate_states(n: usize, k: usize) -> Result<Vec<Configuration>> {
    Ok(StateSpace::new(n, k)?.states())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(s: &str) -> Configuration {
        s.parse().unwrap()
    }

    #[test]
    fn extremal_states() {
        assert_eq!(ground_state(4, 2).unwrap().to_string(), "0011");
        assert_eq!(top_state(4, 2).unwrap().to_string(), "1100");
        assert_eq!(ground_state(5, 1).unwrap().positions(), vec![5]);
        assert!(ground_state(4, 0).is_err());
        assert!(top_state(4, 4).is_err());
        for n in 2..=8 {
            for k in 1..n {
                assert!(leq(&ground_state(n, k).unwrap(), &top_state(n, k).unwrap()).unwrap());
            }
        }
    }

    #[test]
    fn leq_examples() {
        let a = cfg("0101");
        assert!(leq(&a, &a).unwrap());
        assert!(leq(&cfg("0101"), &cfg("1010")).unwrap());
        assert!(!leq(&cfg("1010"), &cfg("0101")).unwrap());
        assert!(leq(&cfg("0101"), &cfg("011")).is_err());
        assert!(leq(&cfg("0101"), &cfg("0111")).is_err());
    }

    #[test]
    fn leftmost_and_rightmost() {
        let c = cfg("0011");
        assert_eq!(c.leftmost_particle().unwrap(), 3);
        assert_eq!(c.rightmost_empty().unwrap(), 2);
        let top = top_state(7, 3).unwrap();
        assert_eq!((top.leftmost_particle().unwrap(), top.rightmost_empty().unwrap()), (1, 7));
        let g = ground_state(7, 3).unwrap();
        assert_eq!((g.leftmost_particle().unwrap(), g.rightmost_empty().unwrap()), (5, 4));
        assert!(cfg("0000").leftmost_particle().is_err());
        assert!(cfg("111").rightmost_empty().is_err());
    }

    #[test]
    fn event_a_examples() {
        assert!(in_event_a(&top_state(8, 2).unwrap()));
        assert!(!in_event_a(&ground_state(8, 2).unwrap()));
        assert!(in_event_a(&cfg("01000000")));
        assert!(!in_event_a(&cfg("00100000")));
    }

    #[test]
    fn height_examples() {
        let r = |a: i64, b: i64| Rational64::new(a, b);
        assert_eq!(height(&top_state(4, 2).unwrap()).0, vec![r(1, 2), r(1, 1), r(1, 2)]);
        assert_eq!(height(&ground_state(4, 2).unwrap()).0, vec![r(-1, 2), r(-1, 1), r(-1, 2)]);
    }

    #[test]
    fn height_increments() {
        let space = StateSpace::new(7, 3).unwrap();
        let lo = Rational64::new(-3, 7);
        let hi = Rational64::new(4, 7);
        for s in space.states() {
            let h = height(&s).0;
            for w in h.windows(2) {
                let d = w[1] - w[0];
                assert!(d == lo || d == hi);
            }
        }
    }

    #[test]
    fn enumeration_order_and_rank() {
        let s = enumerate_states(3, 1).unwrap();
        let lits: Vec<String> = s.iter().map(|c| c.to_string()).collect();
        assert_eq!(lits, vec!["100", "010", "001"]);
        assert_eq!(enumerate_states(4, 2).unwrap().len(), 6);
        let space = StateSpace::new(8, 4).unwrap();
        assert_eq!(space.len(), 70);
        for i in 0..space.len() {
            assert_eq!(space.index_of(&space.state(i)).unwrap(), i);
        }
        assert!(matches!(StateSpace::with_cap(20, 10, 1000), Err(SepError::CapExceeded { .. })));
    }

    #[test]
    fn partial_order_axioms_on_omega_6_3() {
        let states = enumerate_states(6, 3).unwrap();
        for a in &states {
            assert!(leq(a, a).unwrap());
            for b in &states {
                if leq(a, b).unwrap() && leq(b, a).unwrap() {
                    assert_eq!(a, b);
                }
                for c in &states {
                    if leq(a, b).unwrap() && leq(b, c).unwrap() {
                        assert!(leq(a, c).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn extremal_states_are_unique_extrema() {
        for n in 2..=8 {
            for k in 1..n {
                let states = enumerate_states(n, k).unwrap();
                let g = ground_state(n, k).unwrap();
                let t = top_state(n, k).unwrap();
                for s in &states {
                    assert!(leq(&g, s).unwrap() && leq(s, &t).unwrap());
                }
                let minima: Vec<_> =
                    states.iter().filter(|a| states.iter().all(|b| !leq(b, a).unwrap() || b == *a)).collect();
                assert_eq!(minima, vec![&g]);
                let maxima: Vec<_> =
                    states.iter().filter(|a| states.iter().all(|b| !leq(a, b).unwrap() || b == *a)).collect();
                assert_eq!(maxima, vec![&t]);
            }
        }
    }

    #[test]
    fn height_is_order_embedding_on_omega_6_3() {
        let states = enumerate_states(6, 3).unwrap();
        for a in &states {
            let ha = height(a);
            for b in &states {
                let hb = height(b);
                assert_eq!(leq(a, b).unwrap(), ha.dominated_by(&hb));
                assert_eq!(ha == hb, a == b);
            }
        }
    }

    #[test]
    fn covers_generate_order() {
        let space = StateSpace::new(6, 3).unwrap();
        for i in 0..space.len() {
            for j in space.upper_covers(i) {
                assert!(space.leq_index(i, j));
                assert!(space.height_sum(j) == space.height_sum(i) + 1);
            }
        }
    }

    #[test]
    fn literal_round_trip() {
        assert_eq!(cfg("0011").to_string(), "0011");
        assert!("01a1".parse::<Configuration>().is_err());
        assert!("".parse::<Configuration>().is_err());
    }
}
