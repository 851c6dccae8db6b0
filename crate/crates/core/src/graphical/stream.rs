//! Seeded per-site Poisson clocks with coin and uniform marks.

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{Result, SepError};
use crate::seed;

/// Total clock rate per site.
pub const CLOCK_RATE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coin {
    Head,
    Tail,
}

/// One ring of a site clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub site: i64,
    pub coin: Coin,
    /// Uniform mark on `[0, 1)`.
    pub u: f64,
}

/// Shared randomness for the canonical coupling.
///
/// The stream is a description, not a buffer: every iteration regenerates
/// the events from `(seed, site)`, so any number of trajectories can be
/// driven by the same realization and extending the horizon or the site
/// window never changes the events already present.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventStream {
    seed: u64,
    horizon: f64,
    first: i64,
    last: i64,
}

impl EventStream {
    /// Clocks on sites `first..=last` up to time `horizon`.
    pub fn new(first: i64, last: i64, horizon: f64, seed: u64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(SepError::InvalidParameter(format!("horizon {horizon} must be positive")));
        }
        if last < first {
            return Err(SepError::InvalidParameter(format!("empty site range [{first}, {last}]")));
        }
        Ok(EventStream { seed, horizon, first, last })
    }

    /// Clocks on sites `1..=n`.
    pub fn segment(n: usize, horizon: f64, seed: u64) -> Result<Self> {
        Self::new(1, n as i64, horizon, seed)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn first_site(&self) -> i64 {
        self.first
    }

    pub fn last_site(&self) -> i64 {
        self.last
    }

    /// Same realization with a different horizon.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        Self::new(self.first, self.last, horizon, self.seed)
    }

    pub fn covers(&self, first: i64, last: i64) -> bool {
        self.first <= first && last <= self.last
    }

    pub(crate) fn check_cover(&self, first: i64, last: i64) -> Result<()> {
        if self.covers(first, last) {
            Ok(())
        } else {
            Err(SepError::StreamCoverage { first, last })
        }
    }

    pub(crate) fn check_time(&self, t: f64) -> Result<()> {
        if t > self.horizon {
            Err(SepError::HorizonExceeded { requested: t, horizon: self.horizon })
        } else {
            Ok(())
        }
    }

    /// Events of a single site, in time order.
    pub fn site_events(&self, site: i64) -> SiteClock {
        SiteClock::new(self.seed, site, self.horizon)
    }

    /// All events on the stream's site range, merged in time order.
    pub fn events(&self) -> MergedEvents {
        MergedEvents::new(self, self.first, self.last)
    }

    /// Merged events restricted to `first..=last`.
    pub fn events_in(&self, first: i64, last: i64) -> Result<MergedEvents> {
        self.check_cover(first, last)?;
        Ok(MergedEvents::new(self, first, last))
    }
}

/// Iterator over one site's rings.
#[derive(Debug, Clone)]
pub struct SiteClock {
    rng: ChaCha8Rng,
    site: i64,
    time: f64,
    horizon: f64,
}

impl SiteClock {
    fn new(seed: u64, site: i64, horizon: f64) -> Self {
        SiteClock { rng: seed::child_rng(seed, site as u64), site, time: 0.0, horizon }
    }
}

impl Iterator for SiteClock {
    type Item = Event;

    #[inline]
    fn next(&mut self) -> Option<Event> {
        if self.time > self.horizon {
            return None;
        }
        let gap: f64 = self.rng.sample(Exp1);
        self.time += gap / CLOCK_RATE;
        // One draw supplies both marks: the top bit is the coin, the low 53
        // bits the uniform.
        let bits = self.rng.next_u64();
        let coin = if bits >> 63 == 1 { Coin::Head } else { Coin::Tail };
        let u = (bits & ((1 << 53) - 1)) as f64 * (1.0 / (1u64 << 53) as f64);
        if self.time > self.horizon {
            self.time = f64::INFINITY;
            return None;
        }
        Some(Event { time: self.time, site: self.site, coin, u })
    }
}

/// Time span merged per block, in units of the per-site mean gap.
const BLOCK_SPAN: f64 = 2.0;

/// Events of several sites merged in time order; ties go to the lower site.
///
/// Events are produced block by block: every clock is advanced to the end
/// of the block, its rings are dropped into fine time buckets holding about
/// one event each, and the buckets are sorted and concatenated. This costs
/// O(1) per event instead of a heap update.
#[derive(Debug, Clone)]
pub struct MergedEvents {
    clocks: Vec<SiteClock>,
    pending: Vec<Option<Event>>,
    buckets: Vec<Vec<Event>>,
    buf: Vec<Event>,
    pos: usize,
    block_end: f64,
    width: f64,
    live: usize,
}

impl MergedEvents {
    fn new(stream: &EventStream, first: i64, last: i64) -> Self {
        let mut clocks: Vec<SiteClock> = (first..=last).map(|s| stream.site_events(s)).collect();
        let pending: Vec<Option<Event>> = clocks.iter_mut().map(|c| c.next()).collect();
        let live = pending.iter().filter(|e| e.is_some()).count();
        let width = BLOCK_SPAN / CLOCK_RATE;
        let nb = (BLOCK_SPAN as usize * clocks.len()).max(1);
        MergedEvents {
            clocks,
            pending,
            buckets: vec![Vec::new(); nb],
            buf: Vec::new(),
            pos: 0,
            block_end: 0.0,
            width,
            live,
        }
    }

    fn refill(&mut self) {
        self.buf.clear();
        self.pos = 0;
        while self.buf.is_empty() && self.live > 0 {
            let start = self.block_end;
            self.block_end += self.width;
            let scale = self.buckets.len() as f64 / self.width;
            let last = self.buckets.len() - 1;
            for (slot, clock) in self.clocks.iter_mut().enumerate() {
                while let Some(e) = self.pending[slot] {
                    if e.time >= self.block_end {
                        break;
                    }
                    let b = (((e.time - start) * scale) as usize).min(last);
                    self.buckets[b].push(e);
                    self.pending[slot] = clock.next();
                    if self.pending[slot].is_none() {
                        self.live -= 1;
                    }
                }
            }
            for bucket in &mut self.buckets {
                if bucket.len() > 1 {
                    // Slots are visited in site order, so a stable sort on
                    // time keeps ties in site order.
                    bucket.sort_by(|a, b| a.time.total_cmp(&b.time));
                }
                self.buf.append(bucket);
            }
        }
    }
}

impl Iterator for MergedEvents {
    type Item = Event;

    #[inline]
    fn next(&mut self) -> Option<Event> {
        if self.pos == self.buf.len() {
            self.refill();
            if self.buf.is_empty() {
                return None;
            }
        }
        let ev = self.buf[self.pos];
        self.pos += 1;
        Some(ev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let s = EventStream::segment(10, 5.0, 42).unwrap();
        let a: Vec<Event> = s.events().collect();
        let b: Vec<Event> = s.events().collect();
        assert_eq!(a, b);
        let other: Vec<Event> = EventStream::segment(10, 5.0, 43).unwrap().events().collect();
        assert_ne!(a, other);
    }

    #[test]
    fn merged_is_time_ordered_and_complete() {
        let s = EventStream::new(-3, 6, 20.0, 1).unwrap();
        let merged: Vec<Event> = s.events().collect();
        assert!(merged.windows(2).all(|w| w[0].time <= w[1].time));
        let per_site: usize = (-3..=6).map(|x| s.site_events(x).count()).sum();
        assert_eq!(merged.len(), per_site);
        assert!(merged.iter().all(|e| e.time <= 20.0));
    }

    #[test]
    fn merge_matches_sorted_site_clocks() {
        for (first, last, horizon) in [(1, 1, 7.3), (-4, 9, 25.0), (1, 300, 3.7)] {
            let s = EventStream::new(first, last, horizon, 77).unwrap();
            let mut reference: Vec<Event> = (first..=last).flat_map(|x| s.site_events(x)).collect();
            reference.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.site.cmp(&b.site)));
            assert_eq!(s.events().collect::<Vec<_>>(), reference);
        }
    }

    #[test]
    fn horizon_extension_keeps_prefix() {
        let s = EventStream::segment(4, 3.0, 9).unwrap();
        let long = s.with_horizon(9.0).unwrap();
        let short: Vec<Event> = s.events().collect();
        let prefix: Vec<Event> = long.events().take_while(|e| e.time <= 3.0).collect();
        assert_eq!(short, prefix);
    }

    #[test]
    fn window_extension_keeps_site_events() {
        let narrow = EventStream::new(1, 5, 10.0, 4).unwrap();
        let wide = EventStream::new(-10, 20, 10.0, 4).unwrap();
        let a: Vec<Event> = narrow.events().collect();
        let b: Vec<Event> = wide.events_in(1, 5).unwrap().collect();
        assert_eq!(a, b);
        assert!(narrow.events_in(0, 5).is_err());
    }

    #[test]
    fn rejects_bad_horizon() {
        assert!(EventStream::segment(3, 0.0, 1).is_err());
        assert!(EventStream::segment(3, -1.0, 1).is_err());
    }

    #[test]
    fn poisson_count_and_fair_coin() {
        let s = EventStream::segment(100, 50.0, 2024).unwrap();
        let evs: Vec<Event> = s.events().collect();
        let n = evs.len() as f64;
        assert!((n - 10_000.0).abs() <= 4.0 * 10_000f64.sqrt(), "count {n}");
        let big = EventStream::segment(100, 500.0, 7).unwrap();
        let heads = big.events().take(100_000).filter(|e| e.coin == Coin::Head).count() as f64;
        let sigma = (100_000.0f64 * 0.25).sqrt();
        assert!((heads - 50_000.0).abs() <= 3.0 * sigma, "heads {heads}");
    }
}
