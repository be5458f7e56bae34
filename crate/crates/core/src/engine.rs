//! Deterministic discrete-event core.
//!
//! The engine owns a virtual clock and a priority queue of pending events.
//! Events are ordered by `(fire_at, seq)` where `seq` is the insertion
//! counter, so two events scheduled for the same instant always run in the
//! order they were scheduled.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Simulated time in integer microseconds since the start of the run.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_millis_f64(self) -> f64 {
        self.0 as f64 / 1_000.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1_000_000.0
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }

    pub fn saturating_mul(self, k: u64) -> SimTime {
        SimTime(self.0.saturating_mul(k))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("cannot schedule at {at}: clock is already at {now}")]
    PastTime { at: SimTime, now: SimTime },
    #[error("bad range: lo {lo} > hi {hi}")]
    BadRange { lo: SimTime, hi: SimTime },
}

/// Identifies a scheduled event by its insertion counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventHandle(u64);

impl EventHandle {
    pub fn seq(self) -> u64 {
        self.0
    }
}

struct Scheduled<E> {
    fire_at: SimTime,
    seq: u64,
    action: E,
}

impl<E> PartialEq for Scheduled<E> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}

impl<E> Eq for Scheduled<E> {}

impl<E> PartialOrd for Scheduled<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Scheduled<E> {
    // BinaryHeap is a max-heap; invert so the earliest (fire_at, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_at
            .cmp(&self.fire_at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Event queue plus virtual clock. `E` is the action payload handed back to
/// the caller's handler when the event fires.
pub struct Engine<E> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Scheduled<E>>,
}

impl<E> Default for Engine<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Engine<E> {
    pub fn new() -> Self {
        Self {
            now: SimTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn schedule(&mut self, fire_at: SimTime, action: E) -> Result<EventHandle, EngineError> {
        if fire_at < self.now {
            return Err(EngineError::PastTime {
                at: fire_at,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Scheduled {
            fire_at,
            seq,
            action,
        });
        Ok(EventHandle(seq))
    }

    /// Schedules `action` at `now + delay`. Never fails.
    pub fn schedule_in(&mut self, delay: SimTime, action: E) -> EventHandle {
        let at = self.now + delay;
        self.schedule(at, action)
            .expect("now + delay cannot be in the past")
    }

    /// Pops the next event due at or before `t_end`, advancing the clock to it.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<(SimTime, E)> {
        match self.queue.peek() {
            Some(ev) if ev.fire_at <= t_end => {
                let ev = self.queue.pop().expect("peeked");
                self.now = ev.fire_at;
                Some((ev.fire_at, ev.action))
            }
            _ => None,
        }
    }

    /// Runs every event with `fire_at <= t_end` in `(fire_at, seq)` order.
    /// Handlers may schedule further events, including at the current
    /// instant; those run within the same call. Leaves the clock at `t_end`.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> u64
    where
        F: FnMut(&mut Engine<E>, E),
    {
        let mut executed = 0;
        while let Some((_, action)) = self.pop_until(t_end) {
            handler(self, action);
            executed += 1;
        }
        if t_end > self.now {
            self.now = t_end;
        }
        executed
    }
}

/// The single source of randomness for a scenario run.
#[derive(Debug, Clone)]
pub struct SimRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw over the closed interval `[lo, hi]`.
    pub fn uniform(&mut self, lo: SimTime, hi: SimTime) -> Result<SimTime, EngineError> {
        if lo > hi {
            return Err(EngineError::BadRange { lo, hi });
        }
        Ok(SimTime(self.inner.random_range(lo.0..=hi.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_time_event_runs_first() {
        let mut eng = Engine::new();
        eng.schedule(SimTime::from_micros(10), "late").unwrap();
        eng.schedule(SimTime::ZERO, "first").unwrap();
        let mut order = vec![];
        eng.run_until(SimTime::from_secs(1), |_, a| order.push(a));
        assert_eq!(order, vec!["first", "late"]);
    }

    #[test]
    fn equal_time_ties_break_by_insertion() {
        let mut eng = Engine::new();
        let t = SimTime::from_micros(5_000);
        eng.schedule(t, 'A').unwrap();
        eng.schedule(t, 'B').unwrap();
        let mut order = vec![];
        eng.run_until(t, |_, a| order.push(a));
        assert_eq!(order, vec!['A', 'B']);
    }

    #[test]
    fn scheduling_in_the_past_fails() {
        let mut eng: Engine<()> = Engine::new();
        eng.run_until(SimTime::from_micros(10), |_, _| {});
        let err = eng.schedule(SimTime::from_micros(3), ()).unwrap_err();
        assert_eq!(
            err,
            EngineError::PastTime {
                at: SimTime::from_micros(3),
                now: SimTime::from_micros(10)
            }
        );
    }

    #[test]
    fn empty_run_advances_clock() {
        let mut eng: Engine<()> = Engine::new();
        let n = eng.run_until(SimTime::from_secs(14), |_, _| {});
        assert_eq!(n, 0);
        assert_eq!(eng.now(), SimTime::from_secs(14));
    }

    #[test]
    fn run_until_is_inclusive() {
        let mut eng = Engine::new();
        for s in 1..=3 {
            eng.schedule(SimTime::from_secs(s), s).unwrap();
        }
        let n = eng.run_until(SimTime::from_secs(2), |_, _| {});
        assert_eq!(n, 2);
        assert_eq!(eng.now(), SimTime::from_secs(2));
        assert_eq!(eng.pending(), 1);
    }

    #[test]
    fn self_scheduled_event_runs_in_same_call() {
        let mut eng = Engine::new();
        eng.schedule(SimTime::from_micros(7), 0u32).unwrap();
        let mut seen = vec![];
        let n = eng.run_until(SimTime::from_micros(7), |e, a| {
            seen.push(a);
            if a == 0 {
                let now = e.now();
                e.schedule(now, 1).unwrap();
            }
        });
        assert_eq!(n, 2);
        assert_eq!(seen, vec![0, 1]);
    }

    #[test]
    fn degenerate_uniform() {
        let mut rng = SimRng::new(3);
        let x = SimTime::from_millis(1500);
        assert_eq!(rng.uniform(x, x).unwrap(), x);
    }

    #[test]
    fn uniform_rejects_inverted_range() {
        let mut rng = SimRng::new(3);
        let err = rng
            .uniform(SimTime::from_secs(3), SimTime::from_secs(1))
            .unwrap_err();
        assert!(matches!(err, EngineError::BadRange { .. }));
    }

    #[test]
    fn uniform_mean_matches_midpoint() {
        // Analytic mean of U[1 s, 3 s] is 2 s.
        let mut rng = SimRng::new(99);
        let (lo, hi) = (SimTime::from_secs(1), SimTime::from_secs(3));
        let n = 100_000;
        let sum: f64 = (0..n)
            .map(|_| rng.uniform(lo, hi).unwrap().as_secs_f64())
            .sum();
        let mean = sum / n as f64;
        assert!((mean - 2.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn same_seed_same_draws() {
        let (lo, hi) = (SimTime::from_secs(1), SimTime::from_secs(3));
        let mut a = SimRng::new(42);
        let mut b = SimRng::new(42);
        for _ in 0..1000 {
            assert_eq!(a.uniform(lo, hi).unwrap(), b.uniform(lo, hi).unwrap());
        }
    }

    proptest! {
        #[test]
        fn execution_is_totally_ordered(times in proptest::collection::vec(0u64..50, 1..200)) {
            let mut eng = Engine::new();
            for (i, t) in times.iter().enumerate() {
                eng.schedule(SimTime::from_micros(*t), i).unwrap();
            }
            let mut fired = vec![];
            let mut last_clock = SimTime::ZERO;
            eng.run_until(SimTime::from_micros(100), |e, i| {
                assert!(e.now() >= last_clock);
                last_clock = e.now();
                fired.push((times[i], i));
            });
            let mut expected = fired.clone();
            expected.sort();
            prop_assert_eq!(fired, expected);
        }

        #[test]
        fn uniform_stays_in_range(seed: u64, lo in 0u64..1_000_000, width in 0u64..1_000_000) {
            let mut rng = SimRng::new(seed);
            let (lo, hi) = (SimTime::from_micros(lo), SimTime::from_micros(lo + width));
            for _ in 0..32 {
                let x = rng.uniform(lo, hi).unwrap();
                prop_assert!(lo <= x && x <= hi);
            }
        }
    }
}
