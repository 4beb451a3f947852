//! Deterministic discrete-event engine.
//!
//! The engine owns the virtual clock, the pending-event queue and the single
//! random stream of a run. Events are processed in `(time, seq)` order, where
//! `seq` is assigned at scheduling time, so two runs that schedule the same
//! events with the same seed replay identically.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::ops::{Add, Sub};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::overlay::PeerId;

const MILLIS_PER_MINUTE: u64 = 60_000;

/// Simulated time, stored as whole milliseconds of simulated time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms)
    }

    pub const fn from_minutes(min: u64) -> Self {
        SimTime(min * MILLIS_PER_MINUTE)
    }

    /// Converts fractional minutes, rounding to the nearest millisecond.
    /// Negative and non-finite inputs are rejected.
    pub fn from_minutes_f64(min: f64) -> Result<Self> {
        if !min.is_finite() || min < 0.0 {
            return Err(Error::InvalidTime(min));
        }
        Ok(SimTime((min * MILLIS_PER_MINUTE as f64).round() as u64))
    }

    pub const fn as_millis(self) -> u64 {
        self.0
    }

    pub fn as_minutes(self) -> f64 {
        self.0 as f64 / MILLIS_PER_MINUTE as f64
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

/// Minutes, printed without a trailing fraction when integral (`10`, `12.5`).
impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_multiple_of(MILLIS_PER_MINUTE) {
            write!(f, "{}", self.0 / MILLIS_PER_MINUTE)
        } else {
            write!(f, "{}", self.as_minutes())
        }
    }
}

/// Seed of one simulation run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RunSeed(pub u64);

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    PeerJoin(PeerId),
    PeerLeave(PeerId),
    TrackerReannounce(PeerId),
    Heartbeat(PeerId),
    Snapshot(u32),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    pub time: SimTime,
    pub seq: u64,
    pub kind: EventKind,
}

#[derive(PartialEq, Eq)]
struct QueueEntry(Event);

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.0.time, self.0.seq).cmp(&(other.0.time, other.0.seq))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

pub struct Engine {
    clock: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Reverse<QueueEntry>>,
    rng: ChaCha8Rng,
}

impl Engine {
    pub fn new(seed: RunSeed) -> Self {
        Engine {
            clock: SimTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed.0),
        }
    }

    pub fn now(&self) -> SimTime {
        self.clock
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Queues `kind` at `time` and returns the assigned sequence number.
    pub fn schedule(&mut self, time: SimTime, kind: EventKind) -> Result<u64> {
        if time < self.clock {
            return Err(Error::ScheduleInPast {
                at: time,
                now: self.clock,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(QueueEntry(Event { time, seq, kind })));
        Ok(seq)
    }

    /// Pops the next event due at or before `t_end`, advancing the clock to it.
    pub fn next_event(&mut self, t_end: SimTime) -> Option<Event> {
        match self.queue.peek() {
            Some(Reverse(QueueEntry(ev))) if ev.time <= t_end => {}
            _ => return None,
        }
        let Reverse(QueueEntry(ev)) = self.queue.pop()?;
        self.clock = ev.time;
        Some(ev)
    }

    /// Moves the clock forward to `t_end` once the caller has drained events.
    pub fn advance_to(&mut self, t_end: SimTime) -> Result<()> {
        if t_end < self.clock {
            return Err(Error::ScheduleInPast {
                at: t_end,
                now: self.clock,
            });
        }
        self.clock = t_end;
        Ok(())
    }

    /// Processes every event with `time <= t_end` and leaves the clock at `t_end`.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> Result<()>
    where
        F: FnMut(&mut Engine, Event) -> Result<()>,
    {
        if t_end < self.clock {
            return Err(Error::ScheduleInPast {
                at: t_end,
                now: self.clock,
            });
        }
        while let Some(ev) = self.next_event(t_end) {
            handler(self, ev)?;
        }
        self.advance_to(t_end)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform integer in `[low, high)`.
    pub fn uniform_range(&mut self, low: u64, high: u64) -> Result<u64> {
        if low >= high {
            return Err(Error::EmptyRange);
        }
        Ok(self.rng.gen_range(low..high))
    }

    /// Uniform index into a collection of `len` items.
    pub fn uniform_index(&mut self, len: usize) -> Result<usize> {
        if len == 0 {
            return Err(Error::EmptyRange);
        }
        Ok(self.rng.gen_range(0..len))
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.rng);
    }

    /// `amount` distinct indices drawn uniformly from `0..len`, in draw order.
    pub fn sample_indices(&mut self, len: usize, amount: usize) -> Vec<usize> {
        rand::seq::index::sample(&mut self.rng, len, amount.min(len)).into_vec()
    }
}
