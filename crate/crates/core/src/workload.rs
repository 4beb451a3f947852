//! Flash-crowd workload: exponentially decaying arrivals per time slot and
//! uniformly distributed peer lifetimes.

use crate::error::{Error, Result};
use crate::overlay::PeerId;
use crate::sim::{Engine, SimTime};

#[derive(Clone, Debug, PartialEq)]
pub struct WorkloadConfig {
    pub slot_length: SimTime,
    /// Arrivals in the first slot.
    pub amplitude: u32,
    pub decay: f64,
    /// Slots with arrivals; later slots are empty.
    pub active_slots: u32,
    pub lifetime_min: SimTime,
    pub lifetime_max: SimTime,
    /// Keeps the initial seed (join index 0) for the whole run.
    pub seed_peer_immortal: bool,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            slot_length: SimTime::from_minutes(10),
            amplitude: 1000,
            decay: 0.7,
            active_slots: 4,
            lifetime_min: SimTime::from_minutes(10),
            lifetime_max: SimTime::from_minutes(20),
            seed_peer_immortal: true,
        }
    }
}

/// One peer of the generated schedule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Arrival {
    pub peer: PeerId,
    pub join: SimTime,
    /// `None` for a peer that stays until the end of the run.
    pub leave: Option<SimTime>,
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.amplitude == 0 {
            return Err(Error::Config("amplitude must be positive".into()));
        }
        if !(self.decay > 0.0 && self.decay.is_finite()) {
            return Err(Error::Config(format!("decay must be positive, got {}", self.decay)));
        }
        if self.lifetime_min > self.lifetime_max {
            return Err(Error::Config("lifetime_min exceeds lifetime_max".into()));
        }
        if self.slot_length == SimTime::ZERO {
            return Err(Error::Config("slot_length must be positive".into()));
        }
        Ok(())
    }

    /// Number of peers joining during slot `i` (1-based).
    pub fn arrivals_for_slot(&self, i: u32) -> Result<u32> {
        if i < 1 {
            return Err(Error::Config("slots are numbered from 1".into()));
        }
        if i > self.active_slots {
            return Ok(0);
        }
        // Rounded up: 1000, 497, 247, 123 for the default flash crowd.
        let n = self.amplitude as f64 * (-self.decay * (i - 1) as f64).exp();
        Ok(n.ceil() as u32)
    }

    /// `count` sorted instants drawn uniformly within slot `i`.
    pub fn sample_arrival_times(&self, engine: &mut Engine, slot: u32, count: u32) -> Result<Vec<SimTime>> {
        if slot < 1 {
            return Err(Error::Config("slots are numbered from 1".into()));
        }
        let len = self.slot_length.as_millis();
        let start = len * (slot as u64 - 1);
        let mut times = (0..count)
            .map(|_| engine.uniform_range(start, start + len).map(SimTime::from_millis))
            .collect::<Result<Vec<_>>>()?;
        times.sort_unstable();
        Ok(times)
    }

    /// Uniform lifetime in `[lifetime_min, lifetime_max]`.
    pub fn sample_lifetime(&self, engine: &mut Engine) -> Result<SimTime> {
        let lo = self.lifetime_min.as_millis();
        let hi = self.lifetime_max.as_millis();
        Ok(SimTime::from_millis(engine.uniform_range(lo, hi + 1)?))
    }

    /// The full join/leave plan in join order; index 0 is the initial seed
    /// present at time zero.
    pub fn build_schedule(&self, engine: &mut Engine) -> Result<Vec<Arrival>> {
        self.validate()?;
        let mut plan = vec![Arrival {
            peer: PeerId(0),
            join: SimTime::ZERO,
            leave: None,
        }];
        if !self.seed_peer_immortal {
            plan[0].leave = Some(self.sample_lifetime(engine)?);
        }
        for slot in 1..=self.active_slots {
            let count = self.arrivals_for_slot(slot)?;
            for join in self.sample_arrival_times(engine, slot, count)? {
                let leave = join + self.sample_lifetime(engine)?;
                plan.push(Arrival {
                    peer: PeerId(plan.len() as u32),
                    join,
                    leave: Some(leave),
                });
            }
        }
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::RunSeed;

    #[test]
    fn slot_counts_match_flash_crowd() {
        let w = WorkloadConfig::default();
        let counts: Vec<u32> = (1..=5).map(|i| w.arrivals_for_slot(i).unwrap()).collect();
        assert_eq!(counts, vec![1000, 497, 247, 123, 0]);
        assert!(w.arrivals_for_slot(0).is_err());
    }

    #[test]
    fn arrival_times_fall_in_slot() {
        let w = WorkloadConfig::default();
        let mut e = Engine::new(RunSeed(1));
        let t = w.sample_arrival_times(&mut e, 1, 3).unwrap();
        assert_eq!(t.len(), 3);
        assert!(t.windows(2).all(|p| p[0] <= p[1]));
        assert!(t.iter().all(|&x| x < SimTime::from_minutes(10)));
        assert!(w.sample_arrival_times(&mut e, 1, 0).unwrap().is_empty());
    }

    #[test]
    fn arrival_mean_is_slot_midpoint() {
        let w = WorkloadConfig::default();
        let mut e = Engine::new(RunSeed(11));
        let t = w.sample_arrival_times(&mut e, 2, 10_000).unwrap();
        let mean = t.iter().map(|x| x.as_minutes()).sum::<f64>() / t.len() as f64;
        assert!((mean - 15.0).abs() < 0.2, "mean {mean}");
        assert!(t.iter().all(|&x| x >= SimTime::from_minutes(10) && x < SimTime::from_minutes(20)));
    }

    #[test]
    fn lifetimes_are_uniform_between_bounds() {
        let w = WorkloadConfig::default();
        let mut e = Engine::new(RunSeed(12));
        let samples: Vec<f64> = (0..10_000)
            .map(|_| w.sample_lifetime(&mut e).unwrap().as_minutes())
            .collect();
        assert!(samples.iter().all(|&x| (10.0..=20.0).contains(&x)));
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        assert!((mean - 15.0).abs() < 0.2, "mean {mean}");
    }

    #[test]
    fn degenerate_lifetime_is_constant() {
        let w = WorkloadConfig {
            lifetime_min: SimTime::from_minutes(12),
            lifetime_max: SimTime::from_minutes(12),
            ..WorkloadConfig::default()
        };
        let mut e = Engine::new(RunSeed(1));
        for _ in 0..10 {
            assert_eq!(w.sample_lifetime(&mut e).unwrap(), SimTime::from_minutes(12));
        }
    }

    #[test]
    fn default_schedule_shape() {
        let w = WorkloadConfig::default();
        let mut e = Engine::new(RunSeed(7));
        let plan = w.build_schedule(&mut e).unwrap();
        assert_eq!(plan.len(), 1868);
        assert_eq!(plan[0].join, SimTime::ZERO);
        assert_eq!(plan[0].leave, None);
        assert!(plan.iter().enumerate().all(|(i, a)| a.peer.index() == i));
        assert!(plan.windows(2).all(|p| p[0].join <= p[1].join));
        let last_join = plan.iter().map(|a| a.join).max().unwrap();
        assert!(last_join < SimTime::from_minutes(40));
        let last_leave = plan.iter().filter_map(|a| a.leave).max().unwrap();
        assert!(last_leave < SimTime::from_minutes(60));
        for a in &plan[1..] {
            let life = a.leave.unwrap() - a.join;
            assert!(life >= SimTime::from_minutes(10) && life <= SimTime::from_minutes(20));
        }
    }

    #[test]
    fn arrivals_outpace_departures_early() {
        let w = WorkloadConfig::default();
        let mut e = Engine::new(RunSeed(8));
        let plan = w.build_schedule(&mut e).unwrap();
        let slot = |t: SimTime| (t.as_millis() / w.slot_length.as_millis()) as usize;
        let mut joins = [0i64; 7];
        let mut leaves = [0i64; 7];
        for a in &plan {
            joins[slot(a.join)] += 1;
            if let Some(l) = a.leave {
                leaves[slot(l)] += 1;
            }
        }
        // Slot 2 is close to balanced (497 joins against ~500 expected
        // departures), so the growth phase is checked cumulatively.
        assert!(joins[0] > leaves[0]);
        assert!(joins[0] + joins[1] > leaves[0] + leaves[1]);
        for s in 2..6 {
            assert!(joins[s] < leaves[s], "slot {} joins {} leaves {}", s + 1, joins[s], leaves[s]);
        }
    }

    #[test]
    fn schedule_is_reproducible() {
        let w = WorkloadConfig::default();
        let a = w.build_schedule(&mut Engine::new(RunSeed(99))).unwrap();
        let b = w.build_schedule(&mut Engine::new(RunSeed(99))).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = WorkloadConfig {
            lifetime_min: SimTime::from_minutes(30),
            ..WorkloadConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = WorkloadConfig {
            decay: 0.0,
            ..WorkloadConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
