//! Prune-grow schedule and the cosine-annealed prune fraction.

use super::DstError;
use crate::Real;

/// When and how aggressively connections are rewired: every `period` steps
/// until `t_end`, pruning a cosine-annealed fraction starting at `alpha` and
/// sampling `ceil(gamma * |A|)` candidate connections per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneGrowSchedule {
    pub period: usize,
    pub t_end: usize,
    pub alpha: Real,
    pub gamma: Real,
}

impl PruneGrowSchedule {
    pub fn validate(&self) -> Result<(), DstError> {
        if self.period < 1 {
            return Err(DstError::InvalidSchedule("period must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(DstError::InvalidSchedule(format!(
                "alpha {} outside (0, 1)",
                self.alpha
            )));
        }
        if !(self.gamma > 0.0) {
            return Err(DstError::InvalidSchedule(format!(
                "gamma {} must be > 0",
                self.gamma
            )));
        }
        if self.t_end < self.period {
            return Err(DstError::InvalidSchedule(format!(
                "t_end {} before the first round at {}",
                self.t_end, self.period
            )));
        }
        Ok(())
    }

    /// Whether step `t` runs a prune-grow round.
    pub fn is_round_step(&self, t: usize) -> bool {
        t >= 1 && t % self.period == 0 && t <= self.t_end
    }

    /// Candidate draw count for a layer with `active` connections.
    pub fn candidate_count(&self, active: usize) -> usize {
        (self.gamma * active as Real).ceil() as usize
    }
}

/// Prune fraction at step `t`: `alpha/2 * (1 + cos(pi * t / t_end))`, exactly
/// `alpha` at 0 and exactly 0 at `t_end`. Past `t_end` the schedule has
/// expired and callers skip the round.
pub fn cosine_decay(t: usize, alpha: Real, t_end: usize) -> Option<Real> {
    if t > t_end {
        return None;
    }
    if t == t_end {
        return Some(0.0);
    }
    let phase = std::f64::consts::PI * t as f64 / t_end as f64;
    Some(alpha / 2.0 * (1.0 + phase.cos() as Real))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_are_exact() {
        assert_eq!(cosine_decay(0, 0.3, 1000), Some(0.3));
        assert_eq!(cosine_decay(1000, 0.3, 1000), Some(0.0));
    }

    #[test]
    fn midpoint_is_half_alpha() {
        let mid = cosine_decay(500, 0.3, 1000).unwrap();
        assert!((mid - 0.15).abs() < 1e-12);
    }

    #[test]
    fn expired_schedule_returns_none() {
        assert_eq!(cosine_decay(1001, 0.3, 1000), None);
    }

    #[test]
    fn nonincreasing_over_the_whole_range() {
        let mut prev = Real::INFINITY;
        for t in 0..=997 {
            let a = cosine_decay(t, 0.2, 997).unwrap();
            assert!(a <= prev + 1e-15, "increased at t={t}");
            prev = a;
        }
    }

    #[test]
    fn round_steps_respect_period_and_t_end() {
        let s = PruneGrowSchedule {
            period: 100,
            t_end: 300,
            alpha: 0.2,
            gamma: 1.0,
        };
        s.validate().unwrap();
        assert!(!s.is_round_step(0));
        assert!(s.is_round_step(100));
        assert!(!s.is_round_step(150));
        assert!(s.is_round_step(300));
        assert!(!s.is_round_step(400));
    }

    #[test]
    fn bad_schedules_are_rejected() {
        let base = PruneGrowSchedule {
            period: 10,
            t_end: 100,
            alpha: 0.2,
            gamma: 1.0,
        };
        for (field, bad) in [
            ("alpha", PruneGrowSchedule { alpha: 0.0, ..base.clone() }),
            ("alpha", PruneGrowSchedule { alpha: 1.0, ..base.clone() }),
            ("gamma", PruneGrowSchedule { gamma: 0.0, ..base.clone() }),
            ("period", PruneGrowSchedule { period: 0, ..base.clone() }),
            ("t_end", PruneGrowSchedule { t_end: 5, ..base.clone() }),
        ] {
            assert!(bad.validate().is_err(), "{field} should be rejected");
        }
    }
}
