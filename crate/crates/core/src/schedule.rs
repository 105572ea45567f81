//! Drift-driven dynamic budget.
//!
//! After a drift detected at `t_drift` the budget is raised to `b_high` until
//! `t1`, lowered to `b_low` until `t2 = t_drift + ΔT`, and is `b` otherwise.
//! The switch time `t1` is chosen so that the labels spent over the
//! adjustment span equal `b·ΔT`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lengths `(t1 - t_drift, t2 - t1)` of the high and low phases.
pub fn phase_lengths(b: f64, b_high: f64, b_low: f64, delta_t: f64) -> Result<(f64, f64)> {
    if !(b_low < b && b < b_high) {
        return Err(Error::DegenerateSchedule { b, b_high, b_low });
    }
    let span = b_high - b_low;
    Ok((delta_t * (b - b_low) / span, delta_t * (b_high - b) / span))
}

/// Switch times `(t1, t2)` for a drift at `t_drift`.
pub fn schedule_times(b: f64, b_high: f64, b_low: f64, delta_t: f64, t_drift: f64) -> Result<(f64, f64)> {
    let (high, low) = phase_lengths(b, b_high, b_low, delta_t)?;
    let t1 = t_drift + high;
    Ok((t1, t1 + low))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub m_high: f64,
    pub m_low: f64,
    pub delta_t: f64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self {
            m_high: 4.0,
            m_low: 0.5,
            delta_t: 1000.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BudgetSchedule {
    pub b: f64,
    pub b_high: f64,
    pub b_low: f64,
    pub delta_t: f64,
    /// Latest detected drift, `None` before the first one.
    pub t_drift: Option<f64>,
    pub t1: f64,
    pub t2: f64,
}

impl BudgetSchedule {
    pub fn new(b: f64, b_high: f64, b_low: f64, delta_t: f64) -> Result<Self> {
        if !(b > 0.0 && b <= 1.0) {
            return Err(Error::InvalidConfig(format!("budget {b} outside (0, 1]")));
        }
        if !(b_low > 0.0 && b_high <= 1.0) {
            return Err(Error::DegenerateSchedule { b, b_high, b_low });
        }
        if !(delta_t > 0.0) {
            return Err(Error::InvalidConfig(format!("adjustment span {delta_t} must be positive")));
        }
        schedule_times(b, b_high, b_low, delta_t, 0.0)?;
        Ok(Self {
            b,
            b_high,
            b_low,
            delta_t,
            t_drift: None,
            t1: f64::INFINITY,
            t2: f64::INFINITY,
        })
    }

    /// Levels `b·m_high` (capped at 1) and `b·m_low`.
    pub fn from_multipliers(b: f64, params: &ScheduleParams) -> Result<Self> {
        Self::new(b, (b * params.m_high).min(1.0), b * params.m_low, params.delta_t)
    }

    /// Re-anchors the schedule at a new drift; an adjustment already in
    /// progress restarts from `t`.
    pub fn on_drift(&mut self, t: u64) {
        let t = t as f64;
        let (t1, t2) = schedule_times(self.b, self.b_high, self.b_low, self.delta_t, t)
            .expect("levels validated at construction");
        self.t_drift = Some(t);
        self.t1 = t1;
        self.t2 = t2;
    }

    /// Budget at integer step `t`, with intervals `[t_drift, t1)` and `[t1, t2)`.
    pub fn budget_at(&self, t: u64) -> f64 {
        let Some(t_drift) = self.t_drift else {
            return self.b;
        };
        let t = t as f64;
        if t >= t_drift && t < self.t1 {
            self.b_high
        } else if t >= self.t1 && t < self.t2 {
            self.b_low
        } else {
            self.b
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn third_split_for_doubling_levels() {
        let (t1, t2) = schedule_times(0.1, 0.2, 0.05, 900.0, 0.0).unwrap();
        assert!((t1 - 300.0).abs() < 1e-9);
        assert!((t2 - t1 - 600.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_levels_rejected() {
        assert!(schedule_times(0.1, 0.1, 0.1, 1000.0, 0.0).is_err());
        assert!(schedule_times(0.1, 0.3, 0.2, 1000.0, 0.0).is_err());
        assert!(BudgetSchedule::new(0.1, 0.4, 0.0, 1000.0).is_err());
        assert!(BudgetSchedule::from_multipliers(1.0, &ScheduleParams::default()).is_err());
    }

    #[test]
    fn no_drift_means_nominal() {
        let s = BudgetSchedule::from_multipliers(0.05, &ScheduleParams::default()).unwrap();
        assert!((0..5000).all(|t| s.budget_at(t) == 0.05));
    }

    #[test]
    fn restart_on_second_drift() {
        let mut s = BudgetSchedule::from_multipliers(0.05, &ScheduleParams::default()).unwrap();
        s.on_drift(2000);
        s.on_drift(2500);
        assert_eq!(s.t_drift, Some(2500.0));
        assert!((s.t1 - (2500.0 + 1000.0 / 7.0)).abs() < 1e-9);
        assert_eq!(s.budget_at(2501), s.b_high);
        assert_eq!(s.budget_at(3499), s.b_low);
        assert_eq!(s.budget_at(3500), 0.05);
    }

    #[test]
    fn two_discontinuities_per_episode() {
        let mut s = BudgetSchedule::from_multipliers(0.1, &ScheduleParams::default()).unwrap();
        s.on_drift(100);
        let values: Vec<f64> = (0..2000).map(|t| s.budget_at(t)).collect();
        let jumps = values.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(jumps, 3); // b -> b_high at the drift, then the two switch times
        let after: Vec<f64> = (100..2000).map(|t| s.budget_at(t)).collect();
        assert_eq!(after.windows(2).filter(|w| w[0] != w[1]).count(), 2);
    }

    #[test]
    fn high_level_capped_at_one() {
        let s = BudgetSchedule::from_multipliers(0.5, &ScheduleParams::default()).unwrap();
        assert_eq!(s.b_high, 1.0);
        assert_eq!(s.b_low, 0.25);
    }
}
