use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::plant::PlantParams;
use crate::strategy::RATE_LIMITS;

/// Default control interval, s.
pub const DEFAULT_DT_CTRL: f64 = 600.0;
/// Default prediction horizon, s.
pub const DEFAULT_HORIZON: f64 = 86_400.0;

/// Decision values shared by `repeat` consecutive control intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlBlock {
    pub repeat: usize,
    /// Signed injection command, kg/s.
    pub q: f64,
    /// Turbine ramp rate, %NP/min, when the strategy optimizes it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_turb: Option<f64>,
}

/// Piecewise-constant injection (and optionally turbine-rate) schedule.
///
/// Control intervals are aligned to the `dt_ctrl` grid: the first interval
/// runs from `t0` to the next grid boundary (a full interval when `t0` is on
/// the grid), every later one spans exactly `dt_ctrl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPlan {
    pub t0: f64,
    pub dt_ctrl: f64,
    pub blocks: Vec<ControlBlock>,
    pub horizon: f64,
}

/// Move-blocking pattern: `fine` single-interval blocks, then block lengths
/// doubling from 2 until `intervals` are covered (the last block truncated).
pub fn blocking_pattern(intervals: usize, fine: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut covered = 0;
    let mut len = 1;
    while covered < intervals {
        if out.len() >= fine {
            len *= 2;
        }
        let take = len.min(intervals - covered);
        out.push(take);
        covered += take;
    }
    out
}

impl ControlPlan {
    /// Number of control intervals needed to cover `horizon`.
    pub fn interval_count(horizon: f64, dt_ctrl: f64) -> usize {
        (horizon / dt_ctrl - 1e-9).ceil().max(0.0) as usize
    }

    /// Plan holding `q` (and `r_turb`) over the whole horizon, blocked with
    /// `fine` leading single intervals.
    pub fn constant(t0: f64, dt_ctrl: f64, horizon: f64, fine: usize, q: f64, r_turb: Option<f64>) -> Self {
        let n = Self::interval_count(horizon, dt_ctrl);
        let blocks = blocking_pattern(n, fine)
            .into_iter()
            .map(|repeat| ControlBlock { repeat, q, r_turb })
            .collect();
        ControlPlan {
            t0,
            dt_ctrl,
            blocks,
            horizon,
        }
    }

    pub fn intervals(&self) -> usize {
        self.blocks.iter().map(|b| b.repeat).sum()
    }

    /// Start of interval `k` (`k == intervals()` gives the plan end).
    pub fn boundary(&self, k: usize) -> f64 {
        ControlPlan::boundary_of(self.t0, self.dt_ctrl, k)
    }

    pub fn end(&self) -> f64 {
        self.boundary(self.intervals())
    }

    /// Per-interval (q, r_turb) values.
    pub fn expand(&self) -> Vec<(f64, Option<f64>)> {
        self.blocks
            .iter()
            .flat_map(|b| std::iter::repeat((b.q, b.r_turb)).take(b.repeat))
            .collect()
    }

    /// Index of the interval in force at `t` (clamped to the plan).
    pub fn interval_at(&self, t: f64) -> usize {
        let n = self.intervals();
        if n == 0 || t < self.boundary(1) - 1e-9 {
            return 0;
        }
        let k = ((t + 1e-9) / self.dt_ctrl).floor() - (self.t0 / self.dt_ctrl + 1e-9).floor();
        (k.max(0.0) as usize).min(n - 1)
    }

    /// Block value in force at `t`; the last block holds beyond the end.
    pub fn value_at(&self, t: f64) -> (f64, Option<f64>) {
        let k = self.interval_at(t);
        let mut acc = 0;
        for b in &self.blocks {
            acc += b.repeat;
            if k < acc {
                return (b.q, b.r_turb);
            }
        }
        self.blocks.last().map(|b| (b.q, b.r_turb)).unwrap_or((0.0, None))
    }

    /// Check the plan invariants against the plant limits.
    pub fn validate(&self, params: &PlantParams) -> Result<(), EngineError> {
        if !(self.dt_ctrl > 0.0 && self.dt_ctrl.is_finite()) {
            return Err(EngineError::InvalidPlan("dt_ctrl must be > 0".into()));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(EngineError::InvalidPlan("horizon must be >= 0".into()));
        }
        if (self.intervals() as f64) * self.dt_ctrl < self.horizon - 1e-9 {
            return Err(EngineError::InvalidPlan("blocks do not cover the horizon".into()));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.repeat == 0 {
                return Err(EngineError::InvalidPlan(format!("blocks[{i}].repeat must be >= 1")));
            }
            if !(b.q >= -params.w_bor_max && b.q <= params.w_dil_max) {
                return Err(EngineError::InvalidPlan(format!(
                    "blocks[{i}].q = {} outside [-{}, {}]",
                    b.q, params.w_bor_max, params.w_dil_max
                )));
            }
            if let Some(r) = b.r_turb {
                if !(RATE_LIMITS[0]..=RATE_LIMITS[1]).contains(&r) {
                    return Err(EngineError::InvalidPlan(format!(
                        "blocks[{i}].r_turb = {r} outside [{}, {}]",
                        RATE_LIMITS[0], RATE_LIMITS[1]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Re-express this plan on a new interval grid starting at `t0`: each new
    /// block takes the mean of the old per-interval values it spans, with the
    /// old plan's last value held past its end.
    pub fn shifted(&self, t0: f64, pattern: &[usize]) -> ControlPlan {
        let mut target = ControlPlan {
            t0,
            dt_ctrl: self.dt_ctrl,
            blocks: pattern
                .iter()
                .map(|&repeat| ControlBlock {
                    repeat,
                    q: 0.0,
                    r_turb: None,
                })
                .collect(),
            horizon: self.horizon,
        };
        let mut k = 0;
        for b in target.blocks.iter_mut() {
            let (mut sq, mut sr, mut nr) = (0.0, 0.0, 0);
            for _ in 0..b.repeat {
                let mid = 0.5 * (ControlPlan::boundary_of(t0, self.dt_ctrl, k) + ControlPlan::boundary_of(t0, self.dt_ctrl, k + 1));
                let (q, r) = self.value_at(mid);
                sq += q;
                if let Some(r) = r {
                    sr += r;
                    nr += 1;
                }
                k += 1;
            }
            b.q = sq / b.repeat as f64;
            b.r_turb = (nr > 0).then(|| sr / nr as f64);
        }
        target
    }

    fn boundary_of(t0: f64, dt: f64, k: usize) -> f64 {
        if k == 0 {
            t0
        } else {
            ((t0 / dt + 1e-9).floor() + k as f64) * dt
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_blocking_covers_a_day() {
        let n = ControlPlan::interval_count(DEFAULT_HORIZON, DEFAULT_DT_CTRL);
        assert_eq!(n, 144);
        let pat = blocking_pattern(n, 6);
        assert_eq!(&pat[..7], &[1, 1, 1, 1, 1, 1, 2]);
        assert_eq!(pat.iter().sum::<usize>(), 144);
        assert!(pat.len() <= 16);
    }

    #[test]
    fn boundaries_follow_the_grid() {
        let plan = ControlPlan::constant(1250.0, 600.0, 3600.0, 6, 0.0, None);
        assert_eq!(plan.boundary(0), 1250.0);
        assert_eq!(plan.boundary(1), 1800.0);
        assert_eq!(plan.boundary(2), 2400.0);
        assert_eq!(plan.interval_at(1300.0), 0);
        assert_eq!(plan.interval_at(1800.0), 1);
        let aligned = ControlPlan::constant(1200.0, 600.0, 3600.0, 6, 0.0, None);
        assert_eq!(aligned.boundary(1), 1800.0);
        assert_eq!(aligned.end(), 1200.0 + 3600.0);
    }

    #[test]
    fn shift_drops_elapsed_intervals() {
        let mut plan = ControlPlan::constant(0.0, 600.0, 6000.0, 10, 0.0, None);
        for (i, b) in plan.blocks.iter_mut().enumerate() {
            b.q = i as f64;
        }
        let shifted = plan.shifted(600.0, &blocking_pattern(10, 10));
        let qs: Vec<f64> = shifted.blocks.iter().map(|b| b.q).collect();
        assert_eq!(qs, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 9.0]);
    }

    #[test]
    fn validation() {
        let p = PlantParams::boc();
        let mut plan = ControlPlan::constant(0.0, 600.0, 3600.0, 6, 11.0, None);
        assert!(plan.validate(&p).is_err());
        plan = ControlPlan::constant(0.0, 600.0, 3600.0, 6, -3.0, Some(0.05));
        assert!(plan.validate(&p).is_err());
        assert!(ControlPlan::constant(0.0, 600.0, 3600.0, 6, -3.0, Some(2.0)).validate(&p).is_ok());
    }
}
