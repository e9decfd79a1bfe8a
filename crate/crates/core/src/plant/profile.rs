use serde::{Deserialize, Serialize};

use crate::error::EngineError;

/// Segment starts must sit on this grid so that every supported integration
/// step (1, 10, 60 s) sees ramp changes exactly at a step boundary.
pub const PROFILE_GRID_S: f64 = 60.0;

/// One scheduled turbine power change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSegment {
    /// Time at which the ramp starts, s.
    pub start: f64,
    /// Target power, %NP.
    pub target: f64,
    /// Ramp rate, %NP/min.
    pub rate: f64,
}

/// Scheduled turbine power profile: piecewise-linear ramps between holds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerProfile {
    pub segments: Vec<ProfileSegment>,
}

/// Move `from` toward `to` by at most `max_delta`.
pub fn move_toward(from: f64, to: f64, max_delta: f64) -> f64 {
    if (to - from).abs() <= max_delta {
        to
    } else if to > from {
        from + max_delta
    } else {
        from - max_delta
    }
}

impl PowerProfile {
    pub fn new(segments: Vec<ProfileSegment>) -> Self {
        Self { segments }
    }

    /// A profile with no scheduled changes.
    pub fn flat() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let mut prev: Option<f64> = None;
        for (i, seg) in self.segments.iter().enumerate() {
            if !seg.start.is_finite() || seg.start < 0.0 {
                return Err(EngineError::InvalidProfile(format!(
                    "segments[{i}].start must be >= 0"
                )));
            }
            if (seg.start / PROFILE_GRID_S).fract().abs() > 1e-9 {
                return Err(EngineError::InvalidProfile(format!(
                    "segments[{i}].start must be a multiple of {PROFILE_GRID_S} s"
                )));
            }
            if let Some(p) = prev {
                if seg.start <= p {
                    return Err(EngineError::InvalidProfile(format!(
                        "segments[{i}].start must be strictly increasing"
                    )));
                }
            }
            if !(15.0..=100.0).contains(&seg.target) {
                return Err(EngineError::InvalidProfile(format!(
                    "segments[{i}].target {} outside [15, 100] %NP",
                    seg.target
                )));
            }
            if !(seg.rate.is_finite() && seg.rate > 0.0) {
                return Err(EngineError::InvalidProfile(format!(
                    "segments[{i}].rate must be > 0"
                )));
            }
            prev = Some(seg.start);
        }
        Ok(())
    }

    /// Index of the segment in force at `t`, if any.
    pub fn active_index(&self, t: f64) -> Option<usize> {
        self.segments.iter().rposition(|s| s.start <= t + 1e-9)
    }

    /// Normalized target power in force at `t` (the last scheduled target, or
    /// `p_start` before the first segment).
    pub fn target_at(&self, t: f64, p_start: f64) -> f64 {
        self.active_index(t)
            .map(|i| self.segments[i].target / 100.0)
            .unwrap_or(p_start)
    }

    /// Ramp rate of the segment in force at `t`, %NP/min (0 before the first).
    pub fn rate_at(&self, t: f64) -> f64 {
        self.active_index(t).map(|i| self.segments[i].rate).unwrap_or(0.0)
    }

    /// Final scheduled power, normalized.
    pub fn final_power(&self, p_start: f64) -> f64 {
        self.segments
            .last()
            .map(|s| s.target / 100.0)
            .unwrap_or(p_start)
    }

    /// Turbine power demand at `t`, normalized, starting from `p_start`
    /// before the first segment. Each segment ramps from the power reached so
    /// far toward its target at its rate, then holds.
    pub fn eval(&self, t: f64, p_start: f64) -> f64 {
        let mut p = p_start;
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.start >= t {
                break;
            }
            let end = self
                .segments
                .get(i + 1)
                .map(|s| s.start.min(t))
                .unwrap_or(t);
            p = move_toward(p, seg.target / 100.0, seg.rate / 6000.0 * (end - seg.start));
        }
        p
    }
}

/// Free-function form of [`PowerProfile::eval`].
pub fn turbine_profile_eval(profile: &PowerProfile, t: f64, p_prev: f64) -> f64 {
    profile.eval(t, p_prev)
}
