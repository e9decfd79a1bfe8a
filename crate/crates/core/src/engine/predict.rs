use serde::{Deserialize, Serialize};

use super::plan::ControlPlan;
use crate::error::PlantError;
use crate::plant::{step, ControlInput, CoreState, PlantParams, PowerProfile};

/// Integration step of the prediction model, s.
pub const PREDICTION_STEP: f64 = 60.0;

/// Predicted plant trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// States at every prediction step; the first is the initial state.
    pub samples: Vec<CoreState>,
    /// For each control interval, the index of the sample at its end.
    pub interval_ends: Vec<usize>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn ao_dev(&self, ao_ref: f64) -> Vec<f64> {
        self.samples.iter().map(|s| s.ao - ao_ref).collect()
    }

    pub fn effluent(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.m_eff).collect()
    }

    /// Axial iodine imbalance `i_t - i_b` per sample.
    pub fn iodine_imbalance(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.iodine_imbalance()).collect()
    }

    /// Axial xenon imbalance `x_t - x_b` per sample.
    pub fn xenon_imbalance(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.xenon_imbalance()).collect()
    }

    pub fn last(&self) -> &CoreState {
        self.samples.last().expect("a trajectory always holds its initial state")
    }

    /// Uniform-stride subsample with at most `max_points` samples; the last
    /// sample is always kept.
    pub fn decimated(&self, max_points: usize) -> Trajectory {
        let n = self.samples.len();
        if n <= max_points || max_points < 2 {
            return self.clone();
        }
        let stride = (n - 1).div_ceil(max_points - 1);
        let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
        if *idx.last().unwrap() != n - 1 {
            idx.push(n - 1);
        }
        let samples = idx.iter().map(|&i| self.samples[i].clone()).collect();
        let interval_ends = self
            .interval_ends
            .iter()
            .map(|&e| idx.partition_point(|&i| i < e).min(idx.len() - 1))
            .collect();
        Trajectory { samples, interval_ends }
    }
}

/// Step lengths from `t_a` to `t_b` such that every step ends on a multiple
/// of `h` (or at `t_b`).
pub(crate) fn step_ends(t_a: f64, t_b: f64, h: f64) -> impl Iterator<Item = f64> {
    let mut t = t_a;
    std::iter::from_fn(move || {
        if t >= t_b - 1e-9 {
            return None;
        }
        let grid = ((t + 1e-9) / h).floor() * h + h;
        let end = if grid > t_b - 1e-9 { t_b } else { grid };
        t = end;
        Some(end)
    })
}

/// Plant input during a step starting at `t`.
pub fn input_at(
    t: f64,
    q: f64,
    r_turb: Option<f64>,
    profile: &PowerProfile,
    p_start: f64,
) -> ControlInput {
    ControlInput {
        q,
        r_turb: r_turb.unwrap_or_else(|| profile.rate_at(t)),
        p_target: profile.target_at(t, p_start),
    }
}

/// Advance `state` to exactly `end` in one step.
pub fn step_to(
    state: &CoreState,
    input: &ControlInput,
    end: f64,
    params: &PlantParams,
) -> Result<CoreState, PlantError> {
    let mut next = step(state, input, end - state.t, params)?;
    next.t = end;
    Ok(next)
}

/// Predict the plant under `plan` at the default prediction step.
///
/// The turbine follows `profile` (targets and, unless the plan carries its
/// own rates, ramp rates); before the first segment it holds the initial
/// turbine demand.
pub fn predict(
    init: &CoreState,
    plan: &ControlPlan,
    profile: &PowerProfile,
    params: &PlantParams,
) -> Result<Trajectory, PlantError> {
    predict_with_step(init, plan, profile, params, PREDICTION_STEP)
}

/// [`predict`] with an explicit integration step.
pub fn predict_with_step(
    init: &CoreState,
    plan: &ControlPlan,
    profile: &PowerProfile,
    params: &PlantParams,
    h: f64,
) -> Result<Trajectory, PlantError> {
    let p_start = init.p_turb;
    let mut samples = vec![init.clone()];
    let mut interval_ends = Vec::with_capacity(plan.intervals());
    let mut state = init.clone();
    for (k, (q, r)) in plan.expand().into_iter().enumerate() {
        for end in step_ends(plan.boundary(k), plan.boundary(k + 1), h) {
            let input = input_at(state.t, q, r, profile, p_start);
            state = step_to(&state, &input, end, params)?;
            samples.push(state.clone());
        }
        interval_ends.push(samples.len() - 1);
    }
    Ok(Trajectory { samples, interval_ends })
}
