use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::plant::{node_powers, poison_rates, refresh_algebraic, CoreState, CvcsQueue, PlantParams};

/// Longest single integration step of the estimator, s.
const MAX_SUBSTEP: f64 = 60.0;

/// One plant measurement. Iodine and xenon are not measurable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredSample {
    pub t: f64,
    pub n: f64,
    pub ao: f64,
    pub c_b: f64,
    pub z: f64,
    pub t_dev: f64,
    /// Turbine demand (known to the operator).
    pub p_turb: f64,
    /// Metered cumulative effluent, kg.
    pub m_eff: f64,
}

impl MeasuredSample {
    pub fn from_state(s: &CoreState) -> Self {
        MeasuredSample {
            t: s.t,
            n: s.n,
            ao: s.ao,
            c_b: s.c_b,
            z: s.z,
            t_dev: s.t_dev,
            p_turb: s.p_turb,
            m_eff: s.m_eff,
        }
    }
}

/// Twin-model observer: propagates the node iodine/xenon equations driven
/// by node powers reconstructed from measured power and axial offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimator {
    poisons: [f64; 4],
    last: MeasuredSample,
}

impl Estimator {
    /// Start from a sample taken at equilibrium.
    pub fn new(first: MeasuredSample, params: &PlantParams) -> Self {
        let (p_t, p_b) = node_powers(first.n, first.ao);
        Estimator {
            poisons: [p_t, p_b, params.xenon_eq(p_t), params.xenon_eq(p_b)],
            last: first,
        }
    }

    /// Start from a known full state.
    pub fn from_state(state: &CoreState) -> Self {
        Estimator {
            poisons: [state.i_t, state.i_b, state.x_t, state.x_b],
            last: MeasuredSample::from_state(state),
        }
    }

    pub fn last(&self) -> &MeasuredSample {
        &self.last
    }

    /// Integrate up to `sample.t` with node powers interpolated linearly
    /// between the previous and the new measurement. Samples not later than
    /// the last one are ignored.
    pub fn push(&mut self, sample: MeasuredSample, params: &PlantParams) {
        let gap = sample.t - self.last.t;
        if !(gap > 0.0) {
            return;
        }
        let (a_t, a_b) = node_powers(self.last.n, self.last.ao);
        let (b_t, b_b) = node_powers(sample.n, sample.ao);
        let flux = |f: f64| (a_t + f * (b_t - a_t), a_b + f * (b_b - a_b));
        let rates = |y: &[f64; 4], f: f64| {
            let (p_t, p_b) = flux(f);
            let (di_t, dx_t) = poison_rates(y[0], y[2], p_t, params);
            let (di_b, dx_b) = poison_rates(y[1], y[3], p_b, params);
            [di_t, di_b, dx_t, dx_b]
        };
        let m = (gap / MAX_SUBSTEP).ceil().max(1.0) as usize;
        let h = gap / m as f64;
        let mut y = self.poisons;
        for j in 0..m {
            let f0 = j as f64 / m as f64;
            let fm = (j as f64 + 0.5) / m as f64;
            let f1 = (j + 1) as f64 / m as f64;
            let k1 = rates(&y, f0);
            let y2 = std::array::from_fn(|c| y[c] + 0.5 * h * k1[c]);
            let k2 = rates(&y2, fm);
            let y3 = std::array::from_fn(|c| y[c] + 0.5 * h * k2[c]);
            let k3 = rates(&y3, fm);
            let y4 = std::array::from_fn(|c| y[c] + h * k3[c]);
            let k4 = rates(&y4, f1);
            for c in 0..4 {
                y[c] = (y[c] + h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c])).max(0.0);
            }
        }
        self.poisons = y;
        self.last = sample;
    }

    /// Current state estimate: estimated poisons, measured fields from the
    /// latest sample, and the caller's CVCS command log.
    pub fn state(&self, cvcs: CvcsQueue) -> CoreState {
        let s = &self.last;
        let [i_t, i_b, x_t, x_b] = self.poisons;
        CoreState {
            t: s.t,
            i_t,
            i_b,
            x_t,
            x_b,
            c_b: s.c_b,
            z: s.z,
            t_dev: s.t_dev,
            n: s.n,
            ao: s.ao,
            p_turb: s.p_turb,
            m_eff: s.m_eff,
            cvcs,
        }
    }

    /// State estimate with `n` and AO recomputed from the estimate, so the
    /// predicted trajectory starts on the model's own algebraic manifold.
    pub fn consistent_state(&self, cvcs: CvcsQueue, params: &PlantParams) -> CoreState {
        let mut s = self.state(cvcs);
        refresh_algebraic(&mut s, params);
        s
    }
}

/// Estimate the full state from a measured history that starts at an
/// equilibrium. The CVCS delay line is returned empty.
pub fn estimate_state(history: &[MeasuredSample], params: &PlantParams) -> Result<CoreState, EngineError> {
    let (first, rest) = history.split_first().ok_or(EngineError::EmptyHistory)?;
    let mut est = Estimator::new(*first, params);
    for s in rest {
        est.push(*s, params);
    }
    Ok(est.state(CvcsQueue::default()))
}
