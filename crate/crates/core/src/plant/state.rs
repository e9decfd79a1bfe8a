use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// Pure transport delay between the CVCS injection command and the flow
/// reaching the primary coolant.
///
/// Commands are stored only when they change. A command entered at `t` acts
/// from `t + tau_d`; the delay is quantized to the integration step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CvcsQueue {
    /// Flow currently reaching the core, kg/s (signed).
    pub active: f64,
    /// Commands still in transit: (flow kg/s, entry time s).
    pub pending: VecDeque<(f64, f64)>,
}

impl CvcsQueue {
    /// Enter command `q` at time `t` and return the flow acting during the
    /// step that starts at `t`.
    pub fn advance(&mut self, t: f64, q: f64, tau_d: f64) -> f64 {
        let last = self.pending.back().map(|&(v, _)| v).unwrap_or(self.active);
        if last != q {
            self.pending.push_back((q, t));
        }
        while let Some(&(v, entered)) = self.pending.front() {
            if entered + tau_d <= t + 1e-6 {
                self.active = v;
                self.pending.pop_front();
            } else {
                break;
            }
        }
        self.active
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty() && self.active == 0.0
    }
}

/// Full dynamic state of the simulated plant.
///
/// Concentrations are normalized to their full-power equilibrium values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreState {
    /// Simulation time, s.
    pub t: f64,
    pub i_t: f64,
    pub i_b: f64,
    pub x_t: f64,
    pub x_b: f64,
    /// Boron concentration, ppm.
    pub c_b: f64,
    /// Rod bank position, steps withdrawn.
    pub z: f64,
    /// Average coolant temperature deviation from program, degC.
    pub t_dev: f64,
    /// Normalized core power (algebraic).
    pub n: f64,
    /// Axial offset, % (algebraic).
    pub ao: f64,
    /// Normalized turbine power demand.
    pub p_turb: f64,
    /// Cumulative effluent, kg.
    pub m_eff: f64,
    pub cvcs: CvcsQueue,
}

impl CoreState {
    /// Iodine axial imbalance `i_t - i_b`.
    pub fn iodine_imbalance(&self) -> f64 {
        self.i_t - self.i_b
    }

    /// Xenon axial imbalance `x_t - x_b`.
    pub fn xenon_imbalance(&self) -> f64 {
        self.x_t - self.x_b
    }

    pub fn mean_xenon(&self) -> f64 {
        0.5 * (self.x_t + self.x_b)
    }

    /// Node powers (top, bottom).
    pub fn node_powers(&self) -> (f64, f64) {
        node_powers(self.n, self.ao)
    }

    /// Differential state components in a fixed order, for drift and
    /// accuracy comparisons.
    pub fn components(&self) -> [(&'static str, f64); 10] {
        [
            ("i_t", self.i_t),
            ("i_b", self.i_b),
            ("x_t", self.x_t),
            ("x_b", self.x_b),
            ("C_B", self.c_b),
            ("z", self.z),
            ("T_dev", self.t_dev),
            ("m_eff", self.m_eff),
            ("n", self.n),
            ("AO", self.ao),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|(_, v)| v.is_finite()) && self.p_turb.is_finite()
    }
}

/// Node powers from core power and axial offset.
pub fn node_powers(n: f64, ao: f64) -> (f64, f64) {
    (n * (1.0 + ao / 100.0), n * (1.0 - ao / 100.0))
}

/// Inputs held constant over one integration step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    /// Signed injection command, kg/s: positive dilutes, negative borates.
    pub q: f64,
    /// Turbine ramp rate, %NP/min.
    pub r_turb: f64,
    /// Normalized power the turbine ramps toward.
    pub p_target: f64,
}

impl ControlInput {
    /// Turbine held at `p` with injection command `q`.
    pub fn hold(q: f64, p: f64) -> Self {
        Self { q, r_turb: 0.0, p_target: p }
    }

    /// Dilution flow, kg/s (0 when borating).
    pub fn dilution(&self) -> f64 {
        self.q.max(0.0)
    }

    /// Boration flow, kg/s (0 when diluting).
    pub fn boration(&self) -> f64 {
        (-self.q).max(0.0)
    }
}
