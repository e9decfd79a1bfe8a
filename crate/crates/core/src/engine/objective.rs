use serde::{Deserialize, Serialize};

use super::plan::ControlPlan;
use super::predict::Trajectory;
use crate::plant::{equilibrium_imbalances, PlantParams, PowerProfile};
use crate::strategy::{constraint_envelope, StrategySpec};

/// Time-dependent references the objective compares against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    /// Equilibrium (iodine, xenon) axial imbalances at the final scheduled
    /// power with the AO on its reference.
    pub terminal_imbalance: (f64, f64),
    /// Turbine schedule used for the tracking term.
    pub profile: PowerProfile,
    /// Turbine demand held before the first scheduled segment.
    pub p_start: f64,
}

impl Reference {
    pub fn new(strategy: &StrategySpec, profile: &PowerProfile, p_start: f64, params: &PlantParams) -> Self {
        let final_power = profile.final_power(p_start);
        Reference {
            terminal_imbalance: equilibrium_imbalances(final_power, strategy.ao_ref, params),
            profile: profile.clone(),
            p_start,
        }
    }

    /// Power the tracking term pulls toward during an interval starting at `t`.
    pub fn tracking_power(&self, t: f64) -> f64 {
        self.profile.target_at(t, self.p_start)
    }
}

/// Per-constraint residuals; all zero when the plan is feasible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Violations {
    /// `max(0, |AO_dev| - bound(n))` per trajectory sample after the first.
    pub ao: Vec<f64>,
    /// `max(0, |T_dev| - T_dev_max)` per trajectory sample after the first.
    pub t_dev: Vec<f64>,
    /// Box residuals of each block's injection (and rate, if any).
    pub boxes: Vec<f64>,
}

impl Violations {
    pub fn max(&self) -> f64 {
        self.ao.iter().chain(&self.t_dev).chain(&self.boxes).fold(0.0, |m, &v| m.max(v))
    }
}

/// Breakdown of the objective by term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostTerms {
    pub ao: f64,
    pub effort: f64,
    pub effluent: f64,
    pub tracking: f64,
    /// Axial imbalance error: the running share over the horizon plus the
    /// full weight at its end.
    pub terminal: f64,
}

impl CostTerms {
    pub fn total(&self) -> f64 {
        self.ao + self.effort + self.effluent + self.tracking + self.terminal
    }
}

/// Stage cost of one control interval ending in `ao_dev`, `p_turb`.
#[inline]
pub(crate) fn stage_terms(
    strategy: &StrategySpec,
    ao_dev: f64,
    q: f64,
    dt: f64,
    p_turb: f64,
    p_track: f64,
) -> [f64; 4] {
    let w = &strategy.weights;
    [
        w.w_ao * ao_dev * ao_dev,
        w.w_u * q * q,
        w.w_eff * q.abs() * dt,
        w.w_track * (p_turb - p_track) * (p_turb - p_track),
    ]
}

/// Share of the imbalance weight `w_t` spread over the horizon as a running
/// cost, in addition to the full weight at the horizon end. A pure terminal
/// penalty lets every receding-horizon replan postpone the convergence to
/// its own horizon end.
pub const RUNNING_IMBALANCE_SHARE: f64 = 1.0;

#[inline]
pub(crate) fn terminal_term(strategy: &StrategySpec, d_i: f64, d_x: f64, reference: &Reference) -> f64 {
    let (ei, ex) = reference.terminal_imbalance;
    strategy.weights.w_t * ((d_i - ei).powi(2) + (d_x - ex).powi(2))
}

/// Weight fraction of the running imbalance cost for an interval of length
/// `dt` within a horizon of length `horizon`.
#[inline]
pub(crate) fn running_imbalance_fraction(dt: f64, horizon: f64) -> f64 {
    RUNNING_IMBALANCE_SHARE * dt / horizon
}

/// Evaluate a predicted trajectory against a strategy.
///
/// Stage terms are sampled at each control-interval end; the AO envelope and
/// the coolant temperature limit are checked at every prediction sample after
/// the initial one.
pub fn objective_eval(
    traj: &Trajectory,
    plan: &ControlPlan,
    strategy: &StrategySpec,
    reference: &Reference,
    params: &PlantParams,
) -> (f64, Violations) {
    let (terms, violations) = objective_terms(traj, plan, strategy, reference, params);
    (terms.total(), violations)
}

/// [`objective_eval`] with the cost split by term.
pub fn objective_terms(
    traj: &Trajectory,
    plan: &ControlPlan,
    strategy: &StrategySpec,
    reference: &Reference,
    params: &PlantParams,
) -> (CostTerms, Violations) {
    let mut terms = CostTerms::default();
    for (k, ((q, _), &end)) in plan.expand().iter().zip(&traj.interval_ends).enumerate() {
        let s = &traj.samples[end];
        let dt = plan.boundary(k + 1) - plan.boundary(k);
        let [a, u, e, tr] = stage_terms(
            strategy,
            s.ao - strategy.ao_ref,
            *q,
            dt,
            s.p_turb,
            reference.tracking_power(plan.boundary(k)),
        );
        terms.ao += a;
        terms.effort += u;
        terms.effluent += e;
        terms.tracking += tr;
        let frac = running_imbalance_fraction(dt, plan.end() - plan.boundary(0));
        terms.terminal += frac * terminal_term(strategy, s.iodine_imbalance(), s.xenon_imbalance(), reference);
    }
    if !traj.interval_ends.is_empty() {
        let last = traj.last();
        terms.terminal += terminal_term(strategy, last.iodine_imbalance(), last.xenon_imbalance(), reference);
    }

    let ao = traj
        .samples
        .iter()
        .skip(1)
        .map(|s| ((s.ao - strategy.ao_ref).abs() - constraint_envelope(strategy, s.n)).max(0.0))
        .collect();
    let t_dev = traj
        .samples
        .iter()
        .skip(1)
        .map(|s| (s.t_dev.abs() - params.t_dev_max).max(0.0))
        .collect();
    let mut boxes = Vec::new();
    for b in &plan.blocks {
        boxes.push((b.q - params.w_dil_max).max(-params.w_bor_max - b.q).max(0.0));
        if let Some(r) = b.r_turb {
            let [lo, hi] = strategy.rate_bounds;
            boxes.push((r - hi).max(lo - r).max(0.0));
        }
    }
    (terms, Violations { ao, t_dev, boxes })
}
