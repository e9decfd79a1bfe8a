use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use crate::engine::{input_at, step_to, Advisor, ControlPlan, Engine, MeasuredSample, RecommendationRow, SolveDiagnostics};
use crate::error::ScenarioError;
use crate::plant::{equilibrium_imbalances, CoreState};

/// Convergence threshold on both axial imbalances (normalized units).
pub const CONVERGENCE_EPS: f64 = 0.01;

/// One recorded plant sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub p_turb: f64,
    pub n: f64,
    pub t_dev: f64,
    pub ao: f64,
    pub ao_dev: f64,
    pub c_b: f64,
    pub z: f64,
    /// Injection command in force from this sample on, kg/s.
    pub q: f64,
    pub m_eff: f64,
    pub i_t: f64,
    pub i_b: f64,
    pub x_t: f64,
    pub x_b: f64,
    pub d_i: f64,
    pub d_x: f64,
}

impl Sample {
    pub fn from_state(s: &CoreState, ao_ref: f64, q: f64) -> Self {
        Sample {
            t: s.t,
            p_turb: s.p_turb,
            n: s.n,
            t_dev: s.t_dev,
            ao: s.ao,
            ao_dev: s.ao - ao_ref,
            c_b: s.c_b,
            z: s.z,
            q,
            m_eff: s.m_eff,
            i_t: s.i_t,
            i_b: s.i_b,
            x_t: s.x_t,
            x_b: s.x_b,
            d_i: s.iodine_imbalance(),
            d_x: s.xenon_imbalance(),
        }
    }
}

/// What the engine recommended at one replan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationSnapshot {
    pub issued_at: f64,
    pub current_row: RecommendationRow,
    pub next_row: RecommendationRow,
    pub plan: ControlPlan,
    pub diagnostics: SolveDiagnostics,
}

/// Summary statistics of solver wall time over a run, s.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WallTimeStats {
    pub solves: usize,
    pub mean_s: f64,
    pub max_s: f64,
    pub total_s: f64,
}

impl WallTimeStats {
    pub fn from_snapshots(snapshots: &[RecommendationSnapshot]) -> Self {
        let times: Vec<f64> = snapshots.iter().map(|s| s.diagnostics.wall_time_s).collect();
        let total: f64 = times.iter().sum();
        WallTimeStats {
            solves: times.len(),
            mean_s: if times.is_empty() { 0.0 } else { total / times.len() as f64 },
            max_s: times.iter().fold(0.0, |m, &t| m.max(t)),
            total_s: total,
        }
    }
}

/// Metrics derived from the recorded series.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Largest |AO - AO_ref| over the run, %.
    pub max_abs_ao_dev: f64,
    /// Effluent produced during the run, kg.
    pub total_effluent: f64,
    /// First time after which both axial imbalances stay within
    /// [`CONVERGENCE_EPS`] of their equilibrium values; `None` if they are
    /// still outside at the end of the run.
    pub convergence_time: Option<f64>,
}

impl Metrics {
    /// Compute the metrics of `samples` given the equilibrium imbalance
    /// targets `(dI_eq, dX_eq)`.
    pub fn from_samples(samples: &[Sample], targets: (f64, f64)) -> Self {
        let max_abs_ao_dev = samples.iter().fold(0.0_f64, |m, s| m.max(s.ao_dev.abs()));
        let total_effluent = match (samples.first(), samples.last()) {
            (Some(a), Some(b)) => b.m_eff - a.m_eff,
            _ => 0.0,
        };
        let inside = |s: &Sample| (s.d_i - targets.0).abs() < CONVERGENCE_EPS && (s.d_x - targets.1).abs() < CONVERGENCE_EPS;
        let convergence_time = match samples.iter().rposition(|s| !inside(s)) {
            None => samples.first().map(|s| s.t),
            Some(k) if k + 1 < samples.len() => Some(samples[k + 1].t),
            Some(_) => None,
        };
        Metrics {
            max_abs_ao_dev,
            total_effluent,
            convergence_time,
        }
    }
}

/// Recorded time series and metrics of one closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub name: String,
    pub seed: u64,
    pub plant_step: f64,
    pub ao_ref: f64,
    /// Equilibrium (iodine, xenon) imbalances at the final scheduled power,
    /// the convergence targets.
    pub targets: (f64, f64),
    pub samples: Vec<Sample>,
    pub snapshots: Vec<RecommendationSnapshot>,
    pub metrics: Metrics,
    pub wall_time: WallTimeStats,
}

/// Run the plant and the advisory engine in lockstep.
///
/// At every control boundary inside the engine window the engine replans
/// from the estimated state and its first block is applied until the next
/// boundary; outside the window no injection is commanded and the turbine
/// follows the scheduled rates.
pub fn run_closed_loop(cfg: &ScenarioConfig) -> Result<RunResult, ScenarioError> {
    let params = &cfg.params;
    let mut state = cfg.initial_state()?;
    let p_start = state.p_turb;
    let engine = Engine::new(params.clone(), cfg.solver.clone());
    let mut advisor = Advisor::new(engine, cfg.strategy.clone(), cfg.profile.clone(), &state, cfg.budget);
    let ao_ref = cfg.strategy.ao_ref;
    let h = cfg.plant_step;
    let dt = cfg.solver.dt_ctrl;
    let per_window = (dt / h).round() as usize;

    let steps = cfg.steps();
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(Sample::from_state(&state, ao_ref, 0.0));
    let mut snapshots = Vec::new();
    let (mut q, mut r_turb) = (0.0, None);

    for k in 0..steps {
        let t = k as f64 * h;
        if k % per_window == 0 {
            let active = cfg.engine_enabled && t >= cfg.window[0] && t < cfg.window[1];
            (q, r_turb) = if active {
                let rec = advisor
                    .replan(t, &state.cvcs)
                    .map_err(|source| ScenarioError::Run { t, source })?;
                snapshots.push(RecommendationSnapshot {
                    issued_at: rec.issued_at,
                    current_row: rec.current_row,
                    next_row: rec.next_row,
                    plan: rec.plan.clone(),
                    diagnostics: rec.diagnostics.clone(),
                });
                (rec.current_row.q(), rec.current_row.r_turb)
            } else {
                (0.0, None)
            };
        }
        samples.last_mut().expect("at least the initial sample").q = q;
        let input = input_at(t, q, r_turb, &cfg.profile, p_start);
        state = step_to(&state, &input, (k + 1) as f64 * h, params).map_err(|e| ScenarioError::Run { t, source: e.into() })?;
        advisor.observe(MeasuredSample::from_state(&state));
        samples.push(Sample::from_state(&state, ao_ref, q));
    }

    let targets = equilibrium_imbalances(cfg.profile.final_power(p_start), ao_ref, params);
    let metrics = Metrics::from_samples(&samples, targets);
    Ok(RunResult {
        name: cfg.name.clone(),
        seed: cfg.seed,
        plant_step: h,
        ao_ref,
        targets,
        wall_time: WallTimeStats::from_snapshots(&snapshots),
        samples,
        snapshots,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t: f64, d_i: f64, d_x: f64) -> Sample {
        Sample {
            t,
            p_turb: 1.0,
            n: 1.0,
            t_dev: 0.0,
            ao: 0.0,
            ao_dev: 0.0,
            c_b: 1000.0,
            z: 250.0,
            q: 0.0,
            m_eff: 0.0,
            i_t: 1.0,
            i_b: 1.0,
            x_t: 1.0,
            x_b: 1.0,
            d_i,
            d_x,
        }
    }

    #[test]
    fn convergence_time_is_last_exit_plus_one() {
        let s = vec![
            sample(0.0, 0.5, 0.0),
            sample(10.0, 0.0, 0.0),
            sample(20.0, 0.0, 0.02),
            sample(30.0, 0.005, 0.0),
            sample(40.0, 0.0, -0.005),
        ];
        assert_eq!(Metrics::from_samples(&s, (0.0, 0.0)).convergence_time, Some(30.0));
        assert_eq!(Metrics::from_samples(&s[3..], (0.0, 0.0)).convergence_time, Some(30.0));
        assert_eq!(Metrics::from_samples(&s[..3], (0.0, 0.0)).convergence_time, None);
    }
}
