//! Live plant-plus-advisor session, independent of any transport.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use pwr_advisor::engine::{input_at, Advisor, Engine, MeasuredSample, Recommendation, Trajectory};
use pwr_advisor::plant::{step, CoreState, PowerProfile};
use pwr_advisor::scenario::{Sample, ScenarioConfig, StrategySection};
use pwr_advisor::strategy::{constraint_envelope, StrategySpec};
use pwr_advisor::EngineError;

/// Most samples kept in a session's history.
pub const HISTORY_CAPACITY: usize = 100_000;
/// Most points per predicted series in a recommendation payload.
pub const MAX_PREDICTION_POINTS: usize = 600;

/// Recommendation as served to clients: the predicted trajectory decimated
/// to at most [`MAX_PREDICTION_POINTS`] samples, plus the AO reference and
/// the strategy's AO-deviation bound at every predicted sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationPayload {
    #[serde(flatten)]
    pub recommendation: Recommendation,
    pub strategy: StrategySpec,
    /// AO-deviation bound at each predicted sample, %.
    pub envelope: Vec<f64>,
}

impl RecommendationPayload {
    pub fn new(rec: &Recommendation, strategy: &StrategySpec) -> Self {
        let mut recommendation = rec.clone();
        recommendation.predicted = decimate(&rec.predicted);
        let envelope = recommendation
            .predicted
            .samples
            .iter()
            .map(|s| constraint_envelope(strategy, s.n))
            .collect();
        RecommendationPayload {
            recommendation,
            strategy: strategy.clone(),
            envelope,
        }
    }
}

fn decimate(traj: &Trajectory) -> Trajectory {
    traj.decimated(MAX_PREDICTION_POINTS)
}

/// What a profile or strategy edit changed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EditAck {
    /// False when the submitted value equals the current one (no-op).
    pub changed: bool,
    /// Simulated time of the recommendation in force after the edit.
    pub recommendation_issued_at: Option<f64>,
}

/// Plant, observer and advisor of one session.
///
/// Unlike a batch scenario run, a live session has no end: the scenario's
/// duration is ignored and the engine is active from the start of its
/// window on.
#[derive(Debug)]
pub struct LiveSession {
    pub config: ScenarioConfig,
    state: CoreState,
    p_start: f64,
    advisor: Advisor,
    command: (f64, Option<f64>),
    steps: u64,
    per_window: u64,
}

impl LiveSession {
    pub fn new(config: ScenarioConfig) -> Result<Self, pwr_advisor::ScenarioError> {
        let state = config.initial_state()?;
        let engine = Engine::new(config.params.clone(), config.solver.clone());
        let advisor = Advisor::new(engine, config.strategy.clone(), config.profile.clone(), &state, config.budget);
        let per_window = (config.solver.dt_ctrl / config.plant_step).round() as u64;
        Ok(LiveSession {
            p_start: state.p_turb,
            state,
            advisor,
            command: (0.0, None),
            steps: 0,
            per_window,
            config,
        })
    }

    pub fn now(&self) -> f64 {
        self.state.t
    }

    pub fn state(&self) -> &CoreState {
        &self.state
    }

    pub fn strategy(&self) -> &StrategySpec {
        self.advisor.strategy()
    }

    pub fn profile(&self) -> &PowerProfile {
        self.advisor.profile()
    }

    pub fn sample(&self) -> Sample {
        Sample::from_state(&self.state, self.strategy().ao_ref, self.command.0)
    }

    pub fn recommendation(&self) -> Option<&Recommendation> {
        self.advisor.latest()
    }

    pub fn payload(&self) -> Option<RecommendationPayload> {
        self.advisor
            .latest()
            .map(|r| RecommendationPayload::new(r, self.advisor.strategy()))
    }

    fn engine_active(&self, t: f64) -> bool {
        self.config.engine_enabled && t >= self.config.window[0]
    }

    fn apply_latest(&mut self) {
        if let Some(rec) = self.advisor.latest() {
            self.command = (rec.current_row.q(), rec.current_row.r_turb);
        }
    }

    /// Advance the plant by one step, replanning first on a control
    /// boundary. Returns the new sample.
    pub fn step(&mut self) -> Result<Sample, EngineError> {
        let t = self.state.t;
        if self.steps % self.per_window == 0 {
            if self.engine_active(t) {
                self.advisor.replan(t, &self.state.cvcs)?;
                self.apply_latest();
            } else {
                self.command = (0.0, None);
            }
        }
        let (q, r) = self.command;
        let input = input_at(t, q, r, self.advisor.profile(), self.p_start);
        let h = self.config.plant_step;
        let mut next = step(&self.state, &input, h, &self.config.params)?;
        self.steps += 1;
        next.t = self.steps as f64 * h;
        self.state = next;
        self.advisor.observe(MeasuredSample::from_state(&self.state));
        Ok(self.sample())
    }

    /// Replan now, outside the regular cadence, and apply the new first
    /// block immediately (when the engine is active).
    fn replan_now(&mut self) -> Result<(), EngineError> {
        if self.engine_active(self.state.t) {
            self.advisor.solve_now(&self.state.cvcs)?;
            self.apply_latest();
        }
        Ok(())
    }

    fn ack(&self, changed: bool) -> EditAck {
        EditAck {
            changed,
            recommendation_issued_at: self.advisor.latest().map(|r| r.issued_at),
        }
    }

    /// Replace the turbine schedule and replan.
    pub fn set_profile(&mut self, profile: PowerProfile) -> Result<EditAck, EngineError> {
        let changed = self.advisor.set_profile(profile)?;
        if changed {
            self.replan_now()?;
        }
        Ok(self.ack(changed))
    }

    /// Switch strategy (keeping the current AO reference unless overridden)
    /// and replan.
    pub fn set_strategy(&mut self, section: &StrategySection) -> Result<EditAck, SessionError> {
        let spec = StrategySpec::from_kind(section.kind, &section.overrides, self.strategy().ao_ref)?;
        let changed = self.advisor.set_strategy(spec);
        if changed {
            self.replan_now()?;
        }
        Ok(self.ack(changed))
    }
}

/// Failure of a session operation.
#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Strategy(#[from] pwr_advisor::StrategyError),
}

/// Bounded, time-ordered sample history.
#[derive(Debug, Clone, Default)]
pub struct History {
    samples: VecDeque<Sample>,
}

impl History {
    pub fn push(&mut self, s: Sample) {
        if self.samples.len() == HISTORY_CAPACITY {
            self.samples.pop_front();
        }
        self.samples.push_back(s);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Samples strictly after `since`; `since <= 0` returns everything.
    pub fn since(&self, since: f64) -> Vec<Sample> {
        if since <= 0.0 {
            return self.samples.iter().copied().collect();
        }
        let start = self.samples.partition_point(|s| s.t <= since);
        self.samples.range(start..).copied().collect()
    }
}
