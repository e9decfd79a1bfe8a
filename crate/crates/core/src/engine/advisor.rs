use super::estimator::{Estimator, MeasuredSample};
use super::solver::{Engine, Recommendation};
use crate::error::EngineError;
use crate::plant::{CoreState, CvcsQueue, PowerProfile};
use crate::strategy::StrategySpec;

/// Receding-horizon loop state: the latest recommendation, the twin-model
/// observer, and the operator's current profile and strategy.
#[derive(Debug, Clone)]
pub struct Advisor {
    pub engine: Engine,
    strategy: StrategySpec,
    profile: PowerProfile,
    estimator: Estimator,
    latest: Option<Recommendation>,
    /// A profile or strategy edit invalidated the cached recommendation.
    stale: bool,
    budget_s: f64,
}

impl Advisor {
    /// `initial` must be the (equilibrium) state the history starts from.
    pub fn new(engine: Engine, strategy: StrategySpec, profile: PowerProfile, initial: &CoreState, budget_s: f64) -> Self {
        Advisor {
            engine,
            strategy,
            profile,
            estimator: Estimator::from_state(initial),
            latest: None,
            stale: false,
            budget_s,
        }
    }

    pub fn strategy(&self) -> &StrategySpec {
        &self.strategy
    }

    pub fn profile(&self) -> &PowerProfile {
        &self.profile
    }

    pub fn latest(&self) -> Option<&Recommendation> {
        self.latest.as_ref()
    }

    pub fn budget_s(&self) -> f64 {
        self.budget_s
    }

    /// Feed one measurement to the observer.
    pub fn observe(&mut self, sample: MeasuredSample) {
        self.estimator.push(sample, &self.engine.params);
    }

    /// Current state estimate with the given CVCS command log.
    pub fn estimate(&self, cvcs: &CvcsQueue) -> CoreState {
        self.estimator.state(cvcs.clone())
    }

    /// Replace the turbine profile. Returns false (and changes nothing) when
    /// the profile is identical.
    pub fn set_profile(&mut self, profile: PowerProfile) -> Result<bool, EngineError> {
        profile.validate()?;
        if profile == self.profile {
            return Ok(false);
        }
        self.profile = profile;
        self.stale = true;
        Ok(true)
    }

    /// Replace the strategy. Returns false when it is identical.
    pub fn set_strategy(&mut self, strategy: StrategySpec) -> bool {
        if strategy == self.strategy {
            return false;
        }
        self.strategy = strategy;
        self.stale = true;
        true
    }

    fn window(&self, t: f64) -> f64 {
        (t / self.engine.config.dt_ctrl + 1e-9).floor()
    }

    /// Whether a call to [`Advisor::replan`] at `now` would solve.
    pub fn needs_replan(&self, now: f64) -> bool {
        match &self.latest {
            None => true,
            Some(r) => self.stale || self.window(r.issued_at) != self.window(now),
        }
    }

    /// Recommendation for `now`: cached within a control window, otherwise
    /// solved from the current estimate, warm-started from the previous plan.
    pub fn replan(&mut self, now: f64, cvcs: &CvcsQueue) -> Result<&Recommendation, EngineError> {
        if self.needs_replan(now) {
            self.solve_now(cvcs)?;
        }
        Ok(self.latest.as_ref().expect("solved above"))
    }

    /// Solve immediately, regardless of cadence.
    pub fn solve_now(&mut self, cvcs: &CvcsQueue) -> Result<&Recommendation, EngineError> {
        let init = self.estimate(cvcs);
        let warm = self.latest.as_ref().map(|r| r.plan.clone());
        let rec = self
            .engine
            .solve(&init, &self.strategy, &self.profile, warm.as_ref(), self.budget_s)?;
        self.latest = Some(rec);
        self.stale = false;
        Ok(self.latest.as_ref().expect("just stored"))
    }
}
