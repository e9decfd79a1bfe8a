use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::objective::{objective_eval, Reference};
use super::plan::{blocking_pattern, ControlPlan, DEFAULT_DT_CTRL, DEFAULT_HORIZON};
use super::predict::{predict_with_step, Trajectory, PREDICTION_STEP};
use super::problem::{cholesky_solve, project, Model, Multipliers, Problem};
use crate::error::EngineError;
use crate::plant::{CoreState, PlantParams, PowerProfile};
use crate::strategy::StrategySpec;

/// Constraint tolerance on the AO envelope, %.
pub const AO_TOLERANCE: f64 = 0.1;

/// Solver and horizon settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Control interval, s.
    pub dt_ctrl: f64,
    /// Prediction horizon, s.
    pub horizon: f64,
    /// Number of leading single-interval blocks before block lengths double.
    pub fine_blocks: usize,
    /// Prediction integration step, s.
    pub prediction_step: f64,
    /// Cap on accepted descent iterations over all penalty rounds.
    pub max_iterations: usize,
    /// Number of penalty (multiplier update) rounds.
    pub outer_rounds: usize,
    /// Initial quadratic penalty weight per constraint sample.
    pub penalty_initial: f64,
    /// Penalty growth factor between rounds.
    pub penalty_growth: f64,
    /// Forward-difference step in normalized decision units.
    pub fd_step: f64,
    /// The optimizer aims this far (%) inside the AO envelope to absorb
    /// model and step-size mismatch.
    pub ao_margin: f64,
    /// Stationarity threshold on the projected gradient, relative to the
    /// merit magnitude.
    pub stationarity_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt_ctrl: DEFAULT_DT_CTRL,
            horizon: DEFAULT_HORIZON,
            fine_blocks: 6,
            prediction_step: PREDICTION_STEP,
            max_iterations: 150,
            outer_rounds: 3,
            penalty_initial: 1.0,
            penalty_growth: 10.0,
            fd_step: 1e-6,
            ao_margin: 0.3,
            stationarity_tol: 1e-7,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::InvalidPlan(m.to_string()));
        if !(self.dt_ctrl > 0.0) || !(self.horizon >= 0.0) {
            return bad("dt_ctrl must be > 0 and horizon >= 0");
        }
        if !(self.prediction_step > 0.0) || (self.dt_ctrl / self.prediction_step).fract().abs() > 1e-9 {
            return bad("prediction_step must divide dt_ctrl");
        }
        if self.outer_rounds == 0 || self.fine_blocks == 0 {
            return bad("outer_rounds and fine_blocks must be >= 1");
        }
        if !(self.fd_step > 0.0 && self.fd_step < 1e-2) {
            return bad("fd_step must lie in (0, 0.01)");
        }
        if !(self.penalty_initial > 0.0 && self.penalty_growth >= 1.0) {
            return bad("penalty_initial must be > 0 and penalty_growth >= 1");
        }
        if !(self.ao_margin >= 0.0) {
            return bad("ao_margin must be >= 0");
        }
        Ok(())
    }

    /// Move-blocking pattern of a plan starting at `t0`.
    pub fn pattern(&self) -> Vec<usize> {
        blocking_pattern(ControlPlan::interval_count(self.horizon, self.dt_ctrl), self.fine_blocks)
    }
}

/// Solver bookkeeping returned with each recommendation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub objective: f64,
    /// Largest constraint residual of the returned plan (AO envelope and
    /// boxes), recomputed from its predicted trajectory.
    pub max_violation: f64,
    /// Accepted descent iterations.
    pub iterations: usize,
    pub wall_time_s: f64,
    pub warm_started: bool,
    pub converged: bool,
    /// The violation exceeds the tolerance at the best point found.
    pub infeasible: bool,
    pub budget_exhausted: bool,
    /// Accepted merit values, one list per penalty round.
    pub merit_trace: Vec<Vec<f64>>,
}

/// One row of the recommendation table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecommendationRow {
    /// Fresh-water injection, kg/s.
    pub dilution: f64,
    /// Borated-water injection, kg/s.
    pub boration: f64,
    /// Turbine ramp rate, %NP/min, when recommended.
    pub r_turb: Option<f64>,
    /// Simulated time from which the row applies, s.
    pub apply_at: f64,
}

impl RecommendationRow {
    fn new(q: f64, r_turb: Option<f64>, apply_at: f64) -> Self {
        RecommendationRow {
            dilution: q.max(0.0),
            boration: (-q).max(0.0),
            r_turb,
            apply_at,
        }
    }

    /// Signed injection, kg/s.
    pub fn q(&self) -> f64 {
        self.dilution - self.boration
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub issued_at: f64,
    pub plan: ControlPlan,
    pub predicted: Trajectory,
    pub current_row: RecommendationRow,
    pub next_row: RecommendationRow,
    pub diagnostics: SolveDiagnostics,
}

impl Recommendation {
    /// Copy with the wall-clock measurement cleared, for comparing two
    /// solves of the same problem.
    pub fn without_timing(&self) -> Recommendation {
        let mut r = self.clone();
        r.diagnostics.wall_time_s = 0.0;
        r
    }
}

/// The predictive engine: plant model plus solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Engine {
    pub params: PlantParams,
    pub config: SolverConfig,
}

struct InnerResult {
    v: Vec<f64>,
    trace: Vec<f64>,
    iterations: usize,
    stationary: bool,
    timed_out: bool,
    constraints: Vec<f64>,
}

impl Engine {
    pub fn new(params: PlantParams, config: SolverConfig) -> Self {
        Engine { params, config }
    }

    fn skeleton(&self, t0: f64, r_turb: Option<f64>) -> ControlPlan {
        let pattern = self.config.pattern();
        ControlPlan {
            t0,
            dt_ctrl: self.config.dt_ctrl,
            blocks: pattern
                .into_iter()
                .map(|repeat| super::plan::ControlBlock { repeat, q: 0.0, r_turb })
                .collect(),
            horizon: self.config.horizon,
        }
    }

    fn problem<'a>(
        &'a self,
        init: &'a CoreState,
        strategy: &'a StrategySpec,
        profile: &'a PowerProfile,
    ) -> Problem<'a> {
        let r0 = strategy.optimize_turbine_rate.then_some(strategy.rate_bounds[0]);
        Problem::new(
            init,
            &self.params,
            strategy,
            profile,
            self.skeleton(init.t, r0),
            self.config.prediction_step,
            self.config.ao_margin,
        )
    }

    /// Predict `plan` with the engine's prediction step.
    pub fn predict(&self, init: &CoreState, plan: &ControlPlan, profile: &PowerProfile) -> Result<Trajectory, EngineError> {
        Ok(predict_with_step(init, plan, profile, &self.params, self.config.prediction_step)?)
    }

    /// Objective value and forward-difference gradient with respect to the
    /// block values of `plan` (injections first, then rates), in physical
    /// units, exactly as the solver computes them. The effluent term enters
    /// the gradient smoothed within 0.01 kg/s of zero injection.
    pub fn objective_gradient(
        &self,
        init: &CoreState,
        strategy: &StrategySpec,
        profile: &PowerProfile,
        plan: &ControlPlan,
    ) -> Result<(f64, Vec<f64>), EngineError> {
        let problem = self.problem(init, strategy, profile);
        let v = problem.from_plan(plan);
        let mult = Multipliers::none(problem.samples);
        let model = problem.model(&v, &mult, self.config.fd_step)?;
        let grad = model.grad.iter().enumerate().map(|(i, g)| g / problem.span(i)).collect();
        Ok((model.eval.cost, grad))
    }

    /// Reference values used by the objective for this problem.
    pub fn reference(&self, init: &CoreState, strategy: &StrategySpec, profile: &PowerProfile) -> Reference {
        Reference::new(strategy, profile, init.p_turb, &self.params)
    }

    /// Solve the finite-horizon program from `init` and package the result.
    ///
    /// `warm` (if any) is re-gridded onto the new horizon and used as the
    /// starting point; otherwise the search starts from zero injection and
    /// the lowest turbine rates. The iteration cap bounds the work
    /// deterministically; `budget_s` is a wall-clock safety net.
    pub fn solve(
        &self,
        init: &CoreState,
        strategy: &StrategySpec,
        profile: &PowerProfile,
        warm: Option<&ControlPlan>,
        budget_s: f64,
    ) -> Result<Recommendation, EngineError> {
        if !(budget_s > 0.0) {
            return Err(EngineError::InvalidPlan(format!("budget must be > 0, got {budget_s}")));
        }
        self.config.validate()?;
        profile.validate()?;
        let started = Instant::now();
        let problem = self.problem(init, strategy, profile);
        let pattern = self.config.pattern();

        let mut v = match warm {
            Some(w) => problem.from_plan(&w.shifted(init.t, &pattern)),
            None => problem.from_plan(&problem.skeleton),
        };
        let mut mult = Multipliers::none(problem.samples);
        mult.mu = self.config.penalty_initial;
        let mut traces = Vec::new();
        let mut iterations = 0;
        let mut stationary = false;
        let mut timed_out = false;
        let rounds = self.config.outer_rounds;
        for round in 0..rounds {
            let remaining = self.config.max_iterations.saturating_sub(iterations);
            let cap = remaining.div_ceil(rounds - round);
            let inner = self.minimize(&problem, v, &mult, cap, started, budget_s)?;
            v = inner.v;
            iterations += inner.iterations;
            traces.push(inner.trace);
            stationary = inner.stationary;
            timed_out = inner.timed_out;
            let worst = inner.constraints.iter().fold(f64::NEG_INFINITY, |m, &g| m.max(g));
            if timed_out || (worst <= 0.0 && stationary) || round + 1 == rounds {
                break;
            }
            for (l, g) in mult.lambda.iter_mut().zip(&inner.constraints) {
                *l = (*l + mult.mu * g).max(0.0);
            }
            mult.mu *= self.config.penalty_growth;
        }

        let plan = problem.to_plan(&v);
        let predicted = predict_with_step(init, &plan, profile, &self.params, self.config.prediction_step)?;
        let (objective, violations) = objective_eval(&predicted, &plan, strategy, &problem.reference, &self.params);
        let max_violation = violations.max();
        let infeasible = max_violation > AO_TOLERANCE;
        let budget_exhausted = timed_out || (!stationary && iterations >= self.config.max_iterations);
        let diagnostics = SolveDiagnostics {
            objective,
            max_violation,
            iterations,
            wall_time_s: started.elapsed().as_secs_f64(),
            warm_started: warm.is_some(),
            converged: stationary && !infeasible,
            infeasible,
            budget_exhausted,
            merit_trace: traces,
        };
        Ok(self.package(init.t, plan, predicted, diagnostics))
    }

    fn package(&self, issued_at: f64, plan: ControlPlan, predicted: Trajectory, diagnostics: SolveDiagnostics) -> Recommendation {
        let dt = self.config.dt_ctrl;
        let window = (issued_at / dt + 1e-9).floor();
        let values = plan.expand();
        let (q0, r0) = values.first().copied().unwrap_or((0.0, None));
        let (q1, r1) = values.get(1).copied().unwrap_or((q0, r0));
        Recommendation {
            issued_at,
            current_row: RecommendationRow::new(q0, r0, window * dt),
            next_row: RecommendationRow::new(q1, r1, (window + 1.0) * dt),
            plan,
            predicted,
            diagnostics,
        }
    }

    /// Projected Gauss-Newton descent on the merit.
    ///
    /// Coordinates at a bound whose gradient points outward are frozen; the
    /// remaining ones take a Levenberg-damped Gauss-Newton step, projected
    /// onto the box and shortened until the Armijo condition holds. When
    /// that fails, a projected gradient step is tried instead. Accepted
    /// merits are therefore strictly decreasing.
    fn minimize(
        &self,
        problem: &Problem<'_>,
        v: Vec<f64>,
        mult: &Multipliers,
        cap: usize,
        started: Instant,
        budget_s: f64,
    ) -> Result<InnerResult, EngineError> {
        let fd = self.config.fd_step;
        let mut v = v;
        let mut model = problem.model(&v, mult, fd)?;
        let mut trace = vec![model.eval.merit];
        let mut iterations = 0;
        let mut stationary = false;
        let mut timed_out = false;
        let mut damping = 1e-6;
        let mut alpha = 0.0;

        while iterations < cap {
            let f = model.eval.merit;
            let g = &model.grad;
            let pg = g
                .iter()
                .zip(&v)
                .fold(0.0_f64, |m, (gi, vi)| m.max(((vi - gi).clamp(0.0, 1.0) - vi).abs()));
            if pg <= self.config.stationarity_tol * (1.0 + f.abs()) {
                stationary = true;
                break;
            }
            if started.elapsed().as_secs_f64() > budget_s {
                timed_out = true;
                break;
            }
            let mut accepted = None;
            if let Some(d) = newton_direction(&model, &v, damping) {
                let mut t = 1.0;
                for _ in 0..8 {
                    let trial = step(&v, &d, t);
                    if let Some(e) = armijo(problem, mult, &v, g, f, &trial)? {
                        accepted = Some((trial, e));
                        break;
                    }
                    t *= 0.3;
                }
            }
            if accepted.is_some() {
                damping = (damping / 3.0).max(1e-10);
            } else {
                damping = (damping * 10.0).min(1e2);
                let gmax = g.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
                if alpha == 0.0 && gmax > 0.0 {
                    alpha = 0.1 / gmax;
                }
                let minus_g: Vec<f64> = g.iter().map(|x| -x).collect();
                for _ in 0..20 {
                    let trial = step(&v, &minus_g, alpha);
                    if let Some(e) = armijo(problem, mult, &v, g, f, &trial)? {
                        accepted = Some((trial, e));
                        alpha *= 2.0;
                        break;
                    }
                    alpha *= 0.25;
                }
            }
            let Some((next, _)) = accepted else {
                stationary = true;
                break;
            };
            model = problem.model(&next, mult, fd)?;
            v = next;
            trace.push(model.eval.merit);
            iterations += 1;
        }
        Ok(InnerResult {
            v,
            trace,
            iterations,
            stationary,
            timed_out,
            constraints: model.eval.constraints,
        })
    }
}

/// Damped Gauss-Newton direction over the coordinates not held at a bound.
fn newton_direction(model: &Model, v: &[f64], damping: f64) -> Option<Vec<f64>> {
    let g = &model.grad;
    let free: Vec<usize> = (0..v.len())
        .filter(|&i| !((v[i] <= 0.0 && g[i] > 0.0) || (v[i] >= 1.0 && g[i] < 0.0)))
        .collect();
    if free.is_empty() {
        return None;
    }
    let scale = free.iter().fold(0.0_f64, |m, &i| m.max(model.hessian[i][i]));
    if !(scale > 0.0) {
        return None;
    }
    let h: Vec<Vec<f64>> = free
        .iter()
        .map(|&i| {
            free.iter()
                .map(|&k| model.hessian[i][k] + if i == k { damping * scale } else { 0.0 })
                .collect()
        })
        .collect();
    let rhs: Vec<f64> = free.iter().map(|&i| -g[i]).collect();
    let d_free = cholesky_solve(&h, &rhs)?;
    let mut d = vec![0.0; v.len()];
    for (&i, di) in free.iter().zip(d_free) {
        d[i] = di;
    }
    Some(d)
}

fn step(v: &[f64], d: &[f64], t: f64) -> Vec<f64> {
    let mut trial: Vec<f64> = v.iter().zip(d).map(|(vi, di)| vi + t * di).collect();
    project(&mut trial);
    trial
}

/// Evaluate `trial` and return it if it passes the Armijo test against the
/// linear model at `v`.
fn armijo(
    problem: &Problem<'_>,
    mult: &Multipliers,
    v: &[f64],
    g: &[f64],
    f: f64,
    trial: &[f64],
) -> Result<Option<super::problem::Evaluation>, EngineError> {
    let slope: f64 = trial.iter().zip(v).zip(g).map(|((t, vi), gi)| (t - vi) * gi).sum();
    if !(slope < 0.0) {
        return Ok(None);
    }
    let e = problem.evaluate(trial, mult)?;
    Ok((e.merit < f && e.merit <= f + 1e-4 * slope).then_some(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::equilibrium;
    use crate::strategy::make_ao_control;

    #[test]
    fn gradient_matches_central_differences() {
        let params = PlantParams::boc();
        let init = equilibrium(1.0, params.z_ref, &params).unwrap();
        let strategy = make_ao_control(init.ao).unwrap();
        let profile = PowerProfile::flat();
        let engine = Engine::new(params, SolverConfig::default());
        let problem = engine.problem(&init, &strategy, &profile);
        let v: Vec<f64> = (0..problem.dim()).map(|i| 0.2 + 0.05 * (i % 5) as f64).collect();
        let mut mult = Multipliers::none(problem.samples);
        mult.lambda.iter_mut().for_each(|l| *l = 0.5);
        mult.mu = 2.0;
        let fwd = problem.model(&v, &mult, 1e-6).unwrap().grad;
        let cen = problem.central_gradient(&v, &mult, 1e-7);
        let scale = cen.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        for (a, b) in fwd.iter().zip(&cen) {
            assert!((a - b).abs() <= 1e-3 * b.abs().max(1e-3 * scale), "{a} vs {b}");
        }
    }
}
