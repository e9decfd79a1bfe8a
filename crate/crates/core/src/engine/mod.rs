//! Receding-horizon predictive engine.
//!
//! [`predict`] simulates the plant under a piecewise-constant plan,
//! [`objective_eval`] scores a prediction against a strategy, and
//! [`Engine::solve`] searches for the best plan by direct single shooting:
//! box constraints by projection, AO path constraints through an augmented
//! Lagrangian penalty, and projected Gauss-Newton steps built from
//! forward-difference sensitivities. [`Advisor`] wraps the solver in the 10-minute replanning loop.

mod advisor;
mod estimator;
mod objective;
mod plan;
mod predict;
mod problem;
mod solver;

pub use advisor::Advisor;
pub use estimator::{estimate_state, Estimator, MeasuredSample};
pub use objective::{objective_eval, objective_terms, CostTerms, Reference, Violations};
pub use plan::{blocking_pattern, ControlBlock, ControlPlan, DEFAULT_DT_CTRL, DEFAULT_HORIZON};
pub use predict::{predict, predict_with_step, Trajectory, PREDICTION_STEP};
pub use solver::{
    Engine, Recommendation, RecommendationRow, SolveDiagnostics, SolverConfig, AO_TOLERANCE,
};

pub use predict::{input_at, step_to};
