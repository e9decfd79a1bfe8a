//! Load-following advisory for a Mode A pressurized water reactor.
//!
//! The crate couples a two-node core simulator ([`plant`]) with a
//! receding-horizon predictive engine ([`engine`]) that recommends dilution
//! and boration flows, and optionally turbine ramp rates, under one of four
//! strategies ([`strategy`]). [`scenario`] runs both in closed loop.

pub mod engine;
pub mod error;
pub mod plant;
pub mod scenario;
pub mod strategy;

pub use error::{EngineError, ParamError, PlantError, ScenarioError, StrategyError};
