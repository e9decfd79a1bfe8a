use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("preset parse error: {0}")]
    Parse(String),
    #[error("preset version {found} not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("unknown burnup preset `{0}`")]
    UnknownPreset(String),
    #[error("invalid parameter `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("no critical boron: solved C_B = {c_b:.3} ppm at power {power}")]
    NoCriticalBoron { c_b: f64, power: f64 },
    #[error("axial shape fixed point did not converge after {iterations} iterations")]
    ShapeNotConverged { iterations: usize },
    #[error("non-finite {component} derivative at t = {t} s")]
    NonFinite { component: &'static str, t: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StrategyError {
    #[error("AO reference {0} % outside [-20, 20]")]
    AoRefOutOfRange(f64),
    #[error("invalid rate bounds [{0}, {1}] %NP/min (must lie within [0.1, 5.0])")]
    RateBounds(f64, f64),
    #[error("invalid target power {0} %NP")]
    Target(f64),
    #[error("low-power AO bound {0} % must be >= 5")]
    LowPowerBound(f64),
    #[error("unknown strategy kind `{0}`")]
    UnknownKind(String),
    #[error("invalid weight `{0}`: {1}")]
    Weight(&'static str, String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error("state history is empty")]
    EmptyHistory,
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid field `{field}`: {reason}")]
    Validation { field: String, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("timeline mismatch: {0}")]
    TimelineMismatch(String),
    #[error("run failed at t = {t} s: {source}")]
    Run {
        t: f64,
        #[source]
        source: EngineError,
    },
    #[error("csv error at line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
}

impl ScenarioError {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ScenarioError::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
