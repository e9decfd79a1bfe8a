use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::SolverConfig;
use crate::error::ScenarioError;
use crate::plant::{equilibrium, Burnup, CoreState, PlantParams, PowerProfile, ProfileSegment, PROFILE_GRID_S};
use crate::strategy::{StrategyKind, StrategyOverrides, StrategySpec};

/// Dilution pump limit a scenario may not exceed, kg/s.
pub const DILUTION_LIMIT: f64 = 10.0;
/// Boration pump limit a scenario may not exceed, kg/s.
pub const BORATION_LIMIT: f64 = 3.0;
/// Default engine budget per solve, s of wall time.
pub const DEFAULT_BUDGET_S: f64 = 5.0;
/// Default plant integration step, s.
pub const DEFAULT_PLANT_STEP: f64 = 10.0;

/// `[strategy]` section of a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySection {
    pub kind: StrategyKind,
    #[serde(default)]
    pub overrides: StrategyOverrides,
}

/// `[engine]` section of a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    /// Whether the advisory engine runs at all.
    #[serde(default = "default_true")]
    pub enabled: bool,
    /// Simulated interval `[start, end)` in which recommendations are
    /// applied, s. Defaults to the whole run.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    /// Wall-clock budget per solve, s.
    #[serde(default = "default_budget")]
    pub budget: f64,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn default_true() -> bool {
    true
}

fn default_budget() -> f64 {
    DEFAULT_BUDGET_S
}

fn default_plant_step() -> f64 {
    DEFAULT_PLANT_STEP
}

impl Default for EngineSection {
    fn default() -> Self {
        EngineSection {
            enabled: true,
            window: None,
            budget: DEFAULT_BUDGET_S,
            solver: SolverConfig::default(),
        }
    }
}

/// On-disk form of a scenario, before defaults are resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    pub burnup: Burnup,
    /// Initial power, %NP.
    pub initial_power: f64,
    /// Initial rod position, steps (defaults to the preset's reference).
    #[serde(default)]
    pub initial_rod: Option<f64>,
    /// Simulated duration, s.
    pub duration: f64,
    #[serde(default = "default_plant_step")]
    pub plant_step: f64,
    #[serde(default)]
    pub seed: u64,
    /// CSV output path, relative to the scenario file.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub profile: Vec<ProfileSegment>,
    #[serde(default)]
    pub strategy: Option<StrategySection>,
    #[serde(default)]
    pub engine: EngineSection,
    /// Overrides of individual plant parameters, keyed by symbol.
    #[serde(default)]
    pub plant: toml::Table,
}

/// A validated, fully resolved experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub description: Option<String>,
    pub burnup: Burnup,
    pub params: PlantParams,
    /// Initial power, normalized.
    pub initial_power: f64,
    /// Initial rod position, steps.
    pub initial_rod: f64,
    pub profile: PowerProfile,
    pub strategy: StrategySpec,
    pub duration: f64,
    pub plant_step: f64,
    pub engine_enabled: bool,
    /// Simulated interval `[start, end)` in which recommendations apply, s.
    pub window: [f64; 2],
    pub budget: f64,
    pub solver: SolverConfig,
    pub output: Option<PathBuf>,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Parse and validate scenario text. Relative output paths are kept as
    /// written.
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
        Self::from_file(file)
    }

    /// Resolve defaults and validate.
    pub fn from_file(file: ScenarioFile) -> Result<Self, ScenarioError> {
        let params = apply_plant_overrides(PlantParams::preset(file.burnup), &file.plant)?;
        if params.w_dil_max > DILUTION_LIMIT {
            return Err(ScenarioError::validation(
                "plant.w_dil_max",
                format!("{} kg/s exceeds the {DILUTION_LIMIT} kg/s pump limit", params.w_dil_max),
            ));
        }
        if params.w_bor_max > BORATION_LIMIT {
            return Err(ScenarioError::validation(
                "plant.w_bor_max",
                format!("{} kg/s exceeds the {BORATION_LIMIT} kg/s pump limit", params.w_bor_max),
            ));
        }
        if !(15.0..=100.0).contains(&file.initial_power) {
            return Err(ScenarioError::validation(
                "initial_power",
                format!("{} outside [15, 100] %NP", file.initial_power),
            ));
        }
        let initial_rod = file.initial_rod.unwrap_or(params.z_ref);
        if !(0.0..=params.z_max).contains(&initial_rod) {
            return Err(ScenarioError::validation(
                "initial_rod",
                format!("{initial_rod} outside [0, {}] steps", params.z_max),
            ));
        }
        let h = file.plant_step;
        if !(h > 0.0) || (PROFILE_GRID_S / h).fract().abs() > 1e-9 {
            return Err(ScenarioError::validation(
                "plant_step",
                format!("{h} s must be > 0 and divide {PROFILE_GRID_S} s"),
            ));
        }
        if !(file.duration >= 0.0) || (file.duration / h).fract().abs() > 1e-9 {
            return Err(ScenarioError::validation(
                "duration",
                format!("{} s must be >= 0 and a multiple of plant_step", file.duration),
            ));
        }
        let profile = PowerProfile::new(file.profile);
        profile
            .validate()
            .map_err(|e| ScenarioError::validation("profile", e.to_string()))?;

        let engine = file.engine;
        engine
            .solver
            .validate()
            .map_err(|e| ScenarioError::validation("engine.solver", e.to_string()))?;
        if (engine.solver.dt_ctrl / h).fract().abs() > 1e-9 {
            return Err(ScenarioError::validation(
                "engine.solver.dt_ctrl",
                "must be a multiple of plant_step",
            ));
        }
        if !(engine.budget > 0.0) {
            return Err(ScenarioError::validation("engine.budget", "must be > 0"));
        }
        let window = engine.window.unwrap_or([0.0, file.duration]);
        if !(0.0 <= window[0] && window[0] <= window[1] && window[1] <= file.duration) {
            return Err(ScenarioError::validation(
                "engine.window",
                format!("[{}, {}] must lie within [0, duration] in order", window[0], window[1]),
            ));
        }

        let initial_power = file.initial_power / 100.0;
        let strategy = match file.strategy {
            Some(s) => {
                let default_ref = equilibrium_ao(initial_power, initial_rod, &params)?;
                StrategySpec::from_kind(s.kind, &s.overrides, default_ref)?
            }
            None => StrategySpec::from_kind(
                StrategyKind::AoControl,
                &StrategyOverrides::default(),
                equilibrium_ao(initial_power, initial_rod, &params)?,
            )?,
        };

        Ok(ScenarioConfig {
            name: file.name,
            description: file.description,
            burnup: file.burnup,
            params,
            initial_power,
            initial_rod,
            profile,
            strategy,
            duration: file.duration,
            plant_step: h,
            engine_enabled: engine.enabled,
            window,
            budget: engine.budget,
            solver: engine.solver,
            output: file.output,
            seed: file.seed,
        })
    }

    /// Equilibrium state the run starts from.
    pub fn initial_state(&self) -> Result<CoreState, ScenarioError> {
        equilibrium(self.initial_power, self.initial_rod, &self.params)
            .map_err(|e| ScenarioError::validation("initial_power", e.to_string()))
    }

    /// Number of plant steps in the run.
    pub fn steps(&self) -> usize {
        (self.duration / self.plant_step).round() as usize
    }
}

fn equilibrium_ao(power: f64, rod: f64, params: &PlantParams) -> Result<f64, ScenarioError> {
    equilibrium(power, rod, params)
        .map(|s| s.ao)
        .map_err(|e| ScenarioError::validation("initial_power", e.to_string()))
}

/// Replace individual preset values by the `[plant]` table entries.
fn apply_plant_overrides(params: PlantParams, overrides: &toml::Table) -> Result<PlantParams, ScenarioError> {
    if overrides.is_empty() {
        return Ok(params);
    }
    let mut table = toml::Table::try_from(&params).expect("params serialize to a table");
    for (key, value) in overrides {
        if !table.contains_key(key) {
            return Err(ScenarioError::validation(format!("plant.{key}"), "unknown plant parameter"));
        }
        let number = value
            .as_float()
            .or_else(|| value.as_integer().map(|i| i as f64))
            .ok_or_else(|| ScenarioError::validation(format!("plant.{key}"), "must be a number"))?;
        table.insert(key.clone(), toml::Value::Float(number));
    }
    let params: PlantParams = table
        .try_into()
        .map_err(|e: toml::de::Error| ScenarioError::validation("plant", e.message().to_string()))?;
    params.validate().map_err(|e| match e {
        crate::error::ParamError::Invalid { field, reason } => ScenarioError::validation(format!("plant.{field}"), reason),
        other => ScenarioError::validation("plant", other.to_string()),
    })?;
    Ok(params)
}

fn parse_error(text: &str, err: &toml::de::Error) -> ScenarioError {
    let line = err
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(1);
    ScenarioError::Parse {
        line,
        message: err.message().to_string(),
    }
}

/// Read and validate a scenario file. A relative `output` path is resolved
/// against the file's directory.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut cfg = ScenarioConfig::from_toml_str(&text)?;
    if let Some(out) = &cfg.output {
        if out.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.output = Some(dir.join(out));
            }
        }
    }
    Ok(cfg)
}

/// Scenario files bundled with the crate: (name, contents).
pub const BUNDLED_SCENARIOS: [(&str, &str); 4] = [
    ("load_follow", include_str!("../../scenarios/load_follow.toml")),
    ("fast_ramps", include_str!("../../scenarios/fast_ramps.toml")),
    ("oscillation", include_str!("../../scenarios/oscillation.toml")),
    ("effluent", include_str!("../../scenarios/effluent.toml")),
];

/// Parse a bundled scenario by name.
pub fn bundled_scenario(name: &str) -> Result<ScenarioConfig, ScenarioError> {
    let (_, text) = BUNDLED_SCENARIOS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| ScenarioError::validation("name", format!("no bundled scenario `{name}`")))?;
    ScenarioConfig::from_toml_str(text)
}
