//! The four advisory strategies, expressed as data for the predictive engine.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::StrategyError;

/// Displayed AO limit, %; no strategy tightens below it.
pub const NOMINAL_AO_BOUND: f64 = 5.0;
/// Widened AO limit used while cancelling an oscillation, %.
pub const OSCILLATION_AO_BOUND: f64 = 12.0;
/// Default low-power AO limit of the effluent strategy, %.
pub const DEFAULT_LOW_POWER_BOUND: f64 = 15.0;
/// Power at and above which the effluent strategy uses the nominal bound.
pub const RELAX_HIGH_POWER: f64 = 0.85;
/// Power at and below which the effluent strategy uses the relaxed bound.
pub const RELAX_LOW_POWER: f64 = 0.55;
/// Absolute turbine ramp-rate limits, %NP/min.
pub const RATE_LIMITS: [f64; 2] = [0.1, 5.0];
/// Largest accepted AO reference, % (magnitude).
pub const MAX_AO_REF: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    AoControl,
    FastestRates,
    OscillationCancel,
    EffluentMin,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::AoControl,
        StrategyKind::FastestRates,
        StrategyKind::OscillationCancel,
        StrategyKind::EffluentMin,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::AoControl => "AoControl",
            StrategyKind::FastestRates => "FastestRates",
            StrategyKind::OscillationCancel => "OscillationCancel",
            StrategyKind::EffluentMin => "EffluentMin",
        }
    }

    /// Which of (w_ao, w_u, w_eff, w_track, w_t) are active for this kind.
    fn active_weights(self) -> [bool; 5] {
        match self {
            StrategyKind::AoControl => [true, true, false, false, false],
            StrategyKind::FastestRates => [true, true, false, true, false],
            StrategyKind::OscillationCancel => [true, true, false, false, true],
            StrategyKind::EffluentMin => [true, true, true, false, false],
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| *c != '_' && *c != '-').collect::<String>().to_ascii_lowercase();
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.as_str().to_ascii_lowercase() == key)
            .ok_or_else(|| StrategyError::UnknownKind(s.to_string()))
    }
}

/// Objective weights. Zero weights drop their term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    /// AO deviation, per %² per control interval.
    pub w_ao: f64,
    /// Injection magnitude, per (kg/s)² per control interval.
    pub w_u: f64,
    /// Injected mass, per kg.
    pub w_eff: f64,
    /// Turbine power tracking, per (normalized power)² per control interval.
    pub w_track: f64,
    /// Axial iodine/xenon imbalance error at the horizon end (with a running
    /// share along the horizon), per (normalized unit)².
    pub w_t: f64,
}

impl Weights {
    fn as_array(&self) -> [(&'static str, f64); 5] {
        [
            ("w_ao", self.w_ao),
            ("w_u", self.w_u),
            ("w_eff", self.w_eff),
            ("w_track", self.w_track),
            ("w_t", self.w_t),
        ]
    }
}

/// AO-deviation bound as a function of core power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundSchedule {
    Constant {
        bound: f64,
    },
    /// `nominal` at and above `p_high`, `relaxed` at and below `p_low`,
    /// linear in between.
    LowPowerRelaxed {
        nominal: f64,
        relaxed: f64,
        p_low: f64,
        p_high: f64,
    },
}

impl BoundSchedule {
    pub fn eval(&self, power: f64) -> f64 {
        match *self {
            BoundSchedule::Constant { bound } => bound,
            BoundSchedule::LowPowerRelaxed {
                nominal,
                relaxed,
                p_low,
                p_high,
            } => {
                if power >= p_high {
                    nominal
                } else if power <= p_low {
                    relaxed
                } else {
                    relaxed + (nominal - relaxed) * (power - p_low) / (p_high - p_low)
                }
            }
        }
    }
}

/// One strategy: weights, AO envelope and decision-variable flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    /// AO reference, %.
    pub ao_ref: f64,
    pub weights: Weights,
    pub ao_bound: BoundSchedule,
    /// Whether per-block turbine ramp rates are decision variables.
    pub optimize_turbine_rate: bool,
    /// Turbine ramp-rate bounds, %NP/min.
    pub rate_bounds: [f64; 2],
    /// Requested final power, %NP (rate strategy only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
}

fn check_ao_ref(ao_ref: f64) -> Result<(), StrategyError> {
    if ao_ref.is_finite() && ao_ref.abs() <= MAX_AO_REF {
        Ok(())
    } else {
        Err(StrategyError::AoRefOutOfRange(ao_ref))
    }
}

fn check_rate_bounds(b: [f64; 2]) -> Result<(), StrategyError> {
    let ok = b.iter().all(|v| v.is_finite())
        && b[0] >= RATE_LIMITS[0]
        && b[1] <= RATE_LIMITS[1]
        && b[0] <= b[1];
    if ok {
        Ok(())
    } else {
        Err(StrategyError::RateBounds(b[0], b[1]))
    }
}

/// Keep the AO close to its reference under a constant ±5 % envelope.
pub fn make_ao_control(ao_ref: f64) -> Result<StrategySpec, StrategyError> {
    check_ao_ref(ao_ref)?;
    Ok(StrategySpec {
        kind: StrategyKind::AoControl,
        ao_ref,
        weights: Weights {
            w_ao: 1.0,
            w_u: 0.01,
            w_eff: 0.0,
            w_track: 0.0,
            w_t: 0.0,
        },
        ao_bound: BoundSchedule::Constant {
            bound: NOMINAL_AO_BOUND,
        },
        optimize_turbine_rate: false,
        rate_bounds: RATE_LIMITS,
        target: None,
    })
}

/// Find the fastest turbine ramps toward `target` (%NP) that keep the AO
/// inside the nominal envelope.
pub fn make_fastest_rates(target: f64, rate_bounds: [f64; 2]) -> Result<StrategySpec, StrategyError> {
    if !(target.is_finite() && (15.0..=100.0).contains(&target)) {
        return Err(StrategyError::Target(target));
    }
    check_rate_bounds(rate_bounds)?;
    Ok(StrategySpec {
        kind: StrategyKind::FastestRates,
        ao_ref: 0.0,
        weights: Weights {
            w_ao: 0.05,
            w_u: 0.001,
            w_eff: 0.0,
            w_track: 100.0,
            w_t: 0.0,
        },
        ao_bound: BoundSchedule::Constant {
            bound: NOMINAL_AO_BOUND,
        },
        optimize_turbine_rate: true,
        rate_bounds,
        target: Some(target),
    })
}

/// Steer the axial iodine and xenon imbalances to their equilibrium values,
/// accepting larger AO deviations on the way.
pub fn make_oscillation_cancel(ao_ref: f64) -> Result<StrategySpec, StrategyError> {
    check_ao_ref(ao_ref)?;
    Ok(StrategySpec {
        kind: StrategyKind::OscillationCancel,
        ao_ref,
        weights: Weights {
            w_ao: 0.0005,
            w_u: 0.001,
            w_eff: 0.0,
            w_track: 0.0,
            w_t: 2.0e5,
        },
        ao_bound: BoundSchedule::Constant {
            bound: OSCILLATION_AO_BOUND,
        },
        optimize_turbine_rate: false,
        rate_bounds: RATE_LIMITS,
        target: None,
    })
}

/// Minimize injected water, relaxing the AO envelope at low power.
pub fn make_effluent_min(low_power_bound: f64) -> Result<StrategySpec, StrategyError> {
    if !(low_power_bound.is_finite() && low_power_bound >= NOMINAL_AO_BOUND) {
        return Err(StrategyError::LowPowerBound(low_power_bound));
    }
    Ok(StrategySpec {
        kind: StrategyKind::EffluentMin,
        ao_ref: 0.0,
        weights: Weights {
            w_ao: 0.05,
            w_u: 0.001,
            w_eff: 0.0005,
            w_track: 0.0,
            w_t: 0.0,
        },
        ao_bound: BoundSchedule::LowPowerRelaxed {
            nominal: NOMINAL_AO_BOUND,
            relaxed: low_power_bound,
            p_low: RELAX_LOW_POWER,
            p_high: RELAX_HIGH_POWER,
        },
        optimize_turbine_rate: false,
        rate_bounds: RATE_LIMITS,
        target: None,
    })
}

/// AO-deviation bound (%) of `spec` at normalized `power`.
pub fn constraint_envelope(spec: &StrategySpec, power: f64) -> f64 {
    spec.ao_bound.eval(power.clamp(0.15, 1.0))
}

/// Numeric overrides accepted from scenario files and the service API.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyOverrides {
    #[serde(default)]
    pub ao_ref: Option<f64>,
    #[serde(default)]
    pub target: Option<f64>,
    #[serde(default)]
    pub rate_min: Option<f64>,
    #[serde(default)]
    pub rate_max: Option<f64>,
    #[serde(default)]
    pub low_power_bound: Option<f64>,
    #[serde(default)]
    pub w_ao: Option<f64>,
    #[serde(default)]
    pub w_u: Option<f64>,
    #[serde(default)]
    pub w_eff: Option<f64>,
    #[serde(default)]
    pub w_track: Option<f64>,
    #[serde(default)]
    pub w_t: Option<f64>,
}

impl StrategySpec {
    /// Build a strategy of `kind` with `overrides` applied; `default_ao_ref`
    /// is used when no AO reference is given.
    pub fn from_kind(
        kind: StrategyKind,
        overrides: &StrategyOverrides,
        default_ao_ref: f64,
    ) -> Result<StrategySpec, StrategyError> {
        let ao_ref = overrides.ao_ref.unwrap_or(default_ao_ref);
        let mut spec = match kind {
            StrategyKind::AoControl => make_ao_control(ao_ref)?,
            StrategyKind::OscillationCancel => make_oscillation_cancel(ao_ref)?,
            StrategyKind::FastestRates => {
                let bounds = [
                    overrides.rate_min.unwrap_or(RATE_LIMITS[0]),
                    overrides.rate_max.unwrap_or(RATE_LIMITS[1]),
                ];
                make_fastest_rates(overrides.target.unwrap_or(100.0), bounds)?.with_ao_ref(ao_ref)?
            }
            StrategyKind::EffluentMin => {
                make_effluent_min(overrides.low_power_bound.unwrap_or(DEFAULT_LOW_POWER_BOUND))?
                    .with_ao_ref(ao_ref)?
            }
        };
        let w = &mut spec.weights;
        for (slot, value) in [
            (&mut w.w_ao, overrides.w_ao),
            (&mut w.w_u, overrides.w_u),
            (&mut w.w_eff, overrides.w_eff),
            (&mut w.w_track, overrides.w_track),
            (&mut w.w_t, overrides.w_t),
        ] {
            if let Some(v) = value {
                *slot = v;
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_ao_ref(mut self, ao_ref: f64) -> Result<StrategySpec, StrategyError> {
        check_ao_ref(ao_ref)?;
        self.ao_ref = ao_ref;
        Ok(self)
    }

    /// Check the per-kind invariants: exactly the kind's weights are
    /// positive, envelopes never tighter than the nominal bound, and rate
    /// bounds inside the absolute limits.
    pub fn validate(&self) -> Result<(), StrategyError> {
        check_ao_ref(self.ao_ref)?;
        check_rate_bounds(self.rate_bounds)?;
        for ((name, value), active) in self.weights.as_array().into_iter().zip(self.kind.active_weights()) {
            if !value.is_finite() || value < 0.0 {
                return Err(StrategyError::Weight(name, format!("{value} must be finite and >= 0")));
            }
            if active && value == 0.0 {
                return Err(StrategyError::Weight(name, format!("must be > 0 for {}", self.kind)));
            }
            if !active && value != 0.0 {
                return Err(StrategyError::Weight(name, format!("must be 0 for {}", self.kind)));
            }
        }
        match self.ao_bound {
            BoundSchedule::Constant { bound } => {
                if !(bound >= NOMINAL_AO_BOUND) {
                    return Err(StrategyError::LowPowerBound(bound));
                }
            }
            BoundSchedule::LowPowerRelaxed {
                nominal,
                relaxed,
                p_low,
                p_high,
            } => {
                if !(nominal >= NOMINAL_AO_BOUND) || !(relaxed >= nominal) {
                    return Err(StrategyError::LowPowerBound(relaxed));
                }
                if !(p_low < p_high) {
                    return Err(StrategyError::Weight("ao_bound", "p_low must be below p_high".into()));
                }
            }
        }
        if self.optimize_turbine_rate != (self.kind == StrategyKind::FastestRates) {
            return Err(StrategyError::Weight(
                "optimize_turbine_rate",
                "only the rate strategy optimizes turbine rates".into(),
            ));
        }
        if let Some(t) = self.target {
            if !(15.0..=100.0).contains(&t) {
                return Err(StrategyError::Target(t));
            }
        }
        Ok(())
    }

    /// Normalized power the tracking term pulls toward (rate strategy).
    pub fn target_power(&self) -> Option<f64> {
        self.target.map(|t| t / 100.0)
    }
}
