//! Physical coefficients, actuator limits and burnup presets.
//!
//! Every model symbol used by the plant lives in [`PlantParams`]. Presets are
//! stored as versioned TOML files under `presets/` and compiled into the
//! crate; [`PlantParams::preset`] parses them on demand.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ParamError;

const BOC_PRESET: &str = include_str!("../../presets/boc.toml");
const EOC80_PRESET: &str = include_str!("../../presets/eoc80.toml");

/// Current preset file format version.
pub const PRESET_VERSION: u32 = 1;

/// Point in the fuel cycle a preset describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Burnup {
    /// Beginning of cycle, high critical boron.
    #[serde(rename = "BOC")]
    Boc,
    /// 80 % through the cycle, low critical boron.
    #[serde(rename = "EOC80")]
    Eoc80,
}

impl Burnup {
    pub const ALL: [Burnup; 2] = [Burnup::Boc, Burnup::Eoc80];

    pub fn as_str(self) -> &'static str {
        match self {
            Burnup::Boc => "BOC",
            Burnup::Eoc80 => "EOC80",
        }
    }
}

impl fmt::Display for Burnup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Burnup {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "BOC" | "boc" => Ok(Burnup::Boc),
            "EOC80" | "eoc80" => Ok(Burnup::Eoc80),
            other => Err(ParamError::UnknownPreset(other.to_string())),
        }
    }
}

/// All plant model coefficients.
///
/// Field names in the preset files are the symbol names (`lambda_I`, `W_B`,
/// ...). Rates are per second unless the name says otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantParams {
    /// Iodine decay constant, 1/s.
    #[serde(rename = "lambda_I")]
    pub lambda_i: f64,
    /// Xenon decay constant, 1/s.
    #[serde(rename = "lambda_X")]
    pub lambda_x: f64,
    /// Iodine fission yield.
    #[serde(rename = "gamma_I")]
    pub gamma_i: f64,
    /// Direct xenon fission yield.
    #[serde(rename = "gamma_X")]
    pub gamma_x: f64,
    /// Xenon burnup rate at full power (sigma_X * phi_0), 1/s.
    pub sigma_bar: f64,
    /// Boron differential worth, pcm/ppm.
    #[serde(rename = "W_B")]
    pub w_b: f64,
    /// Mean xenon worth, pcm per unit normalized xenon.
    #[serde(rename = "W_X")]
    pub w_x: f64,
    /// Axial xenon imbalance worth, pcm per unit (x_b - x_t).
    #[serde(rename = "W_Xax")]
    pub w_xax: f64,
    /// Moderator temperature coefficient, pcm/degC.
    #[serde(rename = "alpha_M")]
    pub alpha_m: f64,
    /// Power (Doppler) stiffness, pcm per unit normalized power.
    #[serde(rename = "gamma_D")]
    pub gamma_d: f64,
    /// Axial shape stiffness, pcm per %AO.
    #[serde(rename = "gamma_AO")]
    pub gamma_ao: f64,
    /// Rod axial imbalance worth, pcm per step of insertion.
    pub w_ax: f64,
    /// Rod mean differential worth, pcm/step.
    pub w_rod: f64,
    /// Fully withdrawn rod position, steps.
    pub z_max: f64,
    /// Rod position at which `C_B_crit_fp` is critical at full power, steps.
    pub z_ref: f64,
    /// Rod speed, steps/min.
    pub v_rod: f64,
    /// Temperature deadband of the rod controller, degC.
    pub deadband: f64,
    /// Width of the band beyond the deadband over which the rod speed ramps
    /// up to `v_rod`, degC.
    pub rod_band: f64,
    /// Operating limit on the coolant temperature deviation, degC.
    #[serde(rename = "T_dev_max")]
    pub t_dev_max: f64,
    /// Primary coolant mass, kg.
    #[serde(rename = "M_p")]
    pub m_p: f64,
    /// Boration stock concentration, ppm.
    #[serde(rename = "C_stock")]
    pub c_stock: f64,
    /// CVCS transport delay, s.
    pub tau_d: f64,
    /// Effective thermal capacity, MJ/degC.
    #[serde(rename = "C_th")]
    pub c_th: f64,
    /// Steam generator temperature stiffness, MW/degC.
    #[serde(rename = "K_sg")]
    pub k_sg: f64,
    /// Nominal thermal power, MW.
    #[serde(rename = "P_nom")]
    pub p_nom: f64,
    /// Maximum dilution flow, kg/s.
    pub w_dil_max: f64,
    /// Maximum boration flow, kg/s.
    pub w_bor_max: f64,
    /// Cycle fraction in [0, 1].
    pub burnup: f64,
    /// Critical boron at full power with rods at `z_ref`, ppm.
    #[serde(rename = "C_B_crit_fp")]
    pub c_b_crit_fp: f64,
    /// Natural axial offset at reference conditions, %.
    #[serde(rename = "AO_nat")]
    pub ao_nat: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PresetHeader {
    version: u32,
    name: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PresetFile {
    preset: PresetHeader,
    params: PlantParams,
}

impl PlantParams {
    /// Parameters of a bundled burnup preset.
    pub fn preset(burnup: Burnup) -> Self {
        let text = match burnup {
            Burnup::Boc => BOC_PRESET,
            Burnup::Eoc80 => EOC80_PRESET,
        };
        // bundled presets are checked by the test suite
        Self::from_preset_str(text).expect("bundled preset is valid")
    }

    pub fn boc() -> Self {
        Self::preset(Burnup::Boc)
    }

    pub fn eoc80() -> Self {
        Self::preset(Burnup::Eoc80)
    }

    /// Parse and validate a preset file.
    pub fn from_preset_str(text: &str) -> Result<Self, ParamError> {
        let file: PresetFile = toml::from_str(text).map_err(|e| ParamError::Parse(e.to_string()))?;
        if file.preset.version != PRESET_VERSION {
            return Err(ParamError::Version {
                found: file.preset.version,
                expected: PRESET_VERSION,
            });
        }
        file.params.validate()?;
        Ok(file.params)
    }

    /// Render as a preset file.
    pub fn to_preset_string(&self, name: &str) -> String {
        let file = PresetFile {
            preset: PresetHeader {
                version: PRESET_VERSION,
                name: name.to_string(),
            },
            params: self.clone(),
        };
        toml::to_string(&file).expect("params serialize")
    }

    /// Check sign and range invariants.
    pub fn validate(&self) -> Result<(), ParamError> {
        let positive = [
            ("lambda_I", self.lambda_i),
            ("lambda_X", self.lambda_x),
            ("gamma_I", self.gamma_i),
            ("gamma_X", self.gamma_x),
            ("sigma_bar", self.sigma_bar),
            ("W_B", self.w_b),
            ("W_X", self.w_x),
            ("W_Xax", self.w_xax),
            ("gamma_D", self.gamma_d),
            ("gamma_AO", self.gamma_ao),
            ("w_ax", self.w_ax),
            ("w_rod", self.w_rod),
            ("z_max", self.z_max),
            ("v_rod", self.v_rod),
            ("deadband", self.deadband),
            ("rod_band", self.rod_band),
            ("T_dev_max", self.t_dev_max),
            ("M_p", self.m_p),
            ("C_stock", self.c_stock),
            ("tau_d", self.tau_d),
            ("C_th", self.c_th),
            ("P_nom", self.p_nom),
            ("w_dil_max", self.w_dil_max),
            ("w_bor_max", self.w_bor_max),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ParamError::Invalid {
                    field: name,
                    reason: format!("must be finite and > 0, got {v}"),
                });
            }
        }
        if !(self.alpha_m.is_finite() && self.alpha_m < 0.0) {
            return Err(ParamError::Invalid {
                field: "alpha_M",
                reason: format!("must be negative, got {}", self.alpha_m),
            });
        }
        if !(self.k_sg.is_finite() && self.k_sg >= 0.0) {
            return Err(ParamError::Invalid {
                field: "K_sg",
                reason: format!("must be >= 0, got {}", self.k_sg),
            });
        }
        if !(0.0..=1.0).contains(&self.burnup) {
            return Err(ParamError::Invalid {
                field: "burnup",
                reason: format!("must lie in [0, 1], got {}", self.burnup),
            });
        }
        if !(300.0..=900.0).contains(&self.tau_d) {
            return Err(ParamError::Invalid {
                field: "tau_d",
                reason: format!("must lie in [300, 900] s, got {}", self.tau_d),
            });
        }
        if !(0.0..=self.z_max).contains(&self.z_ref) {
            return Err(ParamError::Invalid {
                field: "z_ref",
                reason: format!("must lie in [0, z_max], got {}", self.z_ref),
            });
        }
        if !(self.c_b_crit_fp.is_finite() && self.c_b_crit_fp >= 0.0) {
            return Err(ParamError::Invalid {
                field: "C_B_crit_fp",
                reason: format!("must be >= 0, got {}", self.c_b_crit_fp),
            });
        }
        if self.c_stock <= self.c_b_crit_fp {
            return Err(ParamError::Invalid {
                field: "C_stock",
                reason: "must exceed the critical boron concentration".into(),
            });
        }
        if !self.ao_nat.is_finite() {
            return Err(ParamError::Invalid {
                field: "AO_nat",
                reason: "must be finite".into(),
            });
        }
        Ok(())
    }

    /// Rod speed in steps/s.
    pub fn rod_speed(&self) -> f64 {
        self.v_rod / 60.0
    }

    /// Equilibrium xenon (normalized) at node power `p`.
    pub fn xenon_eq(&self, p: f64) -> f64 {
        (self.lambda_x + self.sigma_bar) * p / (self.lambda_x + self.sigma_bar * p)
    }
}
