use super::dynamics::{axial_shape, criticality_closure};
use super::params::PlantParams;
use super::state::{node_powers, CoreState, CvcsQueue};
use crate::error::PlantError;

const SHAPE_MAX_ITER: usize = 200;
const SHAPE_TOL: f64 = 1e-13;

/// Steady state at `power_level` with the rod bank parked at `z_eq`.
///
/// Iodine and xenon sit at their node equilibria, the axial offset is the
/// self-consistent fixed point of the shape balance, and boron is solved from
/// the reactivity balance so that the core power equals `power_level`.
pub fn equilibrium(power_level: f64, z_eq: f64, params: &PlantParams) -> Result<CoreState, PlantError> {
    if !(0.15..=1.0 + 1e-12).contains(&power_level) {
        return Err(PlantError::InvalidInput(format!(
            "equilibrium power {power_level} outside [0.15, 1]"
        )));
    }
    if !(0.0..=params.z_max).contains(&z_eq) {
        return Err(PlantError::InvalidInput(format!(
            "rod position {z_eq} outside [0, {}]",
            params.z_max
        )));
    }
    let ao = shape_fixed_point(power_level, z_eq, params)?;
    let (p_t, p_b) = node_powers(power_level, ao);
    let x_t = params.xenon_eq(p_t);
    let x_b = params.xenon_eq(p_b);

    // boron that closes the reactivity balance at n = power_level
    let rho_rod = params.w_rod * (z_eq - params.z_ref);
    let rho_xe = -params.w_x * (0.5 * (x_t + x_b) - 1.0);
    let c_b = params.c_b_crit_fp + (rho_rod + rho_xe - params.gamma_d * (power_level - 1.0)) / params.w_b;
    if c_b < 0.0 {
        return Err(PlantError::NoCriticalBoron { c_b, power: power_level });
    }

    let state = CoreState {
        t: 0.0,
        i_t: p_t,
        i_b: p_b,
        x_t,
        x_b,
        c_b,
        z: z_eq,
        t_dev: 0.0,
        n: criticality_closure(c_b, z_eq, x_t, x_b, 0.0, params),
        ao: axial_shape(z_eq, x_t, x_b, params),
        p_turb: power_level,
        m_eff: 0.0,
        cvcs: CvcsQueue::default(),
    };
    Ok(state)
}

/// Solve `AO = shape(x_eq(p_t(AO)), x_eq(p_b(AO)), z)` by safeguarded Newton.
///
/// The residual is strictly increasing in AO, so a bracket on [-100, 100]
/// always contains the unique root.
fn shape_fixed_point(power: f64, z: f64, params: &PlantParams) -> Result<f64, PlantError> {
    let residual = |ao: f64| {
        let (p_t, p_b) = node_powers(power, ao);
        ao - axial_shape(z, params.xenon_eq(p_t), params.xenon_eq(p_b), params)
    };
    let (mut lo, mut hi) = (-99.0, 99.0);
    if residual(lo) > 0.0 || residual(hi) < 0.0 {
        return Err(PlantError::ShapeNotConverged { iterations: 0 });
    }
    let mut ao = params.ao_nat.clamp(lo, hi);
    for it in 0..SHAPE_MAX_ITER {
        let r = residual(ao);
        if !r.is_finite() {
            return Err(PlantError::ShapeNotConverged { iterations: it });
        }
        if r.abs() < SHAPE_TOL {
            return Ok(ao);
        }
        if r > 0.0 {
            hi = ao;
        } else {
            lo = ao;
        }
        let dh = 1e-6;
        let slope = (residual(ao + dh) - residual(ao - dh)) / (2.0 * dh);
        let newton = ao - r / slope;
        ao = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-14 {
            return Ok(ao);
        }
    }
    Err(PlantError::ShapeNotConverged { iterations: SHAPE_MAX_ITER })
}

/// Iodine and xenon axial imbalances (top minus bottom) of the steady state
/// at `power` whose axial offset is `ao`.
pub fn equilibrium_imbalances(power: f64, ao: f64, params: &PlantParams) -> (f64, f64) {
    let (p_t, p_b) = node_powers(power, ao);
    (p_t - p_b, params.xenon_eq(p_t) - params.xenon_eq(p_b))
}
