//! Right-hand side of the two-node core model and its RK4 step.
//!
//! Core power and axial offset are algebraic: power comes from a static
//! reactivity balance against a Doppler stiffness, and the axial offset from a
//! shape balance against an axial stiffness. Only iodine, xenon, boron, rod
//! position, coolant temperature and the effluent tally are integrated.

use super::params::PlantParams;
use super::profile::move_toward;
use super::state::{node_powers, ControlInput, CoreState};
use crate::error::PlantError;

/// Upper clamp of the algebraic core power.
pub const N_MAX: f64 = 1.2;

/// Total reactivity deviation from the full-power reference, pcm.
pub fn reactivity(c_b: f64, z: f64, x_t: f64, x_b: f64, t_dev: f64, params: &PlantParams) -> f64 {
    let rho_rod = params.w_rod * (z - params.z_ref);
    let rho_boron = -params.w_b * (c_b - params.c_b_crit_fp);
    let rho_xenon = -params.w_x * (0.5 * (x_t + x_b) - 1.0);
    rho_rod + rho_boron + rho_xenon + params.alpha_m * t_dev
}

/// Normalized core power from the reactivity balance, clamped to [0, 1.2].
pub fn criticality_closure(c_b: f64, z: f64, x_t: f64, x_b: f64, t_dev: f64, params: &PlantParams) -> f64 {
    let n = 1.0 + reactivity(c_b, z, x_t, x_b, t_dev, params) / params.gamma_d;
    n.clamp(0.0, N_MAX)
}

/// Axial offset (%) from rod insertion and the xenon imbalance.
pub fn axial_shape(z: f64, x_t: f64, x_b: f64, params: &PlantParams) -> f64 {
    let rod = -params.w_ax * (params.z_max - z);
    let xenon = params.w_xax * (x_b - x_t);
    let ao = params.ao_nat + (rod + xenon) / params.gamma_ao;
    ao.clamp(-100.0, 100.0)
}

/// Axial offset from node powers.
pub fn axial_offset(p_t: f64, p_b: f64) -> f64 {
    100.0 * (p_t - p_b) / (p_t + p_b)
}

/// Rod bank speed, steps/min (negative inserts).
///
/// Zero inside the deadband; beyond it the speed rises smoothly (smoothstep)
/// over `rod_band` and saturates at `v_rod`. Hot deviations insert, cold
/// ones withdraw, and no move is commanded past either stop. The law is
/// continuously differentiable in `t_dev`, which keeps the predicted
/// trajectories smooth in the injection plan.
pub fn rod_controller(t_dev: f64, z: f64, params: &PlantParams) -> f64 {
    let rate = rod_speed(t_dev, params);
    if (rate > 0.0 && z >= params.z_max) || (rate < 0.0 && z <= 0.0) {
        0.0
    } else {
        rate
    }
}

/// The rod speed law without the stops.
fn rod_speed(t_dev: f64, params: &PlantParams) -> f64 {
    let excess = t_dev.abs() - params.deadband;
    if excess <= 0.0 {
        return 0.0;
    }
    let u = (excess / params.rod_band).min(1.0);
    let speed = params.v_rod * u * u * (3.0 - 2.0 * u);
    if t_dev > 0.0 {
        -speed
    } else {
        speed
    }
}

/// Integrated components, in this order.
pub(crate) const COMPONENTS: [&str; 8] = ["i_t", "i_b", "x_t", "x_b", "C_B", "z", "T_dev", "m_eff"];

#[derive(Debug, Clone, Copy)]
pub(crate) struct Vector(pub [f64; 8]);

impl Vector {
    fn from_state(s: &CoreState) -> Self {
        Vector([s.i_t, s.i_b, s.x_t, s.x_b, s.c_b, s.z, s.t_dev, s.m_eff])
    }

    fn axpy(&self, a: f64, d: &Vector) -> Vector {
        let mut out = self.0;
        for (o, di) in out.iter_mut().zip(d.0.iter()) {
            *o += a * di;
        }
        Vector(out)
    }
}

/// Algebraic outputs (n, AO) for an integrated vector.
fn algebraic(y: &Vector, params: &PlantParams) -> (f64, f64) {
    let [_, _, x_t, x_b, c_b, z, t_dev, _] = y.0;
    let n = criticality_closure(c_b, z, x_t, x_b, t_dev, params);
    let ao = axial_shape(z, x_t, x_b, params);
    (n, ao)
}

/// Node iodine/xenon derivatives for given node fluxes.
pub(crate) fn poison_rates(i: f64, x: f64, p: f64, params: &PlantParams) -> (f64, f64) {
    let di = params.lambda_i * (p - i);
    let prod = (params.lambda_x + params.sigma_bar) * (params.gamma_x * p + params.gamma_i * i)
        / (params.gamma_x + params.gamma_i);
    let dx = prod - (params.lambda_x + params.sigma_bar * p) * x;
    (di, dx)
}

/// Time derivatives; with `stops` false the rods move as if the bank had no
/// end stops (used only while the bank is strictly between them).
fn derivatives(
    y: &Vector,
    q_eff: f64,
    p_turb: f64,
    t: f64,
    params: &PlantParams,
    stops: bool,
) -> Result<Vector, PlantError> {
    let [i_t, i_b, x_t, x_b, c_b, z, t_dev, _] = y.0;
    let (n, ao) = algebraic(y, params);
    let (p_t, p_b) = node_powers(n, ao);
    let (di_t, dx_t) = poison_rates(i_t, x_t, p_t, params);
    let (di_b, dx_b) = poison_rates(i_b, x_b, p_b, params);
    let dc_b = if q_eff >= 0.0 {
        -(q_eff / params.m_p) * c_b
    } else {
        (-q_eff / params.m_p) * (params.c_stock - c_b)
    };
    let dz = if stops {
        rod_controller(t_dev, z, params)
    } else {
        rod_speed(t_dev, params)
    } / 60.0;
    let dt_dev = (params.p_nom * (n - p_turb) - params.k_sg * t_dev) / params.c_th;
    let dm = q_eff.abs();
    let d = Vector([di_t, di_b, dx_t, dx_b, dc_b, dz, dt_dev, dm]);
    if let Some(k) = d.0.iter().position(|v| !v.is_finite()) {
        return Err(PlantError::NonFinite {
            component: COMPONENTS[k],
            t,
        });
    }
    Ok(d)
}

/// Index of the rod position in [`Vector`].
const Z: usize = 5;

/// Time within `(0, h)` at which the rod position reaches `stop`, by a few
/// secant iterations on `z_at(dt)` starting from `z(0) = z0`.
fn crossing(
    z0: f64,
    stop: f64,
    h: f64,
    z_at: impl Fn(f64) -> Result<f64, PlantError>,
) -> Result<f64, PlantError> {
    let (mut a, mut za) = (0.0, z0 - stop);
    let (mut b, mut zb) = (h, z_at(h)? - stop);
    for _ in 0..4 {
        if zb == za {
            break;
        }
        let c = (b - zb * (b - a) / (zb - za)).clamp(0.0, h);
        let zc = z_at(c)? - stop;
        (a, za, b, zb) = (b, zb, c, zc);
        if zc.abs() < 1e-9 {
            break;
        }
    }
    Ok(b.clamp(0.0, h))
}

/// Advance the plant by one classical RK4 step of length `h`.
///
/// The injection command enters the CVCS delay line at the step start; the
/// turbine demand ramps toward `input.p_target` at `input.r_turb`.
pub fn step(state: &CoreState, input: &ControlInput, h: f64, params: &PlantParams) -> Result<CoreState, PlantError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(PlantError::InvalidInput(format!("step size must be > 0, got {h}")));
    }
    if !(input.q >= -params.w_bor_max - 1e-12 && input.q <= params.w_dil_max + 1e-12) {
        return Err(PlantError::InvalidInput(format!(
            "injection {} kg/s outside [-{}, {}]",
            input.q, params.w_bor_max, params.w_dil_max
        )));
    }
    let mut next = state.clone();
    let q_eff = next.cvcs.advance(state.t, input.q, params.tau_d);

    let t0 = state.t;
    let p0 = state.p_turb;
    let ramp = input.r_turb.max(0.0) / 6000.0;
    let turbine = |s: f64| move_toward(p0, input.p_target, ramp * s);

    let y0 = Vector::from_state(state);
    let rk4 = |y: &Vector, s: f64, dt: f64, stops: bool| -> Result<Vector, PlantError> {
        let (sm, se) = (s + 0.5 * dt, s + dt);
        let k1 = derivatives(y, q_eff, turbine(s), t0 + s, params, stops)?;
        let k2 = derivatives(&y.axpy(0.5 * dt, &k1), q_eff, turbine(sm), t0 + sm, params, stops)?;
        let k3 = derivatives(&y.axpy(0.5 * dt, &k2), q_eff, turbine(sm), t0 + sm, params, stops)?;
        let k4 = derivatives(&y.axpy(dt, &k3), q_eff, turbine(se), t0 + se, params, stops)?;
        let mut out = y.0;
        for (j, v) in out.iter_mut().enumerate() {
            *v += dt / 6.0 * (k1.0[j] + 2.0 * k2.0[j] + 2.0 * k3.0[j] + k4.0[j]);
        }
        Ok(Vector(out))
    };

    // The rod speed drops to zero at either stop, a kink RK4 cannot resolve
    // inside a step. A step that reaches a stop is split at the crossing so
    // that each part integrates a smooth field.
    let mut y = rk4(&y0, 0.0, h, false)?;
    let z0 = y0.0[Z];
    let stop = if y.0[Z] > params.z_max {
        Some(params.z_max)
    } else if y.0[Z] < 0.0 {
        Some(0.0)
    } else {
        None
    };
    if let Some(stop) = stop {
        if (z0 - stop).abs() > 1e-12 && (z0 - stop).signum() != (y.0[Z] - stop).signum() {
            let hit = crossing(z0, stop, h, |dt| Ok(rk4(&y0, 0.0, dt, false)?.0[Z]))?;
            let mut mid = rk4(&y0, 0.0, hit, false)?;
            mid.0[Z] = stop;
            y = rk4(&mid, hit, h - hit, true)?;
        } else {
            y = rk4(&y0, 0.0, h, true)?;
        }
    }
    let y = y.0;
    if let Some(k) = y.iter().position(|v| !v.is_finite()) {
        return Err(PlantError::NonFinite {
            component: COMPONENTS[k],
            t: t0,
        });
    }
    let [i_t, i_b, x_t, x_b, c_b, z, t_dev, m_eff] = y;
    next.i_t = i_t.max(0.0);
    next.i_b = i_b.max(0.0);
    next.x_t = x_t.max(0.0);
    next.x_b = x_b.max(0.0);
    next.c_b = c_b.max(0.0);
    next.z = z.clamp(0.0, params.z_max);
    next.t_dev = t_dev;
    next.m_eff = m_eff.max(state.m_eff);
    next.t = t0 + h;
    next.p_turb = turbine(h);
    refresh_algebraic(&mut next, params);
    Ok(next)
}

/// Recompute `n` and `AO` from the integrated fields.
pub fn refresh_algebraic(state: &mut CoreState, params: &PlantParams) {
    state.n = criticality_closure(state.c_b, state.z, state.x_t, state.x_b, state.t_dev, params);
    state.ao = axial_shape(state.z, state.x_t, state.x_b, params);
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params() -> PlantParams {
        PlantParams::boc()
    }

    #[test]
    fn closure_reference_point() {
        let p = params();
        let n = criticality_closure(p.c_b_crit_fp, p.z_ref, 1.0, 1.0, 0.0, &p);
        assert_eq!(n, 1.0);
    }

    #[test]
    fn closure_boron_deficit() {
        let p = params();
        let n = criticality_closure(p.c_b_crit_fp - 10.0, p.z_ref, 1.0, 1.0, 0.0, &p);
        assert_relative_eq!(n, 1.0 + 80.0 / 1500.0, epsilon = 1e-12);
        assert_relative_eq!(n, 1.0533, epsilon = 1e-4);
    }

    #[test]
    fn closure_xenon_excess() {
        let p = params();
        let n = criticality_closure(p.c_b_crit_fp, p.z_ref, 1.1, 1.1, 0.0, &p);
        assert_relative_eq!(n, 1.0 - 280.0 / 1500.0, epsilon = 1e-12);
        assert_relative_eq!(n, 0.8133, epsilon = 1e-4);
    }

    #[test]
    fn closure_is_clamped() {
        let p = params();
        assert_eq!(criticality_closure(0.0, p.z_max, 0.0, 0.0, 0.0, &p), N_MAX);
        assert_eq!(criticality_closure(5000.0, 0.0, 2.0, 2.0, 0.0, &p), 0.0);
    }

    #[test]
    fn shape_without_sources_is_natural() {
        let p = params();
        assert_eq!(axial_shape(p.z_max, 0.9, 0.9, &p), p.ao_nat);
    }

    #[test]
    fn shape_xenon_imbalance() {
        let mut p = params();
        p.w_xax = 1400.0;
        p.gamma_ao = 14.0;
        let ao = axial_shape(p.z_max, 1.0, 1.05, &p);
        assert_relative_eq!(ao, p.ao_nat + 5.0, epsilon = 1e-12);
    }

    #[test]
    fn ao_definition() {
        assert_relative_eq!(axial_offset(0.3, 0.2), 20.0, epsilon = 1e-12);
        let (pt, pb) = node_powers(0.8, 7.5);
        assert_relative_eq!(axial_offset(pt, pb), 7.5, epsilon = 1e-12);
    }

    #[test]
    fn rod_controller_law() {
        let p = params();
        assert_eq!(rod_controller(0.3, 200.0, &p), 0.0);
        assert_eq!(rod_controller(1.5, 200.0, &p), -p.v_rod);
        assert_eq!(rod_controller(-1.5, 200.0, &p), p.v_rod);
        assert_eq!(rod_controller(-1.5, p.z_max, &p), 0.0);
        assert_eq!(rod_controller(1.5, 0.0, &p), 0.0);
        // halfway through the band the speed is half the full speed
        let mid = rod_controller(p.deadband + 0.5 * p.rod_band, 100.0, &p);
        assert_relative_eq!(mid, -0.5 * p.v_rod, epsilon = 1e-12);
    }

    #[test]
    fn dilution_and_boration_rates() {
        let p = params();
        let y = Vector([1.0, 1.0, 1.0, 1.0, 1200.0, p.z_ref, 0.0, 0.0]);
        let d = derivatives(&y, 10.0, 1.0, 0.0, &p, true).unwrap();
        assert_relative_eq!(d.0[4], -0.048, epsilon = 1e-12);
        let b = derivatives(&y, -3.0, 1.0, 0.0, &p, true).unwrap();
        assert_relative_eq!(b.0[4], 0.0696, epsilon = 1e-12);
        assert_eq!(b.0[7], 3.0);
    }

    #[test]
    fn nonfinite_is_reported() {
        let p = params();
        let y = Vector([f64::NAN, 1.0, 1.0, 1.0, 1200.0, p.z_ref, 0.0, 0.0]);
        match derivatives(&y, 0.0, 1.0, 42.0, &p, true) {
            Err(PlantError::NonFinite { component, t }) => {
                assert_eq!(component, "i_t");
                assert_eq!(t, 42.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn step_rejects_out_of_range_flow() {
        let p = params();
        let s = crate::plant::equilibrium(1.0, p.z_ref, &p).unwrap();
        assert!(step(&s, &ControlInput::hold(12.0, 1.0), 10.0, &p).is_err());
        assert!(step(&s, &ControlInput::hold(-3.5, 1.0), 10.0, &p).is_err());
        assert!(step(&s, &ControlInput::hold(0.0, 1.0), 0.0, &p).is_err());
    }
}
