//! The finite-horizon program in normalized decision coordinates.
//!
//! Decision vector: one injection value per block, followed by one turbine
//! rate per block when the strategy optimizes rates. Every coordinate is
//! scaled to [0, 1] over its box.
//!
//! Apart from the effluent term, the merit is a sum of squared residuals
//! (AO deviation, effort, tracking, terminal imbalance and the augmented
//! Lagrangian penalty of the path constraints), which lets the solver build a
//! Gauss-Newton model from a finite-difference Jacobian of the residuals.

use super::objective::{running_imbalance_fraction, stage_terms, terminal_term, Reference};
use super::plan::{ControlBlock, ControlPlan};
use super::predict::{input_at, step_ends, step_to};
use crate::error::PlantError;
use crate::plant::{CoreState, PlantParams, PowerProfile};
use crate::strategy::{constraint_envelope, StrategySpec};

/// Smoothing width of `|q|` in the effluent term of the merit, kg/s.
pub(crate) const EFFLUENT_SMOOTHING: f64 = 0.01;

/// Augmented Lagrangian state of the path constraints (two per sample:
/// AO envelope, then coolant temperature).
#[derive(Debug, Clone)]
pub(crate) struct Multipliers {
    pub lambda: Vec<f64>,
    pub mu: f64,
}

impl Multipliers {
    /// No penalty at all: the merit reduces to the (smoothed) objective.
    pub fn none(samples: usize) -> Self {
        Multipliers {
            lambda: vec![0.0; 2 * samples],
            mu: 0.0,
        }
    }

    /// Constant part of the penalty, `-sum(lambda^2) / (2 mu)`.
    fn constant(&self) -> f64 {
        if self.mu > 0.0 {
            -self.lambda.iter().map(|l| l * l).sum::<f64>() / (2.0 * self.mu)
        } else {
            0.0
        }
    }

    #[inline]
    fn residual(&self, j: usize, g: f64) -> f64 {
        if self.mu > 0.0 {
            (0.5 * self.mu).sqrt() * (g + self.lambda[j] / self.mu).max(0.0)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone)]
struct Checkpoint {
    state: CoreState,
    cost: f64,
    sample: usize,
    residual: usize,
}

/// Result of one rollout.
#[derive(Debug, Clone)]
pub(crate) struct Evaluation {
    /// Exact objective of the plan.
    pub cost: f64,
    /// Penalized, smoothed merit the solver descends on.
    pub merit: f64,
    /// Constraint values per sample, interleaved: the tightened AO envelope
    /// `|AO_dev| - (bound - margin)` and `|T_dev| - T_dev_max`.
    pub constraints: Vec<f64>,
}

/// Merit, gradient and Gauss-Newton Hessian at one point.
#[derive(Debug, Clone)]
pub(crate) struct Model {
    pub eval: Evaluation,
    pub grad: Vec<f64>,
    pub hessian: Vec<Vec<f64>>,
}

pub(crate) struct Problem<'a> {
    pub init: &'a CoreState,
    pub params: &'a PlantParams,
    pub strategy: &'a StrategySpec,
    pub profile: &'a PowerProfile,
    pub reference: Reference,
    pub skeleton: ControlPlan,
    pub h: f64,
    pub margin: f64,
    /// First interval index of each block.
    block_start: Vec<usize>,
    /// Duration of each block, s.
    block_len: Vec<f64>,
    /// Number of prediction samples after the initial state.
    pub samples: usize,
    /// Square roots of the (AO, effort, tracking, terminal) weights.
    sqrt_w: [f64; 4],
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl<'a> Problem<'a> {
    pub fn new(
        init: &'a CoreState,
        params: &'a PlantParams,
        strategy: &'a StrategySpec,
        profile: &'a PowerProfile,
        skeleton: ControlPlan,
        h: f64,
        margin: f64,
    ) -> Self {
        let mut block_start = Vec::with_capacity(skeleton.blocks.len());
        let mut block_len = Vec::with_capacity(skeleton.blocks.len());
        let mut acc = 0;
        for b in &skeleton.blocks {
            block_start.push(acc);
            block_len.push(skeleton.boundary(acc + b.repeat) - skeleton.boundary(acc));
            acc += b.repeat;
        }
        let samples = (0..skeleton.intervals())
            .map(|k| step_ends(skeleton.boundary(k), skeleton.boundary(k + 1), h).count())
            .sum();
        let nb = skeleton.blocks.len();
        let mut lo = vec![-params.w_bor_max; nb];
        let mut hi = vec![params.w_dil_max; nb];
        if strategy.optimize_turbine_rate {
            lo.extend(std::iter::repeat(strategy.rate_bounds[0]).take(nb));
            hi.extend(std::iter::repeat(strategy.rate_bounds[1]).take(nb));
        }
        let w = &strategy.weights;
        Problem {
            init,
            params,
            strategy,
            profile,
            reference: Reference::new(strategy, profile, init.p_turb, params),
            skeleton,
            h,
            margin,
            block_start,
            block_len,
            samples,
            sqrt_w: [w.w_ao.sqrt(), w.w_u.sqrt(), w.w_track.sqrt(), w.w_t.sqrt()],
            lo,
            hi,
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    fn blocks(&self) -> usize {
        self.skeleton.blocks.len()
    }

    /// Block index that coordinate `i` belongs to.
    fn block_of(&self, i: usize) -> usize {
        i % self.blocks()
    }

    /// Physical width of coordinate `i`'s box.
    pub fn span(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    pub fn to_plan(&self, v: &[f64]) -> ControlPlan {
        let nb = self.blocks();
        let mut plan = self.skeleton.clone();
        for (b, block) in plan.blocks.iter_mut().enumerate() {
            let q = self.lo[b] + v[b] * self.span(b);
            let r_turb = self
                .strategy
                .optimize_turbine_rate
                .then(|| self.lo[nb + b] + v[nb + b] * self.span(nb + b));
            *block = ControlBlock {
                repeat: block.repeat,
                q,
                r_turb,
            };
        }
        plan
    }

    /// Normalized coordinates of `plan` (projected onto the box). Rates
    /// missing from the plan start at the lower rate bound.
    pub fn from_plan(&self, plan: &ControlPlan) -> Vec<f64> {
        let nb = self.blocks();
        let mut v = vec![0.0; self.dim()];
        for (b, block) in plan.blocks.iter().enumerate().take(nb) {
            v[b] = (block.q - self.lo[b]) / self.span(b);
            if self.strategy.optimize_turbine_rate {
                let r = block.r_turb.unwrap_or(self.lo[nb + b]);
                let span = self.span(nb + b);
                v[nb + b] = if span > 0.0 { (r - self.lo[nb + b]) / span } else { 0.0 };
            }
        }
        project(&mut v);
        v
    }

    fn interval_values(&self, v: &[f64]) -> Vec<(f64, Option<f64>)> {
        self.to_plan(v).expand()
    }

    /// Effluent term of the merit: exact value, smoothed value, and the
    /// gradient and diagonal curvature of the smoothed value.
    fn effluent(&self, v: &[f64]) -> (f64, f64, Vec<f64>, Vec<f64>) {
        let w = self.strategy.weights.w_eff;
        let eps = EFFLUENT_SMOOTHING;
        let mut grad = vec![0.0; self.dim()];
        let mut curv = vec![0.0; self.dim()];
        let (mut exact, mut smooth) = (0.0, 0.0);
        if w == 0.0 {
            return (exact, smooth, grad, curv);
        }
        for b in 0..self.blocks() {
            let q = self.lo[b] + v[b] * self.span(b);
            let c = w * self.block_len[b];
            let root = (q * q + eps * eps).sqrt();
            exact += c * q.abs();
            smooth += c * (root - eps);
            grad[b] = c * q / root * self.span(b);
            curv[b] = c * eps * eps / root.powi(3) * self.span(b).powi(2);
        }
        (exact, smooth, grad, curv)
    }

    fn start(&self) -> Checkpoint {
        Checkpoint {
            state: self.init.clone(),
            cost: 0.0,
            sample: 0,
            residual: 0,
        }
    }

    /// Full rollout from the initial state.
    pub fn evaluate(&self, v: &[f64], mult: &Multipliers) -> Result<Evaluation, PlantError> {
        let mut residuals = Vec::new();
        let mut constraints = Vec::with_capacity(2 * self.samples);
        let cost = self.run(&self.interval_values(v), &self.start(), 0, mult, &mut residuals, None, Some(&mut constraints))?;
        Ok(self.finish(v, mult, cost, &residuals, constraints))
    }

    fn finish(&self, v: &[f64], mult: &Multipliers, stage: f64, residuals: &[f64], constraints: Vec<f64>) -> Evaluation {
        let (exact, smooth, _, _) = self.effluent(v);
        Evaluation {
            cost: stage + exact,
            merit: residuals.iter().map(|r| r * r).sum::<f64>() + smooth + mult.constant(),
            constraints,
        }
    }

    /// Merit, gradient and Gauss-Newton Hessian at `v`.
    ///
    /// The residual Jacobian is formed by forward differences. Perturbing
    /// block `b` cannot change anything before the block starts, so each
    /// perturbed rollout restarts from a checkpoint recorded by the nominal
    /// rollout and only the residual tail is recomputed.
    pub fn model(&self, v: &[f64], mult: &Multipliers, fd_step: f64) -> Result<Model, PlantError> {
        let values = self.interval_values(v);
        let mut checkpoints = Vec::with_capacity(self.blocks());
        let mut residuals = Vec::new();
        let mut constraints = Vec::with_capacity(2 * self.samples);
        let stage = self.run(
            &values,
            &self.start(),
            0,
            mult,
            &mut residuals,
            Some(&mut checkpoints),
            Some(&mut constraints),
        )?;

        let n = self.dim();
        let m = residuals.len();
        let mut columns: Vec<(usize, Vec<f64>)> = Vec::with_capacity(n);
        let mut scratch = residuals.clone();
        let mut vp = v.to_vec();
        for i in 0..n {
            let b = self.block_of(i);
            let delta = if v[i] + fd_step <= 1.0 { fd_step } else { -fd_step };
            vp[i] = v[i] + delta;
            let pert = self.interval_values(&vp);
            vp[i] = v[i];
            let ck = &checkpoints[b];
            self.run(&pert, ck, self.block_start[b], mult, &mut scratch, None, None)?;
            let from = ck.residual;
            let col = (from..m).map(|j| (scratch[j] - residuals[j]) / delta).collect();
            columns.push((from, col));
        }

        let (_, _, eff_grad, eff_curv) = self.effluent(v);
        let mut grad = eff_grad;
        for (i, (from, col)) in columns.iter().enumerate() {
            grad[i] += 2.0 * col.iter().zip(&residuals[*from..]).map(|(a, r)| a * r).sum::<f64>();
        }
        let mut hessian = vec![vec![0.0; n]; n];
        for i in 0..n {
            for k in 0..=i {
                let (fi, ci) = &columns[i];
                let (fk, ck) = &columns[k];
                let from = (*fi).max(*fk);
                let s: f64 = ci[from - fi..].iter().zip(&ck[from - fk..]).map(|(a, b)| a * b).sum();
                hessian[i][k] = 2.0 * s;
                hessian[k][i] = 2.0 * s;
            }
            hessian[i][i] += eff_curv[i];
        }
        Ok(Model {
            eval: self.finish(v, mult, stage, &residuals, constraints),
            grad,
            hessian,
        })
    }

    /// Central-difference gradient of the merit (reference implementation).
    #[cfg(test)]
    pub fn central_gradient(&self, v: &[f64], mult: &Multipliers, step: f64) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let mut a = v.to_vec();
                let mut b = v.to_vec();
                a[i] += step;
                b[i] -= step;
                (self.evaluate(&a, mult).unwrap().merit - self.evaluate(&b, mult).unwrap().merit) / (2.0 * step)
            })
            .collect()
    }

    /// Roll the plant forward from `from` (which sits at interval
    /// `first_interval`), truncating `residuals` to the checkpoint and
    /// appending the rest. Returns the stage and terminal cost without the
    /// effluent term.
    #[allow(clippy::too_many_arguments)]
    fn run(
        &self,
        values: &[(f64, Option<f64>)],
        from: &Checkpoint,
        first_interval: usize,
        mult: &Multipliers,
        residuals: &mut Vec<f64>,
        mut checkpoints: Option<&mut Vec<Checkpoint>>,
        mut constraints: Option<&mut Vec<f64>>,
    ) -> Result<f64, PlantError> {
        let plan = &self.skeleton;
        let strategy = self.strategy;
        let p_start = self.init.p_turb;
        let [sw_ao, sw_u, sw_track, sw_t] = self.sqrt_w;
        let mut state = from.state.clone();
        let mut cost = from.cost;
        let mut sample = from.sample;
        let mut next_block = self.block_start.partition_point(|&s| s < first_interval);
        residuals.truncate(from.residual);

        for (k, &(q, r)) in values.iter().enumerate().skip(first_interval) {
            if let Some(cps) = checkpoints.as_deref_mut() {
                if next_block < self.block_start.len() && self.block_start[next_block] == k {
                    cps.push(Checkpoint {
                        state: state.clone(),
                        cost,
                        sample,
                        residual: residuals.len(),
                    });
                    next_block += 1;
                }
            }
            let (t_a, t_b) = (plan.boundary(k), plan.boundary(k + 1));
            for end in step_ends(t_a, t_b, self.h) {
                let input = input_at(state.t, q, r, self.profile, p_start);
                state = step_to(&state, &input, end, self.params)?;
                let g_ao = (state.ao - strategy.ao_ref).abs() - (constraint_envelope(strategy, state.n) - self.margin);
                let g_t = state.t_dev.abs() - self.params.t_dev_max;
                if let Some(cs) = constraints.as_deref_mut() {
                    cs.push(g_ao);
                    cs.push(g_t);
                }
                residuals.push(mult.residual(2 * sample, g_ao));
                residuals.push(mult.residual(2 * sample + 1, g_t));
                sample += 1;
            }
            let ao_dev = state.ao - strategy.ao_ref;
            let p_track = self.reference.tracking_power(t_a);
            let [a, u, _, tr] = stage_terms(strategy, ao_dev, q, t_b - t_a, state.p_turb, p_track);
            cost += a + u + tr;
            residuals.push(sw_ao * ao_dev);
            residuals.push(sw_u * q);
            residuals.push(sw_track * (state.p_turb - p_track));
            if sw_t > 0.0 {
                let frac = running_imbalance_fraction(t_b - t_a, plan.end() - plan.boundary(0));
                let (d_i, d_x) = (state.iodine_imbalance(), state.xenon_imbalance());
                let (ei, ex) = self.reference.terminal_imbalance;
                cost += frac * terminal_term(strategy, d_i, d_x, &self.reference);
                let sw = sw_t * frac.sqrt();
                residuals.push(sw * (d_i - ei));
                residuals.push(sw * (d_x - ex));
            }
        }
        if !values.is_empty() {
            let (d_i, d_x) = (state.iodine_imbalance(), state.xenon_imbalance());
            let (ei, ex) = self.reference.terminal_imbalance;
            cost += terminal_term(strategy, d_i, d_x, &self.reference);
            residuals.push(sw_t * (d_i - ei));
            residuals.push(sw_t * (d_x - ex));
        }
        Ok(cost)
    }
}

/// Clamp every coordinate to [0, 1].
pub(crate) fn project(v: &mut [f64]) {
    for x in v.iter_mut() {
        *x = x.clamp(0.0, 1.0);
    }
}

/// Solve `a x = b` for a symmetric positive definite `a` by Cholesky
/// factorization; `None` if `a` is not numerically positive definite.
pub(crate) fn cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (y[i] - (i + 1..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_spd_system() {
        let a = vec![vec![4.0, 2.0, 0.6], vec![2.0, 5.0, 1.0], vec![0.6, 1.0, 3.0]];
        let x_true = [1.0, -2.0, 0.5];
        let b: Vec<f64> = a.iter().map(|row| row.iter().zip(&x_true).map(|(p, q)| p * q).sum()).collect();
        let x = cholesky_solve(&a, &b).unwrap();
        for (u, w) in x.iter().zip(&x_true) {
            assert!((u - w).abs() < 1e-12);
        }
        assert!(cholesky_solve(&[vec![1.0, 2.0], vec![2.0, 1.0]], &[1.0, 1.0]).is_none());
    }
}
