use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pwr_advisor::engine::{
    estimate_state, input_at, objective_eval, ControlPlan, Engine, MeasuredSample, SolverConfig,
};
use pwr_advisor::plant::{equilibrium, step, CoreState, PlantParams, PowerProfile, ProfileSegment};
use pwr_advisor::strategy::{
    make_ao_control, make_effluent_min, make_fastest_rates, make_oscillation_cancel, StrategySpec,
};

const DAY: f64 = 86_400.0;

/// A state in the middle of a 1 %NP/min down-ramp, with the profile that
/// produced it.
fn transient() -> (CoreState, PowerProfile, PlantParams) {
    let params = PlantParams::boc();
    let profile = PowerProfile::new(vec![
        ProfileSegment {
            start: 600.0,
            target: 50.0,
            rate: 1.0,
        },
        ProfileSegment {
            start: 14_400.0,
            target: 100.0,
            rate: 1.0,
        },
    ]);
    let mut s = equilibrium(1.0, params.z_ref, &params).unwrap();
    while s.t < 2400.0 {
        s = step(&s, &input_at(s.t, 0.0, None, &profile, 1.0), 10.0, &params).unwrap();
    }
    (s, profile, params)
}

fn strategies(ao_ref: f64) -> Vec<StrategySpec> {
    vec![
        make_ao_control(ao_ref).unwrap(),
        make_oscillation_cancel(ao_ref).unwrap(),
        make_fastest_rates(100.0, [0.1, 2.0]).unwrap(),
        make_effluent_min(15.0).unwrap(),
    ]
}

/// A random plan on the solver's block grid. Injections stay away from
/// zero so the effluent term is not in its smoothed region.
fn random_plan(engine: &Engine, t0: f64, strategy: &StrategySpec, rng: &mut ChaCha8Rng) -> ControlPlan {
    let c = &engine.config;
    let mut plan = ControlPlan::constant(t0, c.dt_ctrl, c.horizon, c.fine_blocks, 0.0, None);
    let p = &engine.params;
    for block in &mut plan.blocks {
        let mut q = rng.gen_range(-p.w_bor_max..p.w_dil_max);
        if q.abs() < 0.1 {
            q = 0.5;
        }
        block.q = q;
        if strategy.optimize_turbine_rate {
            block.r_turb = Some(rng.gen_range(strategy.rate_bounds[0]..strategy.rate_bounds[1]));
        }
    }
    plan
}

#[test]
fn solver_gradient_matches_a_central_difference_oracle() {
    let (init, profile, params) = transient();
    let config = SolverConfig::default();
    let engine = Engine::new(params.clone(), config.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let all = strategies(init.ao);
    for trial in 0..10 {
        let strategy = &all[trial % all.len()];
        let plan = random_plan(&engine, init.t, strategy, &mut rng);
        let (cost, grad) = engine.objective_gradient(&init, strategy, &profile, &plan).unwrap();
        let reference = engine.reference(&init, strategy, &profile);
        let eval = |plan: &ControlPlan| {
            let traj = engine.predict(&init, plan, &profile).unwrap();
            objective_eval(&traj, plan, strategy, &reference, &params).0
        };
        assert!((cost - eval(&plan)).abs() <= 1e-9 * cost.abs().max(1.0));

        let nb = plan.blocks.len();
        let q_span = params.w_bor_max + params.w_dil_max;
        let r_span = strategy.rate_bounds[1] - strategy.rate_bounds[0];
        let oracle: Vec<f64> = (0..grad.len())
            .map(|i| {
                // Ten times smaller than the solver's normalized step.
                let (b, h) = if i < nb { (i, 0.1 * config.fd_step * q_span) } else { (i - nb, 0.1 * config.fd_step * r_span) };
                let bump = |sign: f64| {
                    let mut p = plan.clone();
                    if i < nb {
                        p.blocks[b].q += sign * h;
                    } else {
                        p.blocks[b].r_turb = p.blocks[b].r_turb.map(|r| r + sign * h);
                    }
                    eval(&p)
                };
                (bump(1.0) - bump(-1.0)) / (2.0 * h)
            })
            .collect();
        let scale = oracle.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        for (i, (a, b)) in grad.iter().zip(&oracle).enumerate() {
            let denom = b.abs().max(1e-3 * scale);
            assert!(
                (a - b).abs() / denom < 1e-3,
                "{} plan {trial} coordinate {i}: {a} vs oracle {b}",
                strategy.kind
            );
        }
    }
}

#[test]
fn solves_descend_stay_in_budget_and_are_deterministic() {
    let (init, profile, params) = transient();
    let engine = Engine::new(params.clone(), SolverConfig::default());
    for strategy in strategies(equilibrium(1.0, params.z_ref, &params).unwrap().ao) {
        let a = engine.solve(&init, &strategy, &profile, None, 30.0).unwrap();
        let d = &a.diagnostics;
        assert!(d.wall_time_s < 5.0, "{}: solve took {} s", strategy.kind, d.wall_time_s);
        for round in &d.merit_trace {
            for w in round.windows(2) {
                assert!(w[1] < w[0], "{}: merit rose {} -> {}", strategy.kind, w[0], w[1]);
            }
        }
        assert!(a.plan.validate(&params).is_ok());
        for row in [&a.current_row, &a.next_row] {
            assert!(row.dilution == 0.0 || row.boration == 0.0, "{row:?}");
            assert!(row.dilution >= 0.0 && row.boration >= 0.0);
        }
        assert_eq!(a.current_row.apply_at, 2400.0);
        assert_eq!(a.next_row.apply_at, 3000.0);

        let b = engine.solve(&init, &strategy, &profile, None, 30.0).unwrap();
        assert_eq!(a.without_timing(), b.without_timing(), "{}", strategy.kind);
    }
}

#[test]
fn feasible_solve_respects_the_ao_envelope() {
    let params = PlantParams::boc();
    let init = equilibrium(1.0, params.z_ref, &params).unwrap();
    let profile = PowerProfile::new(vec![ProfileSegment {
        start: 600.0,
        target: 80.0,
        rate: 0.5,
    }]);
    let strategy = make_ao_control(init.ao).unwrap();
    let engine = Engine::new(params, SolverConfig::default());
    let rec = engine.solve(&init, &strategy, &profile, None, 30.0).unwrap();
    assert!(!rec.diagnostics.infeasible, "{:?}", rec.diagnostics.max_violation);
    let bound = strategy.ao_bound.eval(1.0);
    for s in &rec.predicted.samples {
        assert!((s.ao - init.ao).abs() <= bound + 0.1, "t = {}: AO {}", s.t, s.ao);
    }
}

#[test]
fn estimator_tracks_unmeasured_poisons_from_plant_history() {
    let params = PlantParams::boc();
    let profile = PowerProfile::new(vec![
        ProfileSegment {
            start: 1200.0,
            target: 50.0,
            rate: 1.0,
        },
        ProfileSegment {
            start: 6000.0,
            target: 100.0,
            rate: 1.0,
        },
    ]);
    let init = equilibrium(1.0, params.z_ref, &params).unwrap();
    let q_of = |t: f64| match (t / 3600.0) as u32 {
        1 => -2.0,
        5..=6 => 3.0,
        _ => 0.0,
    };
    let mut s = init.clone();
    let mut history = vec![MeasuredSample::from_state(&s)];
    while s.t < DAY + 1e-9 {
        s = step(&s, &input_at(s.t, q_of(s.t), None, &profile, 1.0), 10.0, &params).unwrap();
        history.push(MeasuredSample::from_state(&s));
    }
    let est = estimate_state(&history, &params).unwrap();
    for (name, a, b) in [
        ("i_t", est.i_t, s.i_t),
        ("i_b", est.i_b, s.i_b),
        ("x_t", est.x_t, s.x_t),
        ("x_b", est.x_b, s.x_b),
    ] {
        assert!((a - b).abs() / b.abs() < 1e-3, "{name}: estimate {a} vs truth {b}");
    }
}
