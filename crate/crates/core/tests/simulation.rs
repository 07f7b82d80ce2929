use smallgain::sim::rng::SplitMix64;
use smallgain::sim::{
    causality_check, restart_mismatch, simulate, weak_semigroup_check, Block, Event, Inputs, SamplingSet, Scenario,
    Signal, SimOptions, Status, SystemDef,
};
use smallgain::systems::*;

fn max_oracle_error(sys: &SystemDef, oracle: &AnalyticOracle, t0: f64, x0: &[f64], horizon: f64) -> f64 {
    let traj = simulate(sys, t0, x0, &Inputs::none(), horizon, &SimOptions::default()).unwrap();
    assert!(traj.completed());
    let mut worst: f64 = 0.0;
    for i in 0..traj.len() {
        let exact = oracle.eval(traj.times[i], t0, x0);
        for (a, b) in traj.state(i).iter().zip(&exact) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

#[test]
fn scalar_sampled_matches_closed_form() {
    let (sys, oracle) = make_scalar_sampled_2_1();
    let traj = simulate(&sys, 0.0, &[2.0], &Inputs::none(), 3.0, &SimOptions::default()).unwrap();
    assert_eq!(traj.times[0], 0.0);
    assert_eq!(traj.state(0), &[2.0]);
    assert!((traj.state_at(0.5).unwrap()[0] - 1.0).abs() < 1e-12);
    assert!(traj.state_at(1.5).unwrap()[0].abs() < 1e-12);
    let mut rng = SplitMix64::new(11);
    for _ in 0..20 {
        let t0 = rng.uniform(0.0, 10.0);
        let x0 = [rng.uniform(-5.0, 5.0)];
        assert!(max_oracle_error(&sys, &oracle, t0, &x0, 5.0) <= 1e-9);
    }
}

#[test]
fn fixed_impulses_match_both_branches() {
    let (sys, oracle) = make_impulsive_fixed_2_2();
    assert!(max_oracle_error(&sys, &oracle, 0.0, &[2.0, 2.0], 5.0) <= 1e-9);
    assert!(max_oracle_error(&sys, &oracle, 0.5, &[1.0, 2.0], 5.0) <= 1e-9);
    let mut rng = SplitMix64::new(12);
    for _ in 0..20 {
        let t0 = rng.uniform(0.0, 10.0);
        let x0 = [rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)];
        assert!(max_oracle_error(&sys, &oracle, t0, &x0, 5.0) <= 1e-9, "t0 = {t0}");
    }
    let traj = simulate(&sys, 0.5, &[1.0, 2.0], &Inputs::none(), 3.0, &SimOptions::default()).unwrap();
    assert_eq!(traj.sampling, SamplingSet::Continuum);
    let impulses: Vec<f64> = traj.times.iter().zip(&traj.events).filter(|(_, e)| **e == Event::Impulse).map(|(t, _)| *t).collect();
    assert_eq!(impulses, vec![1.0, 2.0, 3.0]);
    assert_eq!(traj.output(traj.index_of(0.75).unwrap()), &[0.5]);
}

#[test]
fn restarts_at_sampling_times_reproduce_the_run() {
    let (sys, _) = make_scalar_sampled_2_1();
    let sc = Scenario::new(sys, 0.0, vec![2.0], Inputs::none(), 4.0);
    let traj = sc.run().unwrap();
    let SamplingSet::Times { times } = &traj.sampling else { panic!("expected sampling times") };
    assert_eq!(times, &vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    for &tau in times {
        assert!(weak_semigroup_check(&sc, &traj, tau).unwrap() <= 1e-9);
    }
    assert!(weak_semigroup_check(&sc, &traj, 0.5).is_err());

    let (sys, _) = make_impulsive_fixed_2_2();
    let sc = Scenario::new(sys, 0.3, vec![1.0, -1.0], Inputs::none(), 4.0);
    let traj = sc.run().unwrap();
    for tau in [0.3, 0.55, 1.0, 1.7, 2.0, 3.25] {
        assert!(weak_semigroup_check(&sc, &traj, tau).unwrap() <= 1e-9, "tau = {tau}");
    }
}

#[test]
fn restart_between_samples_breaks_classical_semigroup() {
    let (sys, _) = make_scalar_sampled_2_1();
    let sc = Scenario::new(sys, 0.0, vec![2.0], Inputs::none(), 3.0);
    let dev = restart_mismatch(&sc, 0.5, 1.0).unwrap();
    assert!((dev - 0.5).abs() <= 1e-9, "{dev}");
    assert!(restart_mismatch(&sc, 1.0, 2.5).unwrap() <= 1e-9);

    let ode = SystemDef::leaf(Block::ode("decay", 1, 0, |c, dx| dx[0] = -c.x[0])).unwrap();
    let sc = Scenario::new(ode, 0.0, vec![1.0], Inputs::none(), 3.0);
    for tau in [0.123, 0.5, 1.77] {
        assert!(restart_mismatch(&sc, tau, 2.9).unwrap() <= 1e-9);
    }
}

fn planar_inputs(seed: u64) -> Inputs {
    Inputs::new(Signal::zeros(1), Signal::random(1, -0.2, 0.2, 0.05, seed), Signal::random(1, 0.0, 1.0, 0.1, seed + 1))
}

#[test]
fn planar_closed_loop_semigroup_and_causality() {
    let sys = make_planar_4_13(&PlanarPlantSpec::default()).unwrap();
    let sc = Scenario::new(sys, 0.0, vec![0.8, -0.6], planar_inputs(3), 6.0);
    let traj = sc.run().unwrap();
    let SamplingSet::Times { times } = &traj.sampling else { panic!("expected sampling times") };
    for pair in times.windows(2) {
        assert!(pair[1] - pair[0] <= 1.0 / 7.0 * (1.0 + 1e-12));
    }
    for &tau in times.iter().step_by(5) {
        assert!(weak_semigroup_check(&sc, &traj, tau).unwrap() <= 1e-9);
    }
    let altered = Inputs::new(
        Signal::zeros(1).altered_after(3.0, vec![5.0]),
        sc.inputs.d.clone().altered_after(3.0, vec![-0.2]),
        sc.inputs.w.clone(),
    );
    assert!(causality_check(&sc, &altered, 3.0).unwrap() <= 1e-9);
}

#[test]
fn constant_w_halves_the_sampling_period() {
    let spec = PlanarPlantSpec { r: 0.2, ..PlanarPlantSpec::default() };
    let sys = make_planar_4_13(&spec).unwrap();
    let inputs = Inputs::new(Signal::zeros(1), Signal::constant(vec![0.2]), Signal::constant(vec![std::f64::consts::LN_2]));
    let traj = simulate(&sys, 0.0, &[1.0, 1.0], &inputs, 2.0, &SimOptions::default()).unwrap();
    let SamplingSet::Times { times } = traj.sampling else { panic!() };
    for pair in times.windows(2).take(times.len() - 2) {
        assert!((pair[1] - pair[0] - 0.1).abs() < 1e-12, "{pair:?}");
    }
}

#[test]
fn planar_zero_state_stays_at_rest() {
    let sys = make_planar_4_13(&PlanarPlantSpec::default()).unwrap();
    sys.check_zero_equilibrium(&[vec![0.2], vec![-0.2]]).unwrap();
    let traj = simulate(&sys, 0.0, &[0.0, 0.0], &planar_inputs(9), 5.0, &SimOptions::default()).unwrap();
    assert_eq!(traj.sup_state_norm(), 0.0);
}

#[test]
fn interconnected_planar_matches_direct_build() {
    let spec = PlanarPlantSpec::default();
    let direct = make_planar_4_13(&spec).unwrap();
    let composite = make_planar_4_13_interconnected(&spec).unwrap();
    assert_eq!(composite.state_dim(), 2);
    let inputs = Inputs::new(Signal::random(1, -0.1, 0.1, 0.1, 5), Signal::random(1, -0.2, 0.2, 0.05, 6), Signal::random(1, 0.0, 0.5, 0.1, 7));
    let a = simulate(&direct, 0.0, &[1.0, 1.0], &inputs, 10.0, &SimOptions::default()).unwrap();
    let b = simulate(&composite, 0.0, &[1.0, 1.0], &inputs, 10.0, &SimOptions::default()).unwrap();
    assert_eq!(a.times, b.times);
    let dev = a.states.iter().zip(&b.states).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    assert!(dev <= 1e-9, "{dev}");
    assert_eq!(a.sampling, b.sampling);
}

#[test]
fn z_subsystem_alone_is_non_increasing() {
    let sys = make_planar_4_13(&PlanarPlantSpec::default()).unwrap();
    let inputs = Inputs::new(Signal::zeros(1), Signal::zeros(1), Signal::zeros(1));
    let traj = simulate(&sys, 0.0, &[1.5, 0.0], &inputs, 10.0, &SimOptions::default()).unwrap();
    for i in 1..traj.len() {
        assert!(traj.state(i)[0].abs() <= traj.state(i - 1)[0].abs());
        assert_eq!(traj.state(i)[1], 0.0);
    }
}

#[test]
fn rk4_observed_order_on_planar_plant() {
    let sys = make_planar_4_13(&PlanarPlantSpec::default()).unwrap();
    let inputs = Inputs::new(
        Signal::Sinusoid { amplitude: vec![0.1], omega: 1.0, phase: 0.0 },
        Signal::constant(vec![0.2]),
        Signal::zeros(1),
    );
    let terminal = |h: f64| {
        let opts = SimOptions { h_int: h, record_dt: None, ..SimOptions::default() };
        simulate(&sys, 0.0, &[1.0, 1.0], &inputs, 2.0, &opts).unwrap().final_state().to_vec()
    };
    let (a, b, c) = (terminal(0.04), terminal(0.02), terminal(0.01));
    let diff = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let order = (diff(&a, &b) / diff(&b, &c)).log2();
    assert!(order >= 3.5, "observed order {order}");
}

#[test]
fn runs_are_bit_identical() {
    let sys = make_planar_4_13(&PlanarPlantSpec::default()).unwrap();
    let run = || simulate(&sys, 0.0, &[0.3, 0.4], &planar_inputs(21), 3.0, &SimOptions::default()).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.meta.seeds, planar_inputs(21).seeds());
}

#[test]
fn finite_escape_reports_blowup() {
    let sys = SystemDef::leaf(Block::ode("quadratic", 1, 0, |c, dx| dx[0] = c.x[0] * c.x[0])).unwrap();
    let traj = simulate(&sys, 0.0, &[10.0], &Inputs::none(), 1.0, &SimOptions::default()).unwrap();
    match traj.status {
        Status::Blowup { t, norm } => {
            assert!(t > 0.09 && t < 0.105, "{t}");
            assert!(norm > 1e9);
        }
        other => panic!("expected blowup, got {other:?}"),
    }
}

#[test]
fn bad_options_are_rejected() {
    let (sys, _) = make_scalar_sampled_2_1();
    let bad = SimOptions { h_int: 0.0, ..SimOptions::default() };
    assert!(simulate(&sys, 0.0, &[1.0], &Inputs::none(), 1.0, &bad).is_err());
    assert!(simulate(&sys, -1.0, &[1.0], &Inputs::none(), 1.0, &SimOptions::default()).is_err());
    assert!(simulate(&sys, 0.0, &[1.0], &Inputs::none(), 0.0, &SimOptions::default()).is_err());
    assert!(simulate(&sys, 0.0, &[1.0, 2.0], &Inputs::none(), 1.0, &SimOptions::default()).is_err());
}

#[test]
fn non_finite_field_faults() {
    let sys = SystemDef::leaf(Block::ode("nan", 1, 0, |c, dx| dx[0] = if c.t > 0.5 { f64::NAN } else { 0.0 })).unwrap();
    let traj = simulate(&sys, 0.0, &[1.0], &Inputs::none(), 1.0, &SimOptions::default()).unwrap();
    assert!(matches!(traj.status, Status::Fault { .. }));
}

#[test]
fn cascade_decouples_when_coupling_vanishes() {
    let spec = ImpulsiveCascadeSpec { g_quad: smallgain::linalg::Mat::from_rows(&[vec![0.0]]).unwrap(), ..Default::default() };
    let sys = make_cascade_3_49(&spec).unwrap();
    let traj = simulate(&sys, 0.0, &[0.7, 0.9], &Inputs::none(), 5.0, &SimOptions::default()).unwrap();
    for i in 0..traj.len() {
        let t = traj.times[i];
        assert!((traj.state(i)[0] - 0.7 * (-t).exp()).abs() <= 1e-6);
    }
}

#[test]
fn cascade_flow_satisfies_lyapunov_equality() {
    let spec = ImpulsiveCascadeSpec::default();
    let sys = make_cascade_3_49(&spec).unwrap();
    assert_eq!(sys.sampling_bound(), None);
    let traj = simulate(&sys, 0.0, &[0.0, 0.8], &Inputs::none(), 4.0, &SimOptions::default()).unwrap();
    let mut last_event = (0.0, spec.lyapunov(&[0.8]));
    for i in 0..traj.len() {
        let t = traj.times[i];
        let x = traj.state(i)[1];
        if traj.events[i] != Event::Flow {
            last_event = (t, spec.lyapunov(&[x]));
            continue;
        }
        let predicted = (-spec.c1 * (t - last_event.0)).exp() * last_event.1;
        assert!((spec.lyapunov(&[x]) - predicted).abs() <= 1e-6, "t = {t}");
    }
    let zero = simulate(&sys, 0.0, &[0.0, 0.0], &Inputs::none(), 4.0, &SimOptions::default()).unwrap();
    assert_eq!(zero.sup_state_norm(), 0.0);
}

#[test]
fn cascade_restarts_anywhere() {
    let sys = make_cascade_3_49(&ImpulsiveCascadeSpec::default()).unwrap();
    let sc = Scenario::new(sys, 0.25, vec![0.5, -0.5], Inputs::none(), 5.0);
    let traj = sc.run().unwrap();
    for tau in [0.25, 0.5, 1.0, 2.37, 4.0] {
        assert!(weak_semigroup_check(&sc, &traj, tau).unwrap() <= 1e-9);
    }
}
