use proptest::prelude::*;
use smallgain::design::*;
use smallgain::gain::{GainFn, TimeWeight};
use smallgain::iss::{run_ensemble, EnsembleSpec};
use smallgain::linalg::{char_poly, poly_from_roots, sym_eigen, Mat};
use smallgain::sim::{Inputs, Signal};

fn scalar_plant() -> LinearPlant {
    LinearPlant::new(Mat::from_rows(&[vec![0.0]]).unwrap(), Mat::column(&[1.0])).unwrap()
}

fn plant_strategy() -> impl Strategy<Value = LinearPlant> {
    (1usize..=4)
        .prop_flat_map(|n| (prop::collection::vec(-2.0f64..2.0, n * n), prop::collection::vec(-2.0f64..2.0, n)))
        .prop_map(|(a, b)| {
            let n = b.len();
            LinearPlant::new(Mat::from_row_major(n, n, a).unwrap(), Mat::column(&b)).unwrap()
        })
        .prop_filter("controllable", |p| p.controllability_ratio() > 1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ackermann_hits_target_polynomial(plant in plant_strategy(), margin in 0.2f64..2.0) {
        let k = place_poles(&plant, margin).unwrap();
        let poles: Vec<f64> = (0..plant.dim()).map(|j| -margin - j as f64).collect();
        let target = poly_from_roots(&poles);
        let got = char_poly(&plant.closed_loop(&k).unwrap()).unwrap();
        for (g, t) in got.iter().zip(&target) {
            prop_assert!((g - t).abs() <= 1e-8 * t.abs().max(1.0), "{:?} vs {:?}", got, target);
        }
    }

    #[test]
    fn shifted_lyapunov_residual(plant in plant_strategy(), mu in 0.01f64..0.2) {
        let k = place_poles(&plant, 1.0).unwrap();
        let p0 = shifted_lyapunov(&plant, &k, mu).unwrap();
        let shifted = plant.closed_loop(&k).unwrap().add(&Mat::identity(plant.dim()).scale(2.0 * mu)).unwrap();
        let res = shifted.transpose().matmul(&p0).unwrap().add(&p0.matmul(&shifted).unwrap()).unwrap().add(&Mat::identity(plant.dim())).unwrap();
        prop_assert!(res.frobenius() <= 1e-8 * p0.frobenius().max(1.0));
    }

    #[test]
    fn solved_designs_verify(plant in plant_strategy(), mu in 0.01f64..0.3, reserve in 1.0f64..3.0) {
        let k = place_poles(&plant, 1.0).unwrap();
        match solve_design(&plant, &k, mu, reserve) {
            Ok(design) => {
                prop_assert!(design.q1 > 0.0 && design.q1 <= design.q2);
                let cert = verify_design(&plant, &design, &default_probes(plant.dim())).unwrap();
                prop_assert!(cert.passed(), "{:?}", cert);
            }
            Err(DesignError::Infeasible(_)) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn residual_is_monotone_in_scale(plant in plant_strategy(), mu in 0.01f64..0.3) {
        let k = place_poles(&plant, 1.0).unwrap();
        let p0 = shifted_lyapunov(&plant, &k, mu).unwrap();
        let values: Vec<f64> = [0.1, 0.5, 1.0, 2.0, 10.0].iter().map(|&c| scaled_residual(&plant, &k, &p0, mu, 1.0, c).unwrap()).collect();
        let increasing = values.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-9) + 1e-12);
        let decreasing = values.windows(2).all(|w| w[0] >= w[1] * (1.0 + 1e-9) - 1e-12);
        prop_assert!(increasing || decreasing, "{:?}", values);
    }

    #[test]
    fn sampling_period_is_antitone(a in 0.0f64..3.0, b in 0.1f64..3.0, bk in 0.1f64..3.0, a_cl in 0.1f64..3.0, mu in 0.01f64..1.0, m in 1.0f64..5.0) {
        let base = DesignNorms { a, b, bk, a_cl };
        let r = |n: &DesignNorms| { let (x, y) = sampling_bounds(n, mu, 1.0, m); x.min(y) };
        let r0 = r(&base);
        for inflated in [
            DesignNorms { a: a * 1.1 + 1e-3, ..base },
            DesignNorms { b: b * 1.1, ..base },
            DesignNorms { bk: bk * 1.1, ..base },
            DesignNorms { a_cl: a_cl * 1.1, ..base },
        ] {
            prop_assert!(r(&inflated) <= r0);
        }
    }
}

#[test]
fn scalar_design_matches_reported_constants() {
    let plant = scalar_plant();
    let design = design_from_candidate(&plant, &[-1.0], Mat::identity(1), 0.25, 1.0).unwrap();
    let cert = verify_design(&plant, &design, &default_probes(1)).unwrap();
    assert!(cert.passed());
    assert!(cert.component("matrix").unwrap().witness["lambda_max"].abs() <= 1e-12);
    assert_eq!(default_probes(1).len(), 101 * 101);
    // the pointwise residual is -(x - u)^2, zero on the diagonal
    assert_eq!(cert.component("pointwise").unwrap().witness["x_1"], cert.component("pointwise").unwrap().witness["u"]);
    let r = max_sampling_period(&plant, &design).unwrap();
    assert!((r - 1.0 / 7.0).abs() <= 1e-12);
    let faster = SampledDesign { mu: 0.5, ..design };
    assert!((max_sampling_period(&plant, &faster).unwrap() - 0.25).abs() <= 1e-12);
}

fn planar_request() -> PipelineRequest {
    PipelineRequest {
        plant: scalar_plant(),
        gains: PipelineGains {
            gamma1: GainFn::sqrt_scale(0.9),
            gamma1_u: GainFn::Zero,
            beta: TimeWeight::one(),
            delta1_u: TimeWeight::one(),
            gamma2: GainFn::power(0.2, 2.0),
            gamma2_u: GainFn::Identity,
            delta2_u: TimeWeight::one(),
        },
        rho: GainFn::scale(0.1),
        reserve: 1.0,
        mu: 0.25,
        margin: 1.0,
        k: Some(vec![-1.0]),
        p: None,
    }
}

#[test]
fn pipeline_end_to_end() {
    let out = design_pipeline(&planar_request()).unwrap();
    assert!(out.certificate.passed(), "{:?}", out.certificate);
    let design = out.design.unwrap();
    assert!((design.r.unwrap() - 1.0 / 7.0).abs() <= 1e-12);
    assert_eq!(out.stability, Some(StabilityClass::Uiss));
    // pole placement with margin 1 gives the same k for this plant
    let auto = design_pipeline(&PipelineRequest { k: None, ..planar_request() }).unwrap();
    assert_eq!(auto.design.unwrap().k, vec![-1.0]);
}

#[test]
fn pipeline_stops_on_small_gain_failure() {
    let mut req = planar_request();
    req.gains.gamma1 = GainFn::sqrt_scale(0.5);
    req.gains.gamma2 = GainFn::power(0.99, 2.0);
    req.rho = GainFn::Identity;
    let out = design_pipeline(&req).unwrap();
    assert!(!out.certificate.passed());
    assert!(out.design.is_none());
    assert!(out.certificate.component("a3/a3").unwrap().worst_residual > 0.0);
}

#[test]
fn pipeline_without_coupling() {
    let mut req = planar_request();
    req.gains.gamma2 = GainFn::Zero;
    let out = design_pipeline(&req).unwrap();
    assert!(out.certificate.passed());
    assert!(out.design.is_some());
    let weighted = PipelineRequest {
        gains: PipelineGains { delta2_u: TimeWeight::exp(1.0, 0.1), ..req.gains.clone() },
        ..req
    };
    assert_eq!(design_pipeline(&weighted).unwrap().stability, Some(StabilityClass::Wiss));
}

#[test]
fn uncontrollable_plant_has_no_design() {
    let plant = LinearPlant::new(Mat::zeros(2, 2), Mat::column(&[0.0, 0.0])).unwrap();
    let req = PipelineRequest { plant, k: None, ..planar_request() };
    assert!(matches!(design_pipeline(&req), Err(DesignError::NotControllable { .. })));
}

#[test]
fn closed_loop_lyapunov_decay() {
    let plants = [
        scalar_plant(),
        LinearPlant::new(Mat::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap(), Mat::column(&[0.0, 1.0])).unwrap(),
        LinearPlant::new(Mat::from_rows(&[vec![0.5, 1.0], vec![-1.0, 0.2]]).unwrap(), Mat::column(&[1.0, 0.5])).unwrap(),
    ];
    for plant in plants {
        let k = place_poles(&plant, 1.0).unwrap();
        let mut design = solve_design(&plant, &k, 0.1, 1.0).unwrap();
        let r = max_sampling_period(&plant, &design).unwrap();
        design.r = Some(r);
        let sys = closed_loop_system(&plant, &design.k, r).unwrap();
        let spec = EnsembleSpec {
            count: 10,
            on_sphere: true,
            horizon: 10.0,
            inputs: Inputs::new(Signal::zeros(1), Signal::Empty, Signal::random(1, 0.0, 2.0, 0.05, 3)),
            seed: 17,
            ..EnsembleSpec::default()
        };
        for traj in run_ensemble(&sys, &spec, &[]).unwrap() {
            let v0 = design.p.quad(traj.state(0));
            for i in 0..traj.len() {
                let bound = (-2.0 * design.mu * (traj.times[i] - traj.t0())).exp() * v0 + 1e-8;
                assert!(design.p.quad(traj.state(i)) <= bound, "t = {}", traj.times[i]);
            }
        }
        assert!(sym_eigen(&design.p).unwrap().min() > 0.0);
    }
}
