use smallgain::gain::{GainFn, KlEnvelope, TimeWeight};
use smallgain::iss::*;
use smallgain::parallel::par_map_with;
use smallgain::sim::{simulate, Block, Inputs, Signal, SystemDef};
use smallgain::systems::*;

fn scalar_runs(count: usize) -> Vec<smallgain::sim::Trajectory> {
    let (sys, _) = make_scalar_sampled_2_1();
    let spec = EnsembleSpec { count, radius: 3.0, horizon: 4.0, seed: 5, ..EnsembleSpec::default() };
    run_ensemble(&sys, &spec, &[0.0, 0.5, 1.0, 2.0, 3.0]).unwrap()
}

#[test]
fn scalar_sampled_is_dominated_by_unit_exponential() {
    let runs = scalar_runs(20);
    let est = IssEstimate::uniform(KlEnvelope::linear(1.0, 1.0).unwrap());
    let cert = iss_probe(&runs, &est, NormSelector::State, 1e-9).unwrap();
    assert!(cert.passed(), "{cert:?}");
    // the oracle inequality 1 - τ <= exp(-τ) on a fine grid
    assert!((0..=1000).all(|i| {
        let tau = i as f64 / 1000.0;
        1.0 - tau <= (-tau).exp()
    }));
}

#[test]
fn fast_envelope_fails_near_half() {
    let runs = scalar_runs(20);
    let est = IssEstimate::uniform(KlEnvelope::linear(1.0, 5.0).unwrap());
    let cert = iss_probe(&runs, &est, NormSelector::State, 1e-9).unwrap();
    assert!(!cert.passed());
    let w = &cert.components[0].witness;
    let elapsed = w["t"] - w["t0"];
    // max over τ of (1 - τ) - exp(-5τ) is attained at τ = ln(5)/5 ≈ 0.32
    assert!(elapsed > 0.2 && elapsed < 0.6, "{elapsed}");
}

#[test]
fn zero_runs_have_zero_residual() {
    let (sys, _) = make_scalar_sampled_2_1();
    let spec = EnsembleSpec { initial_states: Some(vec![vec![0.0]; 3]), horizon: 2.0, ..EnsembleSpec::default() };
    let runs = run_ensemble(&sys, &spec, &[]).unwrap();
    let est = IssEstimate::uniform(KlEnvelope::linear(1.0, 1.0).unwrap());
    let cert = iss_probe(&runs, &est, NormSelector::State, 0.0).unwrap();
    assert!(cert.passed());
    assert_eq!(cert.worst_residual, 0.0);
    let rfc = RfcCandidate { mu: TimeWeight::one(), c: TimeWeight::one(), a: GainFn::Identity, p: GainFn::Identity };
    assert!(rfc_bound_probe(&runs, &TimeWeight::one(), &rfc).unwrap().passed());
}

#[test]
fn fitted_envelope_dominates_its_own_ensemble() {
    let runs = scalar_runs(30);
    let fit = fit_kl_envelope(&runs, NormSelector::State).unwrap();
    let c = fit.amplitude.linear_slope().unwrap();
    assert!(c <= 1.0 + 1e-6, "{c}");
    assert!(fit.rate > 0.0);
    let est = IssEstimate::uniform(fit.clone());
    assert!(iss_probe(&runs, &est, NormSelector::State, 1e-12).unwrap().passed());
    // enlarging the envelope keeps the verdict
    for scale in [1.5, 2.0, 10.0] {
        let bigger = IssEstimate::uniform(KlEnvelope::linear(c * scale, fit.rate).unwrap());
        assert!(iss_probe(&runs, &bigger, NormSelector::State, 1e-12).unwrap().passed());
    }
}

#[test]
fn convergence_table_vanishes_after_one_period() {
    let runs = scalar_runs(20);
    let table = p3_convergence_probe(&runs, &GainFn::Zero, &TimeWeight::one(), &[0.0, 0.5, 1.0, 2.0, 3.0], &NormSelector::State).unwrap();
    assert!(table.a[0] > 0.0);
    for (h, a) in table.h.iter().zip(&table.a) {
        if *h >= 1.0 {
            assert!(*a <= 1e-9, "a({h}) = {a}");
        }
    }
    assert!(table.converged(0.05));
    assert!(table.to_csv().starts_with("h,a\n"));
}

#[test]
fn unstable_system_does_not_converge() {
    let sys = SystemDef::leaf(Block::ode("growth", 1, 0, |c, dx| dx[0] = c.x[0])).unwrap();
    let spec = EnsembleSpec { count: 5, horizon: 3.0, ..EnsembleSpec::default() };
    let h = [0.0, 1.0, 2.0, 3.0];
    let runs = run_ensemble(&sys, &spec, &h).unwrap();
    let table = p3_convergence_probe(&runs, &GainFn::Zero, &TimeWeight::one(), &h, &NormSelector::State).unwrap();
    assert!(table.a.windows(2).all(|w| w[1] > w[0]));
    assert!(!table.converged(0.05));
}

#[test]
fn forward_completeness_candidates() {
    let (sys, _) = make_scalar_sampled_2_1();
    let inputs = Inputs::none();
    let run = simulate(&sys, 0.0, &[2.0], &inputs, 3.0, &Default::default()).unwrap();
    let good = RfcCandidate { mu: TimeWeight::one(), c: TimeWeight::one(), a: GainFn::Identity, p: GainFn::Identity };
    assert!(rfc_bound_probe(std::slice::from_ref(&run), &TimeWeight::one(), &good).unwrap().passed());
    let small = RfcCandidate { a: GainFn::scale(0.1), ..good };
    let cert = rfc_bound_probe(&[run], &TimeWeight::one(), &small).unwrap();
    assert!(!cert.passed());
    assert_eq!(cert.components[0].witness["t"], 0.0);
    assert!((cert.worst_residual - 1.0).abs() < 1e-12);
}

#[test]
fn probes_are_deterministic_and_thread_independent() {
    let sys = make_planar_4_13(&PlanarPlantSpec::default()).unwrap();
    let spec = EnsembleSpec {
        count: 12,
        horizon: 5.0,
        inputs: Inputs::new(Signal::zeros(1), Signal::random(1, -0.2, 0.2, 0.1, 1), Signal::zeros(1)),
        seed: 77,
        ..EnsembleSpec::default()
    };
    let a = run_ensemble(&sys, &spec, &[]).unwrap();
    let b = run_ensemble(&sys, &spec, &[]).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let plans = spec.plans(2);
    let run = |_: usize, p: &RunPlan| simulate(&sys, p.t0, &p.x0, &p.inputs, spec.horizon, &spec.options).unwrap().to_csv();
    assert_eq!(par_map_with(Some(0), &plans, run), par_map_with(Some(4), &plans, run));
    let fa = fit_kl_envelope(&a, NormSelector::State).unwrap();
    let fb = fit_kl_envelope(&b, NormSelector::State).unwrap();
    assert_eq!(fa, fb);
}

#[test]
fn sum_form_is_weaker_than_max_form() {
    let runs = scalar_runs(10);
    let sigma = KlEnvelope::linear(1.0, 1.2).unwrap();
    let max_form = iss_probe(&runs, &IssEstimate::uniform(sigma.clone()), NormSelector::State, 0.0).unwrap();
    let sum_form = iss_probe(&runs, &IssEstimate::uniform(sigma).with_form(EstimateForm::Sum), NormSelector::State, 0.0).unwrap();
    assert!(sum_form.worst_residual <= max_form.worst_residual);
}
