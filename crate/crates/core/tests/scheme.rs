mod common;

use common::{e, random_field, simpson, ScalarOracle};
use stopspde_core::analysis::AnalysisConfig;
use stopspde_core::experiment::run_counterpart_gap;
use stopspde_core::noise::{counter_normal, counter_uniform};
use stopspde_core::{
    indicator, simulate, simulate_untamed, stopped_euler_step, BrownianPath, InitialCondition, ModelSpec,
    SchemeParams, SpectralField,
};

const THETA: f64 = 0.25;

#[test]
fn single_mode_steps_match_scalar_oracle() {
    let spec = ModelSpec {
        reaction_rate: 3.0,
        noise_intensity: 1.2,
        ..ModelSpec::default()
    };
    let mut frozen = 0;
    for (i, steps) in [4usize, 16, 64, 256].into_iter().cycle().take(1000).enumerate() {
        let params = SchemeParams::new(steps, 1, 1, THETA, 1.0).unwrap();
        let oracle = ScalarOracle::new(&spec, steps, THETA, params.hs_tail());
        let y = 12.0 * (counter_uniform(77, i as u64, 0) - 0.5);
        let dw = counter_normal(77, i as u64, 1) * params.dt().sqrt();
        let (out, was_frozen) =
            stopped_euler_step(&SpectralField::new(vec![y]).unwrap(), &[dw], &params, &spec).unwrap();
        let (expected, oracle_frozen) = oracle.step(y, dw);
        assert_eq!(was_frozen, oracle_frozen, "step {i}: y = {y}");
        assert!((out.coeff(1) - expected).abs() <= 1e-10 * (1.0 + expected.abs()), "step {i}");
        frozen += usize::from(was_frozen);
    }
    // both branches exercised
    assert!(frozen > 50 && frozen < 950, "{frozen}");
}

#[test]
fn large_drift_alone_closes_the_gate() {
    let spec = ModelSpec { noise_intensity: 0.0, ..ModelSpec::default() };
    let params = SchemeParams::new(16, 3, 3, THETA, 1.0).unwrap();
    // ‖P_3 F(c e_1)‖ from quadrature; c chosen so that it exceeds (N/T)^θ = 2
    let c = 4.0;
    let drift: f64 = (1..=3)
        .map(|k| simpson(|x| spec.reaction(c * e(1, x)) * e(k, x)).powi(2))
        .sum::<f64>()
        .sqrt();
    assert!(drift > params.threshold());
    let y = SpectralField::new(vec![c, 0.0, 0.0]).unwrap();
    let gate = indicator(&y, &params, &spec).unwrap();
    assert!(!gate.open);
    assert!((gate.drift_norm - drift).abs() < 1e-10);
    let (out, frozen) = stopped_euler_step(&y, &[0.3, -0.1, 0.2], &params, &spec).unwrap();
    assert!(frozen);
    let decay = (-std::f64::consts::PI.powi(2) * params.dt()).exp();
    assert_eq!(out.coeff(1), c * decay);
    assert_eq!(out.coeff(2), 0.0);
}

#[test]
fn untamed_agrees_when_the_gate_never_closes() {
    let spec = ModelSpec { initial: InitialCondition::Parabola { scale: 1.0 }, ..ModelSpec::default() };
    let params = SchemeParams::new(64, 8, 8, THETA, 1.0).unwrap();
    for s in 0..5 {
        let path = BrownianPath::generate(s, 64, 8, 1.0).unwrap();
        let a = simulate(&params, &spec, &path).unwrap();
        let b = simulate_untamed(&params, &spec, &path).unwrap();
        assert_eq!(a.frozen_count(), 0);
        assert_eq!(a.states, b.states);
    }
}

#[test]
fn random_states_evolve_finitely() {
    let spec = ModelSpec::default();
    let params = SchemeParams::new(32, 16, 4, THETA, 1.0).unwrap();
    for i in 0..50 {
        let y = random_field(5, i, 16, 3.0);
        let dw: Vec<f64> = (0..4).map(|l| counter_normal(6, i, l) * params.dt().sqrt()).collect();
        let (out, _) = stopped_euler_step(&y, &dw, &params, &spec).unwrap();
        assert!(!out.is_diverged());
        // an open step adds at most Δt·thr + thr·|ΔW|, and the semigroup contracts
        let dw_norm = dw.iter().map(|d| d * d).sum::<f64>().sqrt();
        let bound = y.norm() + params.threshold() * (params.dt() + dw_norm);
        assert!(out.norm() <= bound * (1.0 + 1e-12), "sample {i}");
    }
}

#[test]
fn counterpart_gap_shrinks_with_step() {
    let spec = ModelSpec::default();
    let cfg = AnalysisConfig { samples: 16, ..AnalysisConfig::default() };
    let report = run_counterpart_gap(&spec, THETA, &[8, 16, 32, 64], 8, 8, 8, &cfg).unwrap();
    assert!(report.slope <= -0.4, "{report:?}");
    assert!(report.entries.iter().all(|e| e.gap.is_finite() && e.gap > 0.0));
}
