use stopspde_core::analysis::{
    fit_rate, freeze_fraction, lemma1_bound, lemma1_constant, moment_bound_check, pathwise_errors,
    sobolev_bound_check, strong_error, AnalysisConfig, Axis, Bootstrap, RateReport, Resolution, RunSummary,
};
use stopspde_core::experiment::run_convergence;
use stopspde_core::noise::{counter_normal, counter_uniform};
use stopspde_core::{simulate, BrownianPath, Error, ModelSpec, SchemeParams};

const THETA: f64 = 0.25;

fn runs(spec: &ModelSpec, r: Resolution, samples: u64) -> Vec<stopspde_core::Trajectory> {
    let params = SchemeParams::new(r.steps, r.modes, r.noise_modes, THETA, spec.horizon).unwrap();
    (0..samples)
        .map(|s| {
            let path = BrownianPath::generate(s, r.steps, r.noise_modes, spec.horizon).unwrap();
            simulate(&params, spec, &path).unwrap()
        })
        .collect()
}

fn summary(steps: usize, frozen: usize, norms: Vec<f64>) -> RunSummary {
    RunSummary {
        resolution: Resolution::new(steps, 4, 4),
        horizon: 1.0,
        path_seed: 0,
        eta_norms: norms.clone(),
        h_norms: norms,
        eta: 0.0,
        frozen,
        diverged_at: None,
        ambiguous_steps: 0,
    }
}

#[test]
fn error_of_a_run_against_itself_is_zero() {
    let spec = ModelSpec::default();
    let a = runs(&spec, Resolution::new(16, 8, 8), 10);
    let est = strong_error(&a, &a, 2.0, &Bootstrap::default()).unwrap();
    assert_eq!((est.estimate, est.lower, est.upper), (0.0, 0.0, 0.0));
}

#[test]
fn mismatched_paths_are_rejected() {
    let spec = ModelSpec::default();
    let a = runs(&spec, Resolution::new(16, 8, 8), 2);
    assert!(matches!(pathwise_errors(&a[0], &a[1]), Err(Error::Decoupled(_))));
    assert!(matches!(
        strong_error(&a[..1], &a, 2.0, &Bootstrap::default()),
        Err(Error::Decoupled(_))
    ));
}

#[test]
fn linear_model_has_no_temporal_error() {
    let spec = ModelSpec { reaction_rate: 0.0, noise_intensity: 0.0, ..ModelSpec::default() };
    let tests: Vec<Resolution> = [8, 16, 32].map(|n| Resolution::new(n, 16, 4)).to_vec();
    let cfg = AnalysisConfig {
        samples: 4,
        reference: Resolution::new(256, 16, 4),
        bootstrap_resamples: 50,
        ..AnalysisConfig::default()
    };
    let run = run_convergence(&spec, THETA, Axis::Temporal, &tests, &cfg).unwrap();
    for e in &run.report.errors {
        assert!(e.estimate <= 1e-12, "{e:?}");
    }
}

#[test]
fn noisy_square_root_data_fits_half() {
    let res: Vec<f64> = (3..=10).map(|k| (1u64 << k) as f64).collect();
    for trial in 0..20 {
        let err: Vec<f64> = res
            .iter()
            .enumerate()
            .map(|(i, n)| 0.7 * n.powf(-0.5) * (1.0 + 0.05 * counter_normal(31, trial, i as u64)))
            .collect();
        let fit = fit_rate(&res, &err).unwrap();
        assert!((0.4..=0.6).contains(&fit.rate), "trial {trial}: {}", fit.rate);
    }
}

#[test]
fn synthetic_report_recovers_exact_power() {
    let res = [8, 16, 32, 64];
    let err: Vec<f64> = res.iter().map(|&n| (n as f64).powf(-0.5)).collect();
    let r = RateReport::synthetic(Axis::Temporal, &res, &err, "h^0.5").unwrap();
    assert!((r.fitted_slope - 0.5).abs() < 1e-12);
    assert_eq!(r.slope_interval, [r.fitted_slope; 2]);
    assert_eq!(r.synthetic.as_deref(), Some("h^0.5"));
}

#[test]
fn lemma1_constant_matches_formula() {
    for i in 0..20u64 {
        let u = |j| counter_uniform(91, i, j);
        let p = 2.0 + 4.0 * u(0);
        let c = 1.0 + 3.0 * u(1);
        let t = 0.1 + 1.9 * u(2);
        let theta = 0.01 + 0.24 * u(3);
        let k = lemma1_constant(p, c, t, theta).unwrap();
        let bracket = t.powf(1.0 - 2.0 * theta) + p / 2.0 * t.powf(0.5 - 2.0 * theta);
        let expected = 3.0 * (p - 2.0) + 2.0 * c.powf(p / 2.0) + 2.0 * bracket.powf(p / 2.0);
        assert!((k - expected).abs() <= 1e-12 * expected, "tuple {i}");
        let m0 = 10.0 * u(4);
        let s = t * u(5);
        assert!((lemma1_bound(m0, k, s) - (m0 + k * s) * (k * s).exp()).abs() <= 1e-12 * lemma1_bound(m0, k, s));
    }
    // p = 2, C = 1, T = 1, θ = 1/4: 0 + 2 + 2(1 + 1) = 6
    assert!((lemma1_constant(2.0, 1.0, 1.0, 0.25).unwrap() - 6.0).abs() < 1e-15);
    assert!(lemma1_constant(1.5, 1.0, 1.0, 0.25).is_err());
    assert!(lemma1_constant(2.0, 0.5, 1.0, 0.25).is_err());
}

#[test]
fn moment_check_flags_growth_beyond_the_envelope() {
    let spec = ModelSpec::default();
    let calm: Vec<RunSummary> = (0..8).map(|_| summary(4, 0, vec![1.0, 1.0, 1.0, 1.0, 1.0])).collect();
    let check = moment_bound_check(&calm, 2.0, &spec, THETA).unwrap();
    assert!(check.pass);
    assert_eq!(check.worst_time, 0.0);
    let wild: Vec<RunSummary> = (0..8).map(|_| summary(4, 0, vec![1.0, 1.0, 1.0, 1.0, 1e6])).collect();
    let check = moment_bound_check(&wild, 2.0, &spec, THETA).unwrap();
    assert!(!check.pass);
    assert_eq!(check.worst_time, 1.0);
}

#[test]
fn freeze_fractions_and_monotonicity() {
    let group = |steps: usize, frozen: &[usize]| -> Vec<RunSummary> {
        frozen.iter().map(|&f| summary(steps, f, vec![1.0; steps + 1])).collect()
    };
    let falling = [group(8, &[4, 2]), group(16, &[2, 2]), group(32, &[1, 1])];
    let report = freeze_fraction(&falling).unwrap();
    let fractions: Vec<f64> = report.entries.iter().map(|e| e.fraction).collect();
    assert_eq!(fractions, vec![6.0 / 16.0, 4.0 / 32.0, 2.0 / 64.0]);
    assert!(report.monotone);
    assert!(report.slope.unwrap() < 0.0);

    let rising = [group(8, &[0; 50]), group(16, &[16; 50])];
    assert!(!freeze_fraction(&rising).unwrap().monotone);

    let repeated = [group(8, &[0]), group(8, &[1])];
    assert!(freeze_fraction(&repeated).is_err());
}

#[test]
fn sobolev_at_zero_is_the_h_moment() {
    let spec = ModelSpec::default();
    let spectrum = spec.spectrum().unwrap();
    let groups: Vec<Vec<RunSummary>> = [16, 32]
        .map(|n| {
            runs(&spec, Resolution::new(n, 8, 8), 8)
                .iter()
                .map(|t| RunSummary::new(t, &spectrum, 0.0))
                .collect()
        })
        .to_vec();
    let report = sobolev_bound_check(&groups, 0.0, 2.0).unwrap();
    for (g, entry) in groups.iter().zip(&report.entries) {
        let steps = g[0].resolution.steps;
        let sup = (0..=steps)
            .map(|k| (g.iter().map(|r| r.h_norms[k].powi(2)).sum::<f64>() / g.len() as f64).sqrt())
            .fold(0.0, f64::max);
        assert!((entry.sup_moment - sup).abs() <= 1e-12 * sup);
    }
    assert!(report.pass);
}
