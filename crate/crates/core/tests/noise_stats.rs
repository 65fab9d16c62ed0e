use statrs::distribution::{ContinuousCDF, Normal};
use stopspde_core::noise::counter_normal;
use stopspde_core::stats::{mean, pairwise_sum, variance};
use stopspde_core::BrownianPath;

const SEED: u64 = 0x0bad_cafe;

#[test]
fn increments_have_brownian_moments() {
    let steps = 1 << 14;
    let horizon = 2.0;
    let path = BrownianPath::generate(SEED, steps, 4, horizon).unwrap();
    let dt = horizon / steps as f64;
    for l in 1..=4 {
        let x: Vec<f64> = (0..steps).map(|k| path.fine(k, l)).collect();
        // four standard errors of the mean
        assert!(mean(&x).abs() <= 4.0 * (dt / steps as f64).sqrt(), "mode {l}");
        assert!((variance(&x) / dt - 1.0).abs() <= 0.05, "mode {l}");
    }
}

#[test]
fn normals_pass_kolmogorov_smirnov() {
    let n = 1 << 14;
    let mut x: Vec<f64> = (0..n).map(|i| counter_normal(SEED, 3, i as u64)).collect();
    x.sort_by(f64::total_cmp);
    let phi = Normal::new(0.0, 1.0).unwrap();
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = phi.cdf(v);
            (f - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - f)
        })
        .fold(0.0, f64::max);
    // 1% critical value
    assert!(d < 1.63 / (n as f64).sqrt(), "D = {d}");
}

#[test]
fn modes_and_steps_are_uncorrelated() {
    let steps = 1 << 16;
    let path = BrownianPath::generate(SEED, steps, 3, 1.0).unwrap();
    let dt = 1.0 / steps as f64;
    let corr = |a: &dyn Fn(usize) -> f64, b: &dyn Fn(usize) -> f64, len: usize| {
        let prod: Vec<f64> = (0..len).map(|k| a(k) * b(k)).collect();
        pairwise_sum(&prod) / (len as f64 * dt)
    };
    let bound = 4.0 / (steps as f64).sqrt();
    let across = corr(&|k| path.fine(k, 1), &|k| path.fine(k, 2), steps);
    assert!(across.abs() < bound, "modes 1, 2: {across}");
    let across = corr(&|k| path.fine(k, 2), &|k| path.fine(k, 3), steps);
    assert!(across.abs() < bound, "modes 2, 3: {across}");
    let lag = corr(&|k| path.fine(k, 1), &|k| path.fine(k + 1, 1), steps - 1);
    assert!(lag.abs() < bound, "lag one: {lag}");
}

#[test]
fn single_coarse_step_is_pairwise_total() {
    let steps = 1 << 10;
    let path = BrownianPath::generate(SEED, steps, 5, 1.0).unwrap();
    let top = path.level(1, 5).unwrap();
    for l in 1..=5 {
        let fine: Vec<f64> = (0..steps).map(|k| path.fine(k, l)).collect();
        assert_eq!(top.row(0)[l - 1].to_bits(), pairwise_sum(&fine).to_bits());
        assert_eq!(path.coarse_increment(1, 0, 5).unwrap()[l - 1].to_bits(), top.row(0)[l - 1].to_bits());
    }
}

#[test]
fn coarse_variance_scales_with_step() {
    let steps = 1 << 12;
    let samples = 400;
    let coarse = 16;
    let mut x = Vec::new();
    for s in 0..samples {
        let path = BrownianPath::generate(SEED ^ s, steps, 1, 1.0).unwrap();
        let t = path.level(coarse, 1).unwrap();
        x.extend((0..coarse).map(|j| t.row(j)[0]));
    }
    let v = variance(&x) * coarse as f64;
    assert!((v - 1.0).abs() < 0.05, "{v}");
}
