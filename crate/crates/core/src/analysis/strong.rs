use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scheme::Trajectory;
use crate::stats::{pairwise_sum, percentile_interval, BootstrapIndices};

/// Nonparametric percentile bootstrap settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bootstrap {
    pub resamples: usize,
    pub seed: u64,
    pub level: f64,
}

impl Default for Bootstrap {
    fn default() -> Self {
        Self {
            resamples: 1000,
            seed: 0x5eed_b007,
            level: 0.95,
        }
    }
}

/// Point estimate with a bootstrap interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// `‖Y_ref(t_k) − Y_test(t_k)‖_H` at every grid time of `test`; the smaller
/// field is zero-padded.
pub fn pathwise_errors(test: &Trajectory, reference: &Trajectory) -> Result<Vec<f64>> {
    if test.path_seed != reference.path_seed {
        return Err(Error::Decoupled(format!(
            "test path seed {:#x} differs from reference seed {:#x}",
            test.path_seed, reference.path_seed
        )));
    }
    if test.horizon != reference.horizon {
        return Err(Error::Decoupled("test and reference horizons differ".into()));
    }
    if reference.steps % test.steps != 0 {
        return Err(Error::argument(format!(
            "test grid N = {} is not a subset of the reference grid N = {}",
            test.steps, reference.steps
        )));
    }
    let stride = reference.steps / test.steps;
    Ok(test
        .states
        .iter()
        .enumerate()
        .map(|(k, s)| s.distance(&reference.states[k * stride]))
        .collect())
}

/// `max_k ((1/M) Σ_s e_s(k)^p)^{1/p}` for per-sample error series `e_s`.
pub fn lp_sup_error(pathwise: &[Vec<f64>], p: f64) -> f64 {
    sup_moment(pathwise, p, 0..pathwise.len())
}

pub(crate) fn sup_moment(pathwise: &[Vec<f64>], p: f64, draw: impl Iterator<Item = usize> + Clone) -> f64 {
    let times = pathwise.first().map_or(0, Vec::len);
    let mut buf = Vec::with_capacity(pathwise.len());
    let mut worst: f64 = 0.0;
    for k in 0..times {
        buf.clear();
        buf.extend(draw.clone().map(|s| pathwise[s][k].powf(p)));
        let m = (pairwise_sum(&buf) / buf.len() as f64).powf(1.0 / p);
        // NaN must win so diverged samples are visible in the estimate
        worst = if m.is_nan() { m } else { worst.max(m) };
        if worst.is_nan() {
            break;
        }
    }
    worst
}

/// Estimate plus a bootstrap interval over resampled samples. The whole
/// statistic, including the max over time, is recomputed per resample.
pub fn error_estimate(pathwise: &[Vec<f64>], p: f64, boot: &Bootstrap) -> Result<ErrorEstimate> {
    check_series(pathwise)?;
    let estimate = lp_sup_error(pathwise, p);
    let draws = BootstrapIndices::new(boot.seed, pathwise.len());
    let replicates: Vec<f64> = (0..boot.resamples)
        .map(|b| {
            let idx: Vec<usize> = draws.resample(b).collect();
            sup_moment(pathwise, p, idx.iter().copied())
        })
        .collect();
    let (lower, upper) = percentile_interval(replicates, boot.level);
    Ok(ErrorEstimate { estimate, lower, upper })
}

pub(crate) fn check_series(pathwise: &[Vec<f64>]) -> Result<()> {
    let Some(first) = pathwise.first() else {
        return Err(Error::argument("no samples"));
    };
    if pathwise.iter().any(|e| e.len() != first.len()) {
        return Err(Error::argument("error series of different lengths"));
    }
    Ok(())
}

/// Coupled strong `L^p` error of `test_runs` against `reference_runs`,
/// paired sample by sample.
pub fn strong_error(
    test_runs: &[Trajectory],
    reference_runs: &[Trajectory],
    p: f64,
    boot: &Bootstrap,
) -> Result<ErrorEstimate> {
    if test_runs.len() != reference_runs.len() {
        return Err(Error::Decoupled(format!(
            "{} test runs against {} reference runs",
            test_runs.len(),
            reference_runs.len()
        )));
    }
    let pathwise = test_runs
        .iter()
        .zip(reference_runs)
        .map(|(t, r)| pathwise_errors(t, r))
        .collect::<Result<Vec<_>>>()?;
    error_estimate(&pathwise, p, boot)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lp_of_constant_series() {
        let e = vec![vec![0.0, 2.0, 1.0]; 5];
        assert_eq!(lp_sup_error(&e, 2.0), 2.0);
        let e = vec![vec![0.0, 1.0], vec![0.0, 3.0]];
        // ((1 + 9)/2)^{1/2}
        assert!((lp_sup_error(&e, 2.0) - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn nan_propagates() {
        let e = vec![vec![0.0, 1.0], vec![0.0, f64::NAN]];
        assert!(lp_sup_error(&e, 2.0).is_nan());
    }

    #[test]
    fn interval_brackets_estimate() {
        let e: Vec<Vec<f64>> = (0..64).map(|i| vec![0.0, 1.0 + (i % 7) as f64 / 7.0]).collect();
        let est = error_estimate(&e, 2.0, &Bootstrap::default()).unwrap();
        assert!(est.lower <= est.estimate && est.estimate <= est.upper);
        assert!(est.upper - est.lower < 0.2);
        assert!(error_estimate(&[], 2.0, &Bootstrap::default()).is_err());
    }
}
