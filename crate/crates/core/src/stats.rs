//! Order-fixed reductions and small statistics helpers.

use crate::noise::counter_uniform;

/// Pairwise (binary-tree) sum. The association order depends only on the
/// slice length, so equal inputs always give bit-identical results.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        len => {
            let mid = len.next_power_of_two() / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

pub fn mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mu = mean(values);
    let sq: Vec<f64> = values.iter().map(|v| (v - mu) * (v - mu)).collect();
    pairwise_sum(&sq) / (n - 1) as f64
}

/// Empirical `q`-quantile by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Deterministic stream of bootstrap index draws.
pub struct BootstrapIndices {
    seed: u64,
    samples: usize,
}

impl BootstrapIndices {
    pub fn new(seed: u64, samples: usize) -> Self {
        Self { seed, samples }
    }

    /// Indices of resample `b`.
    pub fn resample(&self, b: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.samples).map(move |i| {
            let u = counter_uniform(self.seed, b as u64, i as u64);
            ((u * self.samples as f64) as usize).min(self.samples - 1)
        })
    }
}

/// Percentile interval `[q_lo, q_hi]` of `values`.
pub fn percentile_interval(mut values: Vec<f64>, level: f64) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    (quantile(&values, alpha), quantile(&values, 1.0 - alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_exact_integers() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn moments() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&v), 2.5);
        assert!((variance(&v) - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(quantile(&v, 0.5), 2.5);
    }

    #[test]
    fn bootstrap_indices_in_range_and_reproducible() {
        let b = BootstrapIndices::new(7, 10);
        let a: Vec<usize> = b.resample(3).collect();
        let c: Vec<usize> = b.resample(3).collect();
        assert_eq!(a, c);
        assert!(a.iter().all(|&i| i < 10));
    }
}
