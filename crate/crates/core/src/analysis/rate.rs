use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::{Axis, Resolution};
use super::strong::{check_series, Bootstrap, ErrorEstimate};
use super::SCHEMA_VERSION;
use crate::error::{Error, Result};
use crate::stats::{percentile_interval, BootstrapIndices};

/// Least-squares fit of `log error ≈ intercept − rate · log resolution`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub rate: f64,
    pub intercept: f64,
    /// Leading points excluded as pre-asymptotic.
    pub dropped: usize,
    /// Two-point rates between neighbouring resolutions.
    pub local_rates: Vec<f64>,
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    ols(x, y).0
}

fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fits the convergence rate. Leading points are dropped, and reported in
/// [`RateFit::dropped`], while the two-point rate to the next point deviates
/// from the fit of the remaining points by more than half; at least three
/// points are always kept.
pub fn fit_rate(resolutions: &[f64], errors: &[f64]) -> Result<RateFit> {
    if resolutions.len() != errors.len() {
        return Err(Error::argument("resolution and error lists differ in length"));
    }
    if errors.len() < 3 {
        return Err(Error::argument(format!("rate fit needs at least 3 points, got {}", errors.len())));
    }
    if let Some(e) = errors.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(Error::argument(format!("errors must be positive and finite, got {e}")));
    }
    if resolutions.iter().any(|r| !(r.is_finite() && *r > 0.0))
        || resolutions.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::argument("resolutions must be positive and strictly increasing"));
    }
    let x: Vec<f64> = resolutions.iter().map(|r| r.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let local_rates = x
        .windows(2)
        .zip(y.windows(2))
        .map(|(a, b)| -(b[1] - b[0]) / (a[1] - a[0]))
        .collect::<Vec<_>>();
    let mut start = 0;
    while x.len() - start > 3 {
        let tail = -ols(&x[start + 1..], &y[start + 1..]).0;
        if (local_rates[start] - tail).abs() > 0.5 * tail.abs() {
            start += 1;
        } else {
            break;
        }
    }
    let (slope, intercept) = ols(&x[start..], &y[start..]);
    Ok(RateFit {
        rate: -slope,
        intercept,
        dropped: start,
        local_rates,
    })
}

/// Empirical convergence rate along one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub schema_version: u32,
    pub axis: Axis,
    pub resolutions: Vec<usize>,
    pub errors: Vec<ErrorEstimate>,
    /// The fitted rate; errors behave like `resolution^{-fitted_slope}`.
    pub fitted_slope: f64,
    pub slope_interval: [f64; 2],
    pub dropped_leading: usize,
    pub local_slopes: Vec<f64>,
    pub p: f64,
    pub samples: usize,
    pub tests: Vec<Resolution>,
    pub reference: Option<Resolution>,
    /// Set when the errors were generated from a formula instead of runs.
    pub synthetic: Option<String>,
}

/// Estimates, intervals and the fitted rate from per-resolution,
/// per-sample error series. Every bootstrap resample uses the same sample
/// draw on all resolutions, keeping the coupling.
pub fn rate_report(
    axis: Axis,
    tests: &[Resolution],
    pathwise: &[Vec<Vec<f64>>],
    p: f64,
    boot: &Bootstrap,
) -> Result<RateReport> {
    if tests.len() != pathwise.len() {
        return Err(Error::argument("one error series set per resolution is required"));
    }
    for set in pathwise {
        check_series(set)?;
    }
    let samples = pathwise[0].len();
    if pathwise.iter().any(|s| s.len() != samples) {
        return Err(Error::Decoupled("resolutions were run on different sample sets".into()));
    }
    let resolutions: Vec<usize> = tests.iter().map(|t| axis.value(t)).collect();
    let res_f: Vec<f64> = resolutions.iter().map(|&r| r as f64).collect();
    let errors = pathwise
        .iter()
        .map(|set| super::strong::error_estimate(set, p, boot))
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<f64> = errors.iter().map(|e| e.estimate).collect();
    let fit = fit_rate(&res_f, &points)?;

    let draws = BootstrapIndices::new(boot.seed ^ 0x51_09e, samples);
    let x: Vec<f64> = res_f[fit.dropped..].iter().map(|r| r.ln()).collect();
    let mut slopes = Vec::with_capacity(boot.resamples);
    for b in 0..boot.resamples {
        let idx: Vec<usize> = draws.resample(b).collect();
        let y: Vec<f64> = pathwise[fit.dropped..]
            .iter()
            .map(|set| super::strong::sup_moment(set, p, idx.iter().copied()).ln())
            .collect();
        if y.iter().all(|v| v.is_finite()) {
            slopes.push(-ols(&x, &y).0);
        }
    }
    let slope_interval = if slopes.is_empty() {
        [f64::NAN, f64::NAN]
    } else {
        let (lo, hi) = percentile_interval(slopes, boot.level);
        [lo, hi]
    };
    Ok(RateReport {
        schema_version: SCHEMA_VERSION,
        axis,
        resolutions,
        errors,
        fitted_slope: fit.rate,
        slope_interval,
        dropped_leading: fit.dropped,
        local_slopes: fit.local_rates,
        p,
        samples,
        tests: tests.to_vec(),
        reference: None,
        synthetic: None,
    })
}

impl RateReport {
    /// Report for errors given by a formula, with degenerate intervals.
    pub fn synthetic(axis: Axis, resolutions: &[usize], errors: &[f64], label: &str) -> Result<Self> {
        let res_f: Vec<f64> = resolutions.iter().map(|&r| r as f64).collect();
        let fit = fit_rate(&res_f, errors)?;
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            axis,
            resolutions: resolutions.to_vec(),
            errors: errors
                .iter()
                .map(|&e| ErrorEstimate { estimate: e, lower: e, upper: e })
                .collect(),
            fitted_slope: fit.rate,
            slope_interval: [fit.rate, fit.rate],
            dropped_leading: fit.dropped,
            local_slopes: fit.local_rates,
            p: 0.0,
            samples: 0,
            tests: Vec::new(),
            reference: None,
            synthetic: Some(label.to_string()),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `resolution,error,ci_lower,ci_upper,local_slope` rows; the fit goes
    /// into `#` comment lines after `comment`.
    pub fn write_csv<W: Write>(&self, mut w: W, comment: &str) -> Result<()> {
        for line in comment.lines() {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "# schema_version: {}", self.schema_version)?;
        writeln!(w, "# axis: {}", self.axis)?;
        writeln!(w, "# fitted_slope: {}", self.fitted_slope)?;
        writeln!(
            w,
            "# slope_interval: {} {}",
            self.slope_interval[0], self.slope_interval[1]
        )?;
        writeln!(w, "# dropped_leading: {}", self.dropped_leading)?;
        writeln!(w, "resolution,error,ci_lower,ci_upper,local_slope")?;
        for (i, (r, e)) in self.resolutions.iter().zip(&self.errors).enumerate() {
            write!(w, "{r},{},{},{},", e.estimate, e.lower, e.upper)?;
            if let Some(s) = self.local_slopes.get(i) {
                write!(w, "{s}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}
