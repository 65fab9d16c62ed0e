use serde::{Deserialize, Serialize};

use super::config::Resolution;
use super::freeze::FreezeReport;
use super::{RunSummary, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::model::{coercivity_constant, taming_threshold, ModelSpec};
use crate::stats::{mean, variance};

/// Two-sided 99% normal quantile; its upper half is a conservative one-sided
/// 99% bound.
const Z99: f64 = 2.576;

/// `K = 3(p−2) + 2C^{p/2} + 2[T^{1−2θ} + (p/2)T^{1/2−2θ}]^{p/2}`.
pub fn lemma1_constant(p: f64, c: f64, horizon: f64, theta: f64) -> Result<f64> {
    if !(p >= 2.0 && p.is_finite()) {
        return Err(Error::argument(format!("p must be at least 2, got {p}")));
    }
    if !(c >= 1.0 && c.is_finite()) {
        return Err(Error::argument(format!("the constant C must be at least 1, got {c}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::argument(format!("horizon must be positive, got {horizon}")));
    }
    taming_threshold(1, 1.0, theta)?;
    let inner = horizon.powf(1.0 - 2.0 * theta) + 0.5 * p * horizon.powf(0.5 - 2.0 * theta);
    Ok(3.0 * (p - 2.0) + 2.0 * c.powf(0.5 * p) + 2.0 * inner.powf(0.5 * p))
}

/// `(E‖Y_0‖^p + K t) e^{K t}`.
pub fn lemma1_bound(initial_moment: f64, k: f64, t: f64) -> f64 {
    (initial_moment + k * t) * (k * t).exp()
}

/// Monte Carlo check of the a priori bound at one resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub resolution: Resolution,
    pub samples: usize,
    /// The coercivity constant of the model at `p̂ = (p−1)/2`.
    pub coercivity: f64,
    /// `max(1, coercivity)`, the value entering `K`.
    pub c_used: f64,
    pub constant_k: f64,
    pub times: Vec<f64>,
    /// Monte Carlo mean of `‖Y_t‖^p`.
    pub mean: Vec<f64>,
    /// `mean + 2.576 · standard error`.
    pub upper: Vec<f64>,
    pub bound: Vec<f64>,
    /// `min_t (bound − upper)`.
    pub worst_margin: f64,
    pub worst_time: f64,
    /// `max_t upper / bound`.
    pub worst_ratio: f64,
    pub diverged: usize,
    pub pass: bool,
}

/// Checks `E‖Y_t‖^p ≤ (E‖Y_0‖^p + Kt)e^{Kt}` at every grid time, using the
/// upper confidence bound of the estimate.
pub fn moment_bound_check(runs: &[RunSummary], p: f64, spec: &ModelSpec, theta: f64) -> Result<MomentCheck> {
    let first = runs.first().ok_or_else(|| Error::argument("no runs to check"))?;
    if runs
        .iter()
        .any(|r| r.resolution != first.resolution || r.horizon != first.horizon)
    {
        return Err(Error::argument("moment check mixes resolutions"));
    }
    let coercivity = coercivity_constant(spec, (p - 1.0) / 2.0)?;
    let c_used = coercivity.max(1.0);
    let k_const = lemma1_constant(p, c_used, first.horizon, theta)?;
    let steps = first.resolution.steps;
    let samples = runs.len();
    let initial: Vec<f64> = runs.iter().map(|r| r.h_norms[0].powf(p)).collect();
    let m0 = mean(&initial);

    let mut check = MomentCheck {
        resolution: first.resolution,
        samples,
        coercivity,
        c_used,
        constant_k: k_const,
        times: Vec::with_capacity(steps + 1),
        mean: Vec::with_capacity(steps + 1),
        upper: Vec::with_capacity(steps + 1),
        bound: Vec::with_capacity(steps + 1),
        worst_margin: f64::INFINITY,
        worst_time: 0.0,
        worst_ratio: 0.0,
        diverged: runs.iter().filter(|r| r.diverged_at.is_some()).count(),
        pass: true,
    };
    let mut vals = Vec::with_capacity(samples);
    for k in 0..=steps {
        vals.clear();
        vals.extend(runs.iter().map(|r| r.h_norms[k].powf(p)));
        let t = first.time(k);
        let mu = mean(&vals);
        let upper = mu + Z99 * (variance(&vals) / samples as f64).sqrt();
        let bound = lemma1_bound(m0, k_const, t);
        let margin = bound - upper;
        if !(margin >= check.worst_margin) {
            check.worst_margin = margin;
            check.worst_time = t;
        }
        check.worst_ratio = check.worst_ratio.max(upper / bound);
        check.times.push(t);
        check.mean.push(mu);
        check.upper.push(upper);
        check.bound.push(bound);
    }
    check.pass = check.worst_margin >= 0.0 && check.diverged == 0;
    Ok(check)
}

/// Per-resolution `sup_t (E‖Y_t‖^p_{H_η})^{1/p}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevEntry {
    pub resolution: Resolution,
    pub sup_moment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevReport {
    pub eta: f64,
    pub p: f64,
    pub entries: Vec<SobolevEntry>,
    pub max: f64,
    /// Log-log slope of the sup moment against `N`, when at least two step
    /// counts are present.
    pub slope: Option<f64>,
    pub pass: bool,
}

/// Witness that `H_η` moments stay bounded across resolutions: no growth
/// trend in `N` beyond a log-log slope of `±0.1`.
pub fn sobolev_bound_check<G: AsRef<[RunSummary]>>(groups: &[G], eta: f64, p: f64) -> Result<SobolevReport> {
    let mut entries = Vec::with_capacity(groups.len());
    for g in groups {
        let runs = g.as_ref();
        let first = runs.first().ok_or_else(|| Error::argument("empty run group"))?;
        if runs.iter().any(|r| r.eta != eta || r.resolution != first.resolution) {
            return Err(Error::argument(format!(
                "run group at {} was not summarised with eta = {eta}",
                first.resolution
            )));
        }
        let mut sup: f64 = 0.0;
        let mut vals = Vec::with_capacity(runs.len());
        for k in 0..first.eta_norms.len() {
            vals.clear();
            vals.extend(runs.iter().map(|r| r.eta_norms[k].powf(p)));
            let m = mean(&vals).powf(1.0 / p);
            sup = if m.is_nan() { m } else { sup.max(m) };
        }
        entries.push(SobolevEntry { resolution: first.resolution, sup_moment: sup });
    }
    let max = entries.iter().map(|e| e.sup_moment).fold(0.0, f64::max);
    let mut by_steps: Vec<(f64, f64)> = entries
        .iter()
        .map(|e| (e.resolution.steps as f64, e.sup_moment))
        .collect();
    by_steps.sort_by(|a, b| a.0.total_cmp(&b.0));
    by_steps.dedup_by(|a, b| a.0 == b.0);
    let slope = (by_steps.len() >= 2).then(|| {
        let x: Vec<f64> = by_steps.iter().map(|v| v.0.ln()).collect();
        let y: Vec<f64> = by_steps.iter().map(|v| v.1.ln()).collect();
        super::rate::ols_slope(&x, &y)
    });
    let finite = entries.iter().all(|e| e.sup_moment.is_finite());
    Ok(SobolevReport {
        eta,
        p,
        entries,
        max,
        slope,
        pass: finite && slope.is_none_or(|s| s.abs() <= 0.1),
    })
}

/// Combined output of the moment study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub schema_version: u32,
    pub p: f64,
    pub theta: f64,
    pub checks: Vec<MomentCheck>,
    pub freeze: FreezeReport,
    pub sobolev: SobolevReport,
    pub pass: bool,
}

impl MomentReport {
    pub fn new(p: f64, theta: f64, checks: Vec<MomentCheck>, freeze: FreezeReport, sobolev: SobolevReport) -> Self {
        let pass = checks.iter().all(|c| c.pass) && freeze.monotone && sobolev.pass;
        Self {
            schema_version: SCHEMA_VERSION,
            p,
            theta,
            checks,
            freeze,
            sobolev,
            pass,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_values() {
        assert!((lemma1_constant(2.0, 1.0, 1.0, 0.25).unwrap() - 6.0).abs() < 1e-15);
        for c in [1.0, 1.5, 3.0, 10.0] {
            assert!((lemma1_constant(2.0, c, 1.0, 0.1).unwrap() - (2.0 * c + 4.0)).abs() < 1e-13);
        }
        let mut last = 0.0;
        for c in [1.0, 1.1, 2.0, 5.0] {
            let k = lemma1_constant(4.0, c, 0.7, 0.2).unwrap();
            assert!(k >= last);
            last = k;
        }
    }

    #[test]
    fn constant_preconditions() {
        assert!(lemma1_constant(2.0, 0.9, 1.0, 0.25).is_err());
        assert!(lemma1_constant(1.5, 1.0, 1.0, 0.25).is_err());
        assert!(lemma1_constant(2.0, 1.0, 0.0, 0.25).is_err());
        assert!(lemma1_constant(2.0, 1.0, 1.0, 0.3).is_err());
    }
}
