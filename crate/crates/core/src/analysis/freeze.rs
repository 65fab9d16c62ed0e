use serde::{Deserialize, Serialize};

use super::RunSummary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreezeEntry {
    pub steps: usize,
    pub frozen: usize,
    pub total: usize,
    pub fraction: f64,
}

impl FreezeEntry {
    /// Binomial standard error of the fraction.
    pub fn std_error(&self) -> f64 {
        (self.fraction * (1.0 - self.fraction) / self.total as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreezeReport {
    /// Sorted by increasing `N`.
    pub entries: Vec<FreezeEntry>,
    /// Whether the fraction never rises by more than two binomial standard
    /// errors from one `N` to the next.
    pub monotone: bool,
    /// Log-log slope of the fraction against `N` over the nonzero entries.
    pub slope: Option<f64>,
}

/// Fraction of frozen steps per step count.
pub fn freeze_fraction<G: AsRef<[RunSummary]>>(groups: &[G]) -> Result<FreezeReport> {
    let mut entries = Vec::with_capacity(groups.len());
    for g in groups {
        let runs = g.as_ref();
        let first = runs.first().ok_or_else(|| Error::argument("empty run group"))?;
        let steps = first.resolution.steps;
        if runs.iter().any(|r| r.resolution.steps != steps) {
            return Err(Error::argument("run group mixes step counts"));
        }
        if entries.iter().any(|e: &FreezeEntry| e.steps == steps) {
            return Err(Error::argument(format!("step count {steps} appears twice")));
        }
        let frozen: usize = runs.iter().map(|r| r.frozen).sum();
        let total = steps * runs.len();
        entries.push(FreezeEntry {
            steps,
            frozen,
            total,
            fraction: frozen as f64 / total as f64,
        });
    }
    entries.sort_by_key(|e| e.steps);
    let monotone = entries.windows(2).all(|w| {
        let tol = 2.0 * (w[0].std_error().powi(2) + w[1].std_error().powi(2)).sqrt();
        w[1].fraction <= w[0].fraction + tol
    });
    let positive: Vec<&FreezeEntry> = entries.iter().filter(|e| e.fraction > 0.0).collect();
    let slope = (positive.len() >= 2).then(|| {
        let x: Vec<f64> = positive.iter().map(|e| (e.steps as f64).ln()).collect();
        let y: Vec<f64> = positive.iter().map(|e| e.fraction.ln()).collect();
        super::rate::ols_slope(&x, &y)
    });
    Ok(FreezeReport { entries, monotone, slope })
}
