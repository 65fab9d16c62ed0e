//! Monte Carlo estimators and theory-side formulas: coupled strong errors,
//! empirical rates, the a priori moment bound and the freeze diagnostic.
//!
//! Estimators take per-sample records in sample order and reduce them with
//! [`pairwise_sum`](crate::stats::pairwise_sum), so results do not depend on
//! how the samples were scheduled.

mod config;
mod freeze;
mod moments;
mod rate;
mod strong;

use serde::{Deserialize, Serialize};

pub use config::{AbstractConstants, AnalysisConfig, Axis, Resolution};
pub use freeze::{freeze_fraction, FreezeEntry, FreezeReport};
pub use moments::{
    lemma1_bound, lemma1_constant, moment_bound_check, sobolev_bound_check, MomentCheck, MomentReport,
    SobolevEntry, SobolevReport,
};
pub use rate::{fit_rate, ols_slope, rate_report, RateFit, RateReport};
pub use strong::{error_estimate, lp_sup_error, pathwise_errors, strong_error, Bootstrap, ErrorEstimate};

use crate::scheme::Trajectory;
use crate::spectral::OperatorSpectrum;

/// Version stamped into every serialized report.
pub const SCHEMA_VERSION: u32 = 1;

/// The per-time norms and flags of one trajectory, which is all the moment,
/// freeze and Sobolev statistics need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub resolution: Resolution,
    pub horizon: f64,
    pub path_seed: u64,
    /// `‖Y_{t_k}‖_H`, `k = 0..=N`.
    pub h_norms: Vec<f64>,
    /// Exponent of `eta_norms`.
    pub eta: f64,
    /// `‖Y_{t_k}‖_{H_η}`.
    pub eta_norms: Vec<f64>,
    pub frozen: usize,
    pub diverged_at: Option<usize>,
    pub ambiguous_steps: usize,
}

impl RunSummary {
    pub fn new(traj: &Trajectory, spectrum: &OperatorSpectrum, eta: f64) -> Self {
        Self {
            resolution: Resolution::new(traj.steps, traj.modes, traj.noise_modes),
            horizon: traj.horizon,
            path_seed: traj.path_seed,
            h_norms: traj.states.iter().map(|s| s.norm()).collect(),
            eta,
            eta_norms: traj
                .states
                .iter()
                .map(|s| spectrum.fractional_norm(s, eta))
                .collect(),
            frozen: traj.frozen_count(),
            diverged_at: traj.diverged_at,
            ambiguous_steps: traj.ambiguous_steps,
        }
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.horizon / self.resolution.steps as f64
    }
}
