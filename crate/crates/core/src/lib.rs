//! Spectral-Galerkin simulation of a stochastic reaction-diffusion equation
//! with the nonlinearities-stopped exponential Euler scheme, plus the Monte
//! Carlo machinery to measure its strong convergence and moment bounds.

pub mod analysis;
pub mod error;
pub mod experiment;
pub mod model;
pub mod noise;
pub mod scheme;
pub mod spectral;
pub mod stats;
pub mod transform;

pub use error::{Error, Result};
pub use model::{coercivity_constant, taming_threshold, HsNorm, InitialCondition, ModelSpec, NoiseCovariance, TheoryConstants};
pub use noise::{sample_seed, BrownianPath};
pub use scheme::{
    indicator, simulate, simulate_counterpart, simulate_untamed, stopped_euler_step, CounterpartRun, Indicator,
    SchemeParams, Trajectory,
};
pub use spectral::{phi1_weight, project, OperatorSpectrum, SpectralField};
pub use transform::GridPlan;
