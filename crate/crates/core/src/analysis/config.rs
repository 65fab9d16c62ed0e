use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A discretisation triple `(N, n, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resolution {
    pub steps: usize,
    pub modes: usize,
    pub noise_modes: usize,
}

impl Resolution {
    pub fn new(steps: usize, modes: usize, noise_modes: usize) -> Self {
        Self { steps, modes, noise_modes }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.modes == 0 || self.noise_modes == 0 {
            return Err(Error::config(format!(
                "resolution entries must be positive, got (N, n, m) = ({}, {}, {})",
                self.steps, self.modes, self.noise_modes
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N={} n={} m={}", self.steps, self.modes, self.noise_modes)
    }
}

/// Which discretisation parameter a convergence study refines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Temporal,
    Spatial,
    Noise,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Temporal, Axis::Spatial, Axis::Noise];

    pub fn name(self) -> &'static str {
        match self {
            Axis::Temporal => "temporal",
            Axis::Spatial => "spatial",
            Axis::Noise => "noise",
        }
    }

    /// The refined entry of `r`.
    pub fn value(self, r: &Resolution) -> usize {
        match self {
            Axis::Temporal => r.steps,
            Axis::Spatial => r.modes,
            Axis::Noise => r.noise_modes,
        }
    }

    fn others(self, r: &Resolution) -> (usize, usize) {
        match self {
            Axis::Temporal => (r.modes, r.noise_modes),
            Axis::Spatial => (r.steps, r.noise_modes),
            Axis::Noise => (r.steps, r.modes),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "temporal" => Ok(Axis::Temporal),
            "spatial" => Ok(Axis::Spatial),
            "noise" => Ok(Axis::Noise),
            other => Err(Error::config(format!(
                "unknown axis `{other}` (expected temporal, spatial or noise)"
            ))),
        }
    }
}

/// Existence-level constants of the abstract setting, fixed here as
/// experiment configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbstractConstants {
    pub gamma: f64,
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub a: f64,
    pub c: f64,
}

impl Default for AbstractConstants {
    fn default() -> Self {
        Self {
            gamma: 0.3,
            delta: 0.0,
            alpha: 0.3,
            beta: 0.0,
            a: 2.0,
            c: 1.0,
        }
    }
}

/// Monte Carlo and rate-target settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Error moment order, at least 2.
    pub p: f64,
    /// Smoothness exponent of the `H_η` statistics.
    pub eta: f64,
    /// Slack subtracted from the nominal rates.
    pub iota: f64,
    /// Growth exponent of the perturbation estimate; must exceed `2/p`.
    pub kappa_growth: f64,
    /// Samples per master seed.
    pub samples: usize,
    /// Master seeds; sample `i` of seed `s` runs on `sample_seed(s, i)`.
    pub seeds: Vec<u64>,
    /// Reference resolution for coupled error estimates.
    pub reference: Resolution,
    /// Minimum ratio between the reference and the finest test value on the
    /// refined axis.
    pub separation: usize,
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
    pub constants: AbstractConstants,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            p: 2.0,
            eta: 0.3,
            iota: 0.05,
            kappa_growth: 2.0,
            samples: 256,
            seeds: vec![20_240_917],
            reference: Resolution::new(1024, 128, 128),
            separation: 8,
            bootstrap_resamples: 1000,
            bootstrap_seed: 0x5eed_b007,
            constants: AbstractConstants::default(),
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        let k = &self.constants;
        if !(self.p.is_finite() && self.p >= 2.0) {
            return Err(Error::config(format!("p must be at least 2, got {}", self.p)));
        }
        for (name, v) in [("gamma", k.gamma), ("delta", k.delta), ("alpha", k.alpha), ("beta", k.beta)] {
            if !(0.0..0.5).contains(&v) {
                return Err(Error::config(format!("{name} must lie in [0, 1/2), got {v}")));
            }
        }
        for (name, v) in [("a", k.a), ("c", k.c)] {
            if !(v.is_finite() && v >= 1.0) {
                return Err(Error::config(format!("{name} must be at least 1, got {v}")));
            }
        }
        let low = k.gamma.max(k.delta);
        if !(self.eta >= low && self.eta < 0.5) {
            return Err(Error::config(format!(
                "eta must lie in [{low}, 1/2), got {}",
                self.eta
            )));
        }
        if !(self.iota > 0.0 && self.iota.is_finite()) {
            return Err(Error::config(format!("iota must be positive, got {}", self.iota)));
        }
        if !(self.kappa_growth > 2.0 / self.p && self.kappa_growth.is_finite()) {
            return Err(Error::config(format!(
                "kappa_growth must exceed 2/p = {}, got {}",
                2.0 / self.p,
                self.kappa_growth
            )));
        }
        if self.samples < 2 {
            return Err(Error::config("at least two samples are needed for confidence intervals"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("at least one master seed is required"));
        }
        if self.separation == 0 || self.bootstrap_resamples == 0 {
            return Err(Error::config("separation and bootstrap_resamples must be positive"));
        }
        self.reference.validate()
    }

    /// Checks a convergence study on `axis`: at least three test
    /// resolutions, strictly increasing on the axis and equal elsewhere, all
    /// compatible with and separated from the reference.
    pub fn check_study(&self, axis: Axis, tests: &[Resolution]) -> Result<()> {
        if tests.len() < 3 {
            return Err(Error::config(format!(
                "a rate fit needs at least 3 resolutions on the {axis} axis, got {}",
                tests.len()
            )));
        }
        for t in tests {
            t.validate()?;
        }
        if tests.windows(2).any(|w| axis.value(&w[1]) <= axis.value(&w[0])) {
            return Err(Error::config(format!(
                "{axis} resolutions must be strictly increasing"
            )));
        }
        if tests.iter().any(|t| axis.others(t) != axis.others(&tests[0])) {
            return Err(Error::config(format!(
                "only the {axis} entry may vary across a {axis} study"
            )));
        }
        let r = &self.reference;
        for t in tests {
            if r.steps % t.steps != 0 {
                return Err(Error::config(format!(
                    "reference N = {} is not divisible by test N = {}",
                    r.steps, t.steps
                )));
            }
            if r.modes < t.modes || r.noise_modes < t.noise_modes {
                return Err(Error::config(format!(
                    "reference {r} is coarser than test {t}"
                )));
            }
        }
        let finest = axis.value(tests.last().expect("nonempty"));
        if axis.value(r) < self.separation * finest {
            return Err(Error::config(format!(
                "reference {axis} value {} is less than {}x the finest test value {finest}",
                axis.value(r),
                self.separation
            )));
        }
        Ok(())
    }

    /// Total number of Monte Carlo samples.
    pub fn total_samples(&self) -> usize {
        self.samples * self.seeds.len()
    }

    /// Per-sample path seeds in sample order.
    pub fn sample_seeds(&self) -> Vec<u64> {
        self.seeds
            .iter()
            .flat_map(|&s| (0..self.samples as u64).map(move |i| crate::noise::sample_seed(s, i)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        AnalysisConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_out_of_range_values() {
        let base = AnalysisConfig::default();
        for bad in [
            AnalysisConfig { p: 1.5, ..base.clone() },
            AnalysisConfig { eta: 0.5, ..base.clone() },
            AnalysisConfig { eta: 0.2, ..base.clone() },
            AnalysisConfig { kappa_growth: 1.0, ..base.clone() },
            AnalysisConfig { iota: 0.0, ..base.clone() },
            AnalysisConfig { seeds: vec![], ..base.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))), "{bad:?}");
        }
    }

    #[test]
    fn study_checks() {
        let cfg = AnalysisConfig::default();
        let temporal: Vec<Resolution> = [8, 16, 32, 64, 128]
            .iter()
            .map(|&n| Resolution::new(n, 128, 128))
            .collect();
        cfg.check_study(Axis::Temporal, &temporal).unwrap();
        assert!(cfg.check_study(Axis::Temporal, &temporal[..2]).is_err());
        let mut uneven = temporal.clone();
        uneven[1].modes = 64;
        assert!(cfg.check_study(Axis::Temporal, &uneven).is_err());
        let mut too_fine = temporal.clone();
        too_fine.push(Resolution::new(256, 128, 128));
        assert!(cfg.check_study(Axis::Temporal, &too_fine).is_err());
        let odd = [24, 48, 96].map(|n| Resolution::new(n, 128, 128));
        assert!(cfg.check_study(Axis::Temporal, &odd).is_err());
    }

    #[test]
    fn axis_parsing() {
        assert_eq!("noise".parse::<Axis>().unwrap(), Axis::Noise);
        assert!("time".parse::<Axis>().is_err());
    }

    #[test]
    fn sample_seeds_cover_every_master() {
        let cfg = AnalysisConfig { samples: 3, seeds: vec![1, 2], ..AnalysisConfig::default() };
        let seeds = cfg.sample_seeds();
        assert_eq!(seeds.len(), 6);
        assert_eq!(seeds[4], crate::noise::sample_seed(2, 1));
    }
}
