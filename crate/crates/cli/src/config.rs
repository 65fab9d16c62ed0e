//! Experiment configuration file.
//!
//! ```toml
//! [model]                      # every field required
//! diffusivity = 1.0
//! reaction_rate = 1.0
//! carrying_level = 1.0
//! noise_intensity = 0.25
//! horizon = 1.0
//! noise = { amplitude = 1.0, decay = 2.0 }
//! initial = { kind = "parabola", scale = 8.0 }
//!
//! [scheme]
//! theta = 0.25                 # default 0.25
//! counterpart_substeps = 8     # optional; enables the counterpart gap in `compare`
//!
//! [grid]                       # simulate, moments, compare
//! steps = [16, 32, 64]         # lists are zipped; length-1 lists broadcast
//! modes = [32]
//! noise_modes = [32]
//!
//! [converge.temporal]          # also converge.spatial, converge.noise
//! steps = [8, 16, 32, 64, 128] # the refined entry is a list, the others single values
//! modes = 128
//! noise_modes = 128
//! reference = { steps = 1024, modes = 128, noise_modes = 128 }
//!
//! [analysis]                   # optional overrides of the Monte Carlo settings
//! p = 2.0
//! samples = 256
//! seeds = [20240917]
//!
//! [output]
//! dir = "results"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use stopspde_core::analysis::{AnalysisConfig, Axis, Resolution};
use stopspde_core::experiment::shared_fine_steps;
use stopspde_core::{taming_threshold, ModelSpec};

use crate::Failure;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub scheme: SchemeSection,
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub converge: ConvergeSection,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeSection {
    pub theta: f64,
    pub counterpart_substeps: Option<usize>,
}

impl Default for SchemeSection {
    fn default() -> Self {
        Self { theta: 0.25, counterpart_substeps: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub steps: Vec<usize>,
    pub modes: Vec<usize>,
    pub noise_modes: Vec<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSection {
    pub temporal: Option<StudySection>,
    pub spatial: Option<StudySection>,
    pub noise: Option<StudySection>,
}

impl ConvergeSection {
    pub fn get(&self, axis: Axis) -> Option<&StudySection> {
        match axis {
            Axis::Temporal => self.temporal.as_ref(),
            Axis::Spatial => self.spatial.as_ref(),
            Axis::Noise => self.noise.as_ref(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(usize),
    Many(Vec<usize>),
}

impl OneOrMany {
    fn values(&self) -> Vec<usize> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub steps: OneOrMany,
    pub modes: OneOrMany,
    pub noise_modes: OneOrMany,
    pub reference: Resolution,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("results") }
    }
}

/// A convergence study ready to run.
#[derive(Debug, Clone)]
pub struct Study {
    pub axis: Axis,
    pub tests: Vec<Resolution>,
    pub analysis: AnalysisConfig,
}

impl StudySection {
    fn study(&self, axis: Axis, base: &AnalysisConfig) -> Result<Study, Failure> {
        let (steps, modes, noise) = (self.steps.values(), self.modes.values(), self.noise_modes.values());
        let refined = match axis {
            Axis::Temporal => &steps,
            Axis::Spatial => &modes,
            Axis::Noise => &noise,
        };
        for (name, list) in [("steps", &steps), ("modes", &modes), ("noise_modes", &noise)] {
            if list.is_empty() {
                return Err(Failure::config(format!("converge.{axis}.{name} is empty")));
            }
            if !std::ptr::eq(list, refined) && list.len() > 1 {
                return Err(Failure::config(format!(
                    "converge.{axis}.{name} must be a single value; only the {axis} entry is refined"
                )));
            }
        }
        let tests = refined
            .iter()
            .map(|&v| match axis {
                Axis::Temporal => Resolution::new(v, modes[0], noise[0]),
                Axis::Spatial => Resolution::new(steps[0], v, noise[0]),
                Axis::Noise => Resolution::new(steps[0], modes[0], v),
            })
            .collect::<Vec<_>>();
        let analysis = AnalysisConfig { reference: self.reference, ..base.clone() };
        analysis.check_study(axis, &tests)?;
        shared_fine_steps(tests.iter().chain([&self.reference]).map(|r| r.steps))?;
        Ok(Study { axis, tests, analysis })
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|f| f.context(&path.display().to_string()))
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        let cfg: Self = toml::from_str(text).map_err(|e| Failure::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every section that is present, so a long run cannot fail late
    /// on a bad setting.
    pub fn validate(&self) -> Result<(), Failure> {
        self.model.validate()?;
        taming_threshold(1, 1.0, self.scheme.theta)?;
        if self.scheme.counterpart_substeps == Some(0) {
            return Err(Failure::config("scheme.counterpart_substeps must be positive"));
        }
        self.analysis.validate()?;
        if self.grid.is_some() {
            let grid = self.grid_resolutions()?;
            shared_fine_steps(grid.iter().map(|r| r.steps))?;
        }
        for axis in Axis::ALL {
            if let Some(s) = self.converge.get(axis) {
                s.study(axis, &self.analysis)?;
            }
        }
        Ok(())
    }

    /// `[grid]` lists zipped into resolutions.
    pub fn grid_resolutions(&self) -> Result<Vec<Resolution>, Failure> {
        let grid = self
            .grid
            .as_ref()
            .ok_or_else(|| Failure::config("this command needs a [grid] section"))?;
        let lists = [("steps", &grid.steps), ("modes", &grid.modes), ("noise_modes", &grid.noise_modes)];
        let len = lists.iter().map(|(_, l)| l.len()).max().unwrap_or(0);
        for (name, list) in lists {
            if list.is_empty() {
                return Err(Failure::config(format!("grid.{name} is empty")));
            }
            if list.len() != 1 && list.len() != len {
                return Err(Failure::config(format!(
                    "grid.{name} has {} entries; expected 1 or {len}",
                    list.len()
                )));
            }
        }
        let at = |l: &Vec<usize>, i: usize| if l.len() == 1 { l[0] } else { l[i] };
        let out: Vec<Resolution> = (0..len)
            .map(|i| Resolution::new(at(&grid.steps, i), at(&grid.modes, i), at(&grid.noise_modes, i)))
            .collect();
        for r in &out {
            r.validate()?;
        }
        Ok(out)
    }

    /// The study for `axis`, or every configured study when `axis` is `None`.
    pub fn studies(&self, axis: Option<Axis>) -> Result<Vec<Study>, Failure> {
        let axes: Vec<Axis> = match axis {
            Some(a) => vec![a],
            None => Axis::ALL.into_iter().filter(|&a| self.converge.get(a).is_some()).collect(),
        };
        if axes.is_empty() {
            return Err(Failure::config("no [converge.<axis>] section in the configuration"));
        }
        axes.into_iter()
            .map(|a| {
                self.converge
                    .get(a)
                    .ok_or_else(|| Failure::config(format!("no [converge.{a}] section in the configuration")))?
                    .study(a, &self.analysis)
            })
            .collect()
    }

    /// Replaces the master seeds with `seed`.
    pub fn override_seed(&mut self, seed: u64) {
        self.analysis.seeds = vec![seed];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MODEL: &str = r#"
[model]
diffusivity = 1.0
reaction_rate = 1.0
carrying_level = 1.0
noise_intensity = 0.25
horizon = 1.0
noise = { amplitude = 1.0, decay = 2.0 }
initial = { kind = "parabola", scale = 8.0 }
"#;

    fn parse(extra: &str) -> Result<ExperimentConfig, Failure> {
        ExperimentConfig::parse(&format!("{MODEL}{extra}"))
    }

    #[test]
    fn grid_broadcasts_single_values() {
        let cfg = parse("[grid]\nsteps = [8, 16]\nmodes = [4]\nnoise_modes = [2]\n").unwrap();
        assert_eq!(
            cfg.grid_resolutions().unwrap(),
            vec![Resolution::new(8, 4, 2), Resolution::new(16, 4, 2)]
        );
    }

    #[test]
    fn grid_length_mismatch_rejected() {
        let err = parse("[grid]\nsteps = [8, 16]\nmodes = [4, 8, 16]\nnoise_modes = [2]\n").unwrap_err();
        assert!(err.to_string().contains("grid.steps has 2 entries"));
    }

    #[test]
    fn study_builds_tests_along_axis() {
        let cfg = parse(
            "[converge.spatial]\nsteps = 64\nmodes = [2, 4, 8]\nnoise_modes = 4\n\
             reference = { steps = 64, modes = 64, noise_modes = 4 }\n",
        )
        .unwrap();
        let studies = cfg.studies(None).unwrap();
        assert_eq!(studies.len(), 1);
        assert_eq!(studies[0].axis, Axis::Spatial);
        assert_eq!(studies[0].tests[2], Resolution::new(64, 8, 4));
        assert_eq!(studies[0].analysis.reference, Resolution::new(64, 64, 4));
        assert!(cfg.studies(Some(Axis::Noise)).is_err());
    }

    #[test]
    fn non_refined_list_rejected() {
        let err = parse(
            "[converge.temporal]\nsteps = [8, 16, 32]\nmodes = [4, 8]\nnoise_modes = 4\n\
             reference = { steps = 256, modes = 8, noise_modes = 4 }\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("converge.temporal.modes"));
    }

    #[test]
    fn model_ranges_checked() {
        let bad = MODEL.replace("decay = 2.0", "decay = 1.0");
        assert!(matches!(ExperimentConfig::parse(&bad), Err(Failure::Config(_))));
        assert!(parse("[scheme]\ntheta = 0.3\n").is_err());
        assert!(parse("[analysis]\neta = 0.5\n").is_err());
        assert!(parse("[output]\ndir = \"x\"\nextra = 1\n").is_err());
    }
}
