//! Monte Carlo drivers. Samples run in parallel on independent Brownian
//! paths; results are collected in sample order before any reduction, so the
//! thread count never changes an output bit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    freeze_fraction, lemma1_bound, lemma1_constant, lp_sup_error, moment_bound_check, pathwise_errors,
    rate_report, sobolev_bound_check, AnalysisConfig, Axis, Bootstrap, MomentReport, RateReport, Resolution,
    RunSummary, SCHEMA_VERSION,
};
use crate::error::{Error, Result};
use crate::model::{coercivity_constant, ModelSpec};
use crate::noise::BrownianPath;
use crate::scheme::{simulate, simulate_counterpart, simulate_untamed, SchemeParams, Trajectory};
use crate::stats::mean;

pub fn scheme_params(spec: &ModelSpec, theta: f64, r: &Resolution) -> Result<SchemeParams> {
    SchemeParams::new(r.steps, r.modes, r.noise_modes, theta, spec.horizon)
}

/// Fine grid shared by all `resolutions`: the largest step count, which must
/// be a power of two divisible by every other.
pub fn shared_fine_steps(steps: impl IntoIterator<Item = usize>) -> Result<usize> {
    let steps: Vec<usize> = steps.into_iter().collect();
    let fine = steps.iter().copied().max().ok_or_else(|| Error::config("no resolutions"))?;
    if !fine.is_power_of_two() {
        return Err(Error::config(format!(
            "the finest step count {fine} must be a power of two"
        )));
    }
    if let Some(s) = steps.iter().find(|&&s| fine % s != 0) {
        return Err(Error::config(format!("step count {s} does not divide {fine}")));
    }
    Ok(fine)
}

pub fn bootstrap(cfg: &AnalysisConfig) -> Bootstrap {
    Bootstrap {
        resamples: cfg.bootstrap_resamples,
        seed: cfg.bootstrap_seed,
        level: 0.95,
    }
}

fn for_each_sample<T: Send>(cfg: &AnalysisConfig, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    cfg.sample_seeds().into_par_iter().map(f).collect()
}

/// A coupled convergence study with the per-run summaries kept for the
/// moment and freeze statistics.
#[derive(Debug, Clone)]
pub struct ConvergenceRun {
    pub report: RateReport,
    pub tests: Vec<Resolution>,
    pub test_summaries: Vec<Vec<RunSummary>>,
    pub reference_summaries: Vec<RunSummary>,
}

/// Runs every test resolution and the reference of `cfg` on the same paths,
/// then estimates errors and fits the rate along `axis`.
pub fn run_convergence(
    spec: &ModelSpec,
    theta: f64,
    axis: Axis,
    tests: &[Resolution],
    cfg: &AnalysisConfig,
) -> Result<ConvergenceRun> {
    spec.validate()?;
    cfg.validate()?;
    cfg.check_study(axis, tests)?;
    let reference = cfg.reference;
    let fine = shared_fine_steps(tests.iter().chain([&reference]).map(|r| r.steps))?;
    let ref_params = scheme_params(spec, theta, &reference)?;
    let test_params = tests
        .iter()
        .map(|r| scheme_params(spec, theta, r))
        .collect::<Result<Vec<_>>>()?;
    let spectrum = spec.spectrum()?;

    let outcomes = for_each_sample(cfg, |seed| {
        let path = BrownianPath::generate(seed, fine, reference.noise_modes, spec.horizon)?;
        let ref_traj = simulate(&ref_params, spec, &path)?;
        let mut errors = Vec::with_capacity(tests.len());
        let mut summaries = Vec::with_capacity(tests.len());
        for params in &test_params {
            let traj = simulate(params, spec, &path)?;
            errors.push(pathwise_errors(&traj, &ref_traj)?);
            summaries.push(RunSummary::new(&traj, &spectrum, cfg.eta));
        }
        Ok((errors, summaries, RunSummary::new(&ref_traj, &spectrum, cfg.eta)))
    })?;

    let mut pathwise = vec![Vec::with_capacity(outcomes.len()); tests.len()];
    let mut test_summaries = vec![Vec::with_capacity(outcomes.len()); tests.len()];
    let mut reference_summaries = Vec::with_capacity(outcomes.len());
    for (errors, summaries, ref_summary) in outcomes {
        for (i, (e, s)) in errors.into_iter().zip(summaries).enumerate() {
            pathwise[i].push(e);
            test_summaries[i].push(s);
        }
        reference_summaries.push(ref_summary);
    }
    let mut report = rate_report(axis, tests, &pathwise, cfg.p, &bootstrap(cfg))?;
    report.reference = Some(reference);
    Ok(ConvergenceRun {
        report,
        tests: tests.to_vec(),
        test_summaries,
        reference_summaries,
    })
}

/// Runs each resolution on shared paths and keeps the summaries.
pub fn run_summaries(
    spec: &ModelSpec,
    theta: f64,
    resolutions: &[Resolution],
    cfg: &AnalysisConfig,
) -> Result<Vec<Vec<RunSummary>>> {
    spec.validate()?;
    cfg.validate()?;
    if resolutions.is_empty() {
        return Err(Error::config("no resolutions to run"));
    }
    let fine = shared_fine_steps(resolutions.iter().map(|r| r.steps))?;
    let m_max = resolutions.iter().map(|r| r.noise_modes).max().unwrap_or(1);
    let params = resolutions
        .iter()
        .map(|r| scheme_params(spec, theta, r))
        .collect::<Result<Vec<_>>>()?;
    let spectrum = spec.spectrum()?;
    let per_sample = for_each_sample(cfg, |seed| {
        let path = BrownianPath::generate(seed, fine, m_max, spec.horizon)?;
        params
            .iter()
            .map(|p| Ok(RunSummary::new(&simulate(p, spec, &path)?, &spectrum, cfg.eta)))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut groups = vec![Vec::with_capacity(per_sample.len()); resolutions.len()];
    for sample in per_sample {
        for (g, s) in groups.iter_mut().zip(sample) {
            g.push(s);
        }
    }
    Ok(groups)
}

/// Moment bound, freeze fraction and `H_η` witness over run groups, one
/// group per resolution.
pub fn moment_report(
    spec: &ModelSpec,
    theta: f64,
    groups: &[Vec<RunSummary>],
    cfg: &AnalysisConfig,
) -> Result<MomentReport> {
    let checks = groups
        .iter()
        .map(|g| moment_bound_check(g, cfg.p, spec, theta))
        .collect::<Result<Vec<_>>>()?;
    // the freeze fraction compares step counts, so keep one group per N
    let mut per_steps: Vec<&Vec<RunSummary>> = Vec::new();
    for g in groups {
        if !per_steps.iter().any(|h| h[0].resolution.steps == g[0].resolution.steps) {
            per_steps.push(g);
        }
    }
    let freeze = freeze_fraction(&per_steps.iter().map(|g| g.as_slice()).collect::<Vec<_>>())?;
    let sobolev = sobolev_bound_check(groups, cfg.eta, cfg.p)?;
    Ok(MomentReport::new(cfg.p, theta, checks, freeze, sobolev))
}

/// Statistics of one scheme in a stopped-versus-untamed comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeStats {
    /// `max_t` of the mean `‖Y_t‖^p` over the paths that stayed finite.
    pub max_moment: Option<f64>,
    pub diverged: usize,
    pub diverged_fraction: f64,
    pub frozen_fraction: f64,
    /// Paths whose `‖Y_t‖^p` stays below the a priori envelope built from
    /// their own initial value at every grid time.
    pub within_envelope: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub schema_version: u32,
    pub resolution: Resolution,
    pub samples: usize,
    pub p: f64,
    pub envelope_constant: f64,
    pub stopped: SchemeStats,
    pub untamed: SchemeStats,
    /// `max_{paths, t} ‖Y_stopped − Y_untamed‖_H` over paths where both
    /// stayed finite.
    pub max_gap: Option<f64>,
}

impl CompareReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn scheme_stats(runs: &[Trajectory], p: f64, k_const: f64) -> SchemeStats {
    let samples = runs.len();
    let finite: Vec<&Trajectory> = runs.iter().filter(|t| !t.diverged()).collect();
    let max_moment = finite.first().map(|first| {
        (0..first.states.len())
            .map(|k| {
                let vals: Vec<f64> = finite.iter().map(|t| t.states[k].norm().powf(p)).collect();
                mean(&vals)
            })
            .fold(0.0, f64::max)
    });
    let within_envelope = runs
        .iter()
        .filter(|t| {
            let m0 = t.states[0].norm().powf(p);
            t.states
                .iter()
                .enumerate()
                .all(|(k, s)| s.norm().powf(p) <= lemma1_bound(m0, k_const, t.time(k)))
        })
        .count();
    let frozen: usize = runs.iter().map(|t| t.frozen_count()).sum();
    let total_steps: usize = runs.iter().map(|t| t.steps).sum();
    SchemeStats {
        max_moment,
        diverged: samples - finite.len(),
        diverged_fraction: (samples - finite.len()) as f64 / samples as f64,
        frozen_fraction: frozen as f64 / total_steps as f64,
        within_envelope,
    }
}

/// Runs the stopped and the untamed scheme on shared paths.
pub fn run_compare(spec: &ModelSpec, theta: f64, r: &Resolution, cfg: &AnalysisConfig) -> Result<CompareReport> {
    spec.validate()?;
    cfg.validate()?;
    let fine = shared_fine_steps([r.steps])?;
    let params = scheme_params(spec, theta, r)?;
    let c = coercivity_constant(spec, (cfg.p - 1.0) / 2.0)?.max(1.0);
    let k_const = lemma1_constant(cfg.p, c, spec.horizon, theta)?;
    let pairs = for_each_sample(cfg, |seed| {
        let path = BrownianPath::generate(seed, fine, r.noise_modes, spec.horizon)?;
        Ok((simulate(&params, spec, &path)?, simulate_untamed(&params, spec, &path)?))
    })?;
    let (stopped, untamed): (Vec<Trajectory>, Vec<Trajectory>) = pairs.into_iter().unzip();
    let max_gap = stopped
        .iter()
        .zip(&untamed)
        .filter(|(a, b)| !a.diverged() && !b.diverged())
        .map(|(a, b)| {
            a.states
                .iter()
                .zip(&b.states)
                .map(|(x, y)| x.distance(y))
                .fold(0.0, f64::max)
        })
        .reduce(f64::max);
    Ok(CompareReport {
        schema_version: SCHEMA_VERSION,
        resolution: *r,
        samples: stopped.len(),
        p: cfg.p,
        envelope_constant: k_const,
        stopped: scheme_stats(&stopped, cfg.p, k_const),
        untamed: scheme_stats(&untamed, cfg.p, k_const),
        max_gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterpartEntry {
    pub steps: usize,
    /// `max_k (E‖Y_{t_k} − Ȳ_{t_k}‖²_H)^{1/2}`, indicator-free counterpart.
    pub gap: f64,
    /// Same for the counterpart that carries the scheme's indicator.
    pub gap_stopped: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterpartReport {
    pub schema_version: u32,
    pub modes: usize,
    pub noise_modes: usize,
    pub substeps: usize,
    pub entries: Vec<CounterpartEntry>,
    /// Log-log slope of `gap` against `N`.
    pub slope: f64,
    pub slope_stopped: f64,
}

/// Gap between the scheme and its integrated counterparts for several step
/// counts on shared paths.
pub fn run_counterpart_gap(
    spec: &ModelSpec,
    theta: f64,
    steps: &[usize],
    modes: usize,
    noise_modes: usize,
    substeps: usize,
    cfg: &AnalysisConfig,
) -> Result<CounterpartReport> {
    spec.validate()?;
    cfg.validate()?;
    if steps.len() < 2 {
        return Err(Error::config("a gap trend needs at least two step counts"));
    }
    let fine = shared_fine_steps(steps.iter().map(|&n| n * substeps))?;
    let params = steps
        .iter()
        .map(|&n| scheme_params(spec, theta, &Resolution::new(n, modes, noise_modes)))
        .collect::<Result<Vec<_>>>()?;
    let per_sample = for_each_sample(cfg, |seed| {
        let path = BrownianPath::generate(seed, fine, noise_modes, spec.horizon)?;
        params
            .iter()
            .map(|p| {
                let run = simulate_counterpart(p, spec, &path, substeps)?;
                let dist = |other: &Trajectory| -> Vec<f64> {
                    run.scheme
                        .states
                        .iter()
                        .zip(&other.states)
                        .map(|(a, b)| a.distance(b))
                        .collect()
                };
                Ok((dist(&run.counterpart), dist(&run.counterpart_stopped)))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut entries = Vec::with_capacity(steps.len());
    for (i, &n) in steps.iter().enumerate() {
        let (free, stopped): (Vec<Vec<f64>>, Vec<Vec<f64>>) = per_sample.iter().map(|s| s[i].clone()).unzip();
        entries.push(CounterpartEntry {
            steps: n,
            gap: lp_sup_error(&free, 2.0),
            gap_stopped: lp_sup_error(&stopped, 2.0),
        });
    }
    let x: Vec<f64> = steps.iter().map(|&n| (n as f64).ln()).collect();
    let slope_of = |f: fn(&CounterpartEntry) -> f64| {
        let y: Vec<f64> = entries.iter().map(|e| f(e).ln()).collect();
        crate::analysis::ols_slope(&x, &y)
    };
    let slope = slope_of(|e| e.gap);
    let slope_stopped = slope_of(|e| e.gap_stopped);
    Ok(CounterpartReport {
        schema_version: SCHEMA_VERSION,
        modes,
        noise_modes,
        substeps,
        entries,
        slope,
        slope_stopped,
    })
}
