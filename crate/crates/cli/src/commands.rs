use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use stopspde_core::analysis::{AnalysisConfig, Axis, RateReport, Resolution, SCHEMA_VERSION};
use stopspde_core::experiment::{
    moment_report, run_compare, run_convergence, run_counterpart_gap, run_summaries, scheme_params,
    shared_fine_steps,
};
use stopspde_core::{scheme, BrownianPath};

use crate::config::ExperimentConfig;
use crate::Failure;

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn provenance(analysis: &AnalysisConfig, extra: &str) -> String {
    let seeds: Vec<String> = analysis.seeds.iter().map(u64::to_string).collect();
    let mut s = format!("stopspde {VERSION}\nmaster_seeds {}", seeds.join(" "));
    if !extra.is_empty() {
        s.push('\n');
        s.push_str(extra);
    }
    s
}

fn tag(r: &Resolution) -> String {
    format!("N{}_n{}_m{}", r.steps, r.modes, r.noise_modes)
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), Failure> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), bytes)?;
    println!("wrote {}", dir.join(name).display());
    Ok(())
}

#[derive(Serialize)]
struct SimulateEntry {
    resolution: Resolution,
    samples: usize,
    diverged: usize,
    frozen_steps: usize,
    total_steps: usize,
}

#[derive(Serialize)]
struct SimulateSummary {
    schema_version: u32,
    theta: f64,
    master_seeds: Vec<u64>,
    entries: Vec<SimulateEntry>,
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let grid = cfg.grid_resolutions()?;
    let a = &cfg.analysis;
    let fine = shared_fine_steps(grid.iter().map(|r| r.steps))?;
    let m_max = grid.iter().map(|r| r.noise_modes).max().unwrap_or(1);
    let spectrum = cfg.model.spectrum()?;
    let seeds = a.sample_seeds();
    let mut entries = Vec::with_capacity(grid.len());
    for r in &grid {
        let params = scheme_params(&cfg.model, cfg.scheme.theta, r)?;
        let runs = seeds
            .par_iter()
            .enumerate()
            .map(|(i, &seed)| {
                let path = BrownianPath::generate(seed, fine, m_max, cfg.model.horizon)?;
                let traj = scheme::simulate(&params, &cfg.model, &path)?;
                let mut csv = Vec::new();
                let note = format!("sample {i}\npath_seed {seed}\nresolution {r}\ntheta {}", cfg.scheme.theta);
                traj.write_csv(&mut csv, &spectrum, a.eta, &provenance(a, &note))?;
                Ok((csv, traj.diverged(), traj.frozen_count()))
            })
            .collect::<Result<Vec<_>, stopspde_core::Error>>()?;
        let mut entry = SimulateEntry {
            resolution: *r,
            samples: runs.len(),
            diverged: 0,
            frozen_steps: 0,
            total_steps: r.steps * runs.len(),
        };
        for (i, (csv, diverged, frozen)) in runs.into_iter().enumerate() {
            write_file(&cfg.output.dir, &format!("trajectory_{}_sample{i}.csv", tag(r)), &csv)?;
            entry.diverged += usize::from(diverged);
            entry.frozen_steps += frozen;
        }
        println!("{r}: {} samples, {} diverged, {} frozen steps", entry.samples, entry.diverged, entry.frozen_steps);
        entries.push(entry);
    }
    let summary = SimulateSummary {
        schema_version: SCHEMA_VERSION,
        theta: cfg.scheme.theta,
        master_seeds: a.seeds.clone(),
        entries,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Failure::Internal(e.to_string()))?;
    write_file(&cfg.output.dir, "simulate_summary.json", json.as_bytes())
}

fn write_rate_report(cfg: &ExperimentConfig, report: &RateReport, note: &str) -> Result<(), Failure> {
    let name = format!("converge_{}", report.axis);
    write_file(&cfg.output.dir, &format!("{name}.json"), report.to_json()?.as_bytes())?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv, &provenance(&cfg.analysis, note))?;
    write_file(&cfg.output.dir, &format!("{name}.csv"), &csv)?;
    println!(
        "{} axis: fitted rate {:.4} (95% interval [{:.4}, {:.4}])",
        report.axis, report.fitted_slope, report.slope_interval[0], report.slope_interval[1]
    );
    Ok(())
}

pub fn converge(cfg: &ExperimentConfig, axis: Option<Axis>) -> Result<(), Failure> {
    for study in cfg.studies(axis)? {
        let run = run_convergence(&cfg.model, cfg.scheme.theta, study.axis, &study.tests, &study.analysis)?;
        let note = format!(
            "theta {}\nreference {}",
            cfg.scheme.theta, study.analysis.reference
        );
        write_rate_report(cfg, &run.report, &note)?;
    }
    Ok(())
}

/// Parses `h^r`.
fn synthetic_exponent(expr: &str) -> Result<f64, Failure> {
    let bad = || Failure::config(format!("--synthetic expects h^<exponent>, got {expr:?}"));
    let rest = expr.trim().strip_prefix("h^").ok_or_else(bad)?;
    let r: f64 = rest.trim().parse().map_err(|_| bad())?;
    if !(r.is_finite() && r > 0.0) {
        return Err(bad());
    }
    Ok(r)
}

pub fn converge_synthetic(cfg: &ExperimentConfig, axis: Option<Axis>, expr: &str) -> Result<(), Failure> {
    let rate = synthetic_exponent(expr)?;
    for study in cfg.studies(axis)? {
        let res: Vec<usize> = study.tests.iter().map(|r| study.axis.value(r)).collect();
        let errors: Vec<f64> = res.iter().map(|&v| (v as f64).powf(-rate)).collect();
        let report = RateReport::synthetic(study.axis, &res, &errors, expr.trim())?;
        write_rate_report(cfg, &report, &format!("synthetic {}", expr.trim()))?;
    }
    Ok(())
}

pub fn moments(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let grid = cfg.grid_resolutions()?;
    let a = &cfg.analysis;
    let theta = cfg.scheme.theta;
    let groups = run_summaries(&cfg.model, theta, &grid, a)?;
    let report = moment_report(&cfg.model, theta, &groups, a)?;
    write_file(&cfg.output.dir, "moments.json", report.to_json()?.as_bytes())?;
    for check in &report.checks {
        let mut csv = Vec::new();
        let note = format!("resolution {}\np {}\nconstant_k {}", check.resolution, a.p, check.constant_k);
        for line in provenance(a, &note).lines() {
            writeln!(csv, "# {line}")?;
        }
        writeln!(csv, "t,mean,upper,bound")?;
        for i in 0..check.times.len() {
            writeln!(csv, "{},{},{},{}", check.times[i], check.mean[i], check.upper[i], check.bound[i])?;
        }
        write_file(&cfg.output.dir, &format!("moments_{}.csv", tag(&check.resolution)), &csv)?;
        println!(
            "{}: {} (worst margin {:.4e} at t = {}, {} diverged)",
            check.resolution,
            if check.pass { "within bound" } else { "BOUND EXCEEDED" },
            check.worst_margin,
            check.worst_time,
            check.diverged
        );
    }
    println!(
        "moment study: {}; freeze fractions nonincreasing: {}; smoothness witness: {}",
        if report.pass { "pass" } else { "fail" },
        report.freeze.monotone,
        report.sobolev.pass
    );
    Ok(())
}

pub fn compare(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let grid = cfg.grid_resolutions()?;
    let theta = cfg.scheme.theta;
    for r in &grid {
        let report = run_compare(&cfg.model, theta, r, &cfg.analysis)?;
        write_file(&cfg.output.dir, &format!("compare_{}.json", tag(r)), report.to_json()?.as_bytes())?;
        println!(
            "{r}: stopped diverged {}/{}, untamed diverged {}/{}",
            report.stopped.diverged, report.samples, report.untamed.diverged, report.samples
        );
    }
    if let Some(substeps) = cfg.scheme.counterpart_substeps {
        let mut steps: Vec<usize> = grid.iter().map(|r| r.steps).collect();
        steps.sort_unstable();
        steps.dedup();
        if steps.len() < 2 {
            println!("counterpart gap skipped: the grid has a single step count");
            return Ok(());
        }
        let report = run_counterpart_gap(
            &cfg.model,
            theta,
            &steps,
            grid[0].modes,
            grid[0].noise_modes,
            substeps,
            &cfg.analysis,
        )?;
        let json = serde_json::to_string_pretty(&report).map_err(|e| Failure::Internal(e.to_string()))?;
        write_file(&cfg.output.dir, "counterpart.json", json.as_bytes())?;
        println!("counterpart gap slope {:.4}", report.slope);
    }
    Ok(())
}
