//! `run`: simulate one scenario per seed and write its artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use hgo_gp::scenario::{BoundEvaluation, ErrorSummary, SimulationError};
use hgo_gp::{run_scenario, ScenarioConfig};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::manifest::RunManifest;
use crate::trace_io::write_trace_file;
use crate::{CliError, ExitStatus};

pub fn trace_path(out_dir: &Path, seed: u64) -> PathBuf {
    out_dir.join(format!("trace_seed{seed}.csv"))
}

pub fn report_path(out_dir: &Path, seed: u64) -> PathBuf {
    out_dir.join(format!("bounds_seed{seed}.json"))
}

pub fn manifest_path(out_dir: &Path, seed: u64) -> PathBuf {
    out_dir.join(format!("manifest_seed{seed}.json"))
}

/// Parses and validates a config file. Errors carry the line (parse errors)
/// or the field path (validation errors).
pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::invalid(format!("cannot read config {}: {e}", path.display())))?;
    let config: ScenarioConfig = toml::from_str(&text)
        .map_err(|e| CliError::invalid(format!("{}: {}", path.display(), e.to_string().trim_end())))?;
    config
        .validate()
        .map_err(|e| CliError::invalid(format!("{}: invalid field {e}", path.display())))?;
    Ok(config.resolved())
}

#[derive(Debug, Serialize)]
struct SeedReport<'a> {
    seed: u64,
    errors: ErrorSummary,
    bounds: &'a BoundEvaluation,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::failure(format!("cannot serialise {}: {e}", path.display())))?;
    fs::write(path, text + "\n")
        .map_err(|e| CliError::failure(format!("cannot write {}: {e}", path.display())))
}

fn run_seed(config: &ScenarioConfig, manifest: RunManifest, out_dir: &Path) -> Result<(), CliError> {
    let seed = config.scenario.seed;
    write_json(&manifest_path(out_dir, seed), &manifest)?;
    let run = match run_scenario(config) {
        Ok(run) => run,
        Err(SimulationError::Config(e)) => return Err(CliError::invalid(format!("invalid field {e}"))),
        Err(SimulationError::Failed { source, partial }) => {
            let path = trace_path(out_dir, seed);
            write_trace_file(&path, &partial.rows)?;
            return Err(CliError::new(
                ExitStatus::Divergence,
                format!(
                    "seed {seed}: simulation diverged ({source}); partial trace of {} rows in {}",
                    partial.len(),
                    path.display()
                ),
            ));
        }
    };
    write_trace_file(&trace_path(out_dir, seed), &run.trace.rows)?;
    let bounds = run
        .evaluate_bounds(config)
        .map_err(|e| CliError::failure(format!("seed {seed}: bound evaluation failed: {e}")))?;
    let errors = run.trace.error_summary(config.scenario.transient);
    info!(
        "seed {seed}: mae h1 {:.4}, baseline {:.4}, envelope violations {}/{}",
        errors.mae_h1, errors.mae_baseline, bounds.violations, bounds.query_points
    );
    write_json(
        &report_path(out_dir, seed),
        &SeedReport {
            seed,
            errors,
            bounds: &bounds,
        },
    )
}

/// Runs every seed (in parallel) and writes a trace CSV, a bound-report JSON
/// and a manifest per seed. When several seeds fail the most severe exit
/// status wins.
pub fn cmd_run(config_path: &Path, out_dir: &Path, seeds: &[u64]) -> Result<(), CliError> {
    if seeds.is_empty() {
        return Err(CliError::invalid("at least one seed is required"));
    }
    let base = load_config(config_path)?;
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::failure(format!("cannot create {}: {e}", out_dir.display())))?;

    let results: Vec<Result<(), CliError>> = seeds
        .par_iter()
        .map(|&seed| {
            let config = base.clone().with_seed(seed);
            let manifest = RunManifest::new(config_path, out_dir, seeds, &config)?;
            run_seed(&config, manifest, out_dir)
        })
        .collect();

    let mut worst: Option<CliError> = None;
    for err in results.into_iter().filter_map(Result::err) {
        if seeds.len() > 1 {
            warn!("{}", err.message);
        }
        worst = match worst {
            Some(w) if w.status.code() >= err.status.code() => Some(w),
            _ => Some(err),
        };
    }
    worst.map_or(Ok(()), Err)
}
