//! The planner-comparison benchmark.
//!
//! Runs every (scenario, planner, seed) episode, writes per-episode traces,
//! a deterministic CSV report, and a separate wall-clock timing file. The
//! report is byte-reproducible from (config, seeds): everything
//! time-dependent goes to `timings.csv` instead.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use pyroswarm_core::baseline_ga::GaConfig;
use pyroswarm_core::model::load_scenario;
use pyroswarm_core::predictor::load_model_from_path;
use pyroswarm_core::rollout::{run_episode, PlannerKind, RolloutConfig};
use pyroswarm_core::SpreadConfig;

use crate::trace::{trace_records, write_trace};

/// Benchmark configuration, read from JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    /// Scenario files, one per environment.
    pub scenarios: Vec<PathBuf>,
    /// Trained spread+quench surrogate checkpoint.
    pub model: PathBuf,
    /// Decision periods per episode.
    pub horizon: usize,
    /// Planners to compare: `mip_ccro`, `mip_plain`, `ga`.
    pub planners: Vec<String>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl BenchConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read bench config {}", path.display()))?;
        let mut config: BenchConfig = serde_json::from_str(&text)
            .with_context(|| format!("bad bench config {}", path.display()))?;
        // Relative paths are relative to the config file, not the working
        // directory, so a bundled config runs from anywhere.
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            let rebase = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = dir.join(&p);
                }
            };
            for scenario in &mut config.scenarios {
                rebase(scenario);
            }
            rebase(&mut config.model);
            rebase(&mut config.out_dir);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            bail!("bench config needs at least one scenario");
        }
        if self.planners.is_empty() {
            bail!("bench config needs at least one planner");
        }
        if self.seeds.is_empty() {
            bail!("bench config needs at least one seed");
        }
        if self.horizon == 0 {
            bail!("bench config needs a positive horizon");
        }
        for name in &self.planners {
            parse_planner(name)?;
        }
        Ok(())
    }
}

pub fn parse_planner(name: &str) -> Result<PlannerKind> {
    match name {
        "mip_ccro" => Ok(PlannerKind::Ccro),
        "mip_plain" => Ok(PlannerKind::Plain),
        "ga" => Ok(PlannerKind::Ga),
        other => bail!("unknown planner {other:?} (expected mip_ccro, mip_plain, or ga)"),
    }
}

/// One finished episode in the report.
#[derive(Clone, Debug)]
pub struct EpisodeRow {
    pub env: String,
    pub planner: String,
    pub seed: u64,
    pub moves: f64,
    pub rounds: usize,
    pub burn_cost: f64,
    pub termination: String,
    pub wall_ms: u128,
}

/// Everything `bench` produced.
pub struct BenchOutcome {
    pub rows: Vec<EpisodeRow>,
    pub report_path: PathBuf,
    pub timings_path: PathBuf,
    /// Mean move-reduction percentage of `mip_ccro` against `mip_plain`
    /// across environments, when both planners ran.
    pub mean_reduction_pct: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let values: Vec<f64> = values.collect();
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Mean episode metrics of one (environment, planner) cell.
fn cell_means(rows: &[EpisodeRow], env: &str, planner: &str) -> Option<(f64, f64, f64)> {
    let cell: Vec<&EpisodeRow> =
        rows.iter().filter(|r| r.env == env && r.planner == planner).collect();
    if cell.is_empty() {
        return None;
    }
    let n = cell.len() as f64;
    Some((
        cell.iter().map(|r| r.moves).sum::<f64>() / n,
        cell.iter().map(|r| r.rounds as f64).sum::<f64>() / n,
        cell.iter().map(|r| r.burn_cost).sum::<f64>() / n,
    ))
}

pub fn run_bench(config: &BenchConfig) -> Result<BenchOutcome> {
    let model = load_model_from_path(&config.model)
        .with_context(|| format!("cannot load model {}", config.model.display()))?;
    let traces_dir = config.out_dir.join("traces");
    fs::create_dir_all(&traces_dir)
        .with_context(|| format!("cannot create {}", traces_dir.display()))?;

    let mut scenarios = Vec::new();
    for path in &config.scenarios {
        let scenario = load_scenario(path)
            .with_context(|| format!("cannot load scenario {}", path.display()))?;
        if !scenario
            .name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
            || scenario.name.is_empty()
        {
            bail!(
                "scenario name {:?} in {} is not filesystem- and CSV-safe",
                scenario.name,
                path.display()
            );
        }
        if scenarios.iter().any(|(s, _): &(pyroswarm_core::Scenario, _)| s.name == scenario.name)
        {
            bail!("duplicate scenario name {:?}", scenario.name);
        }
        let initial = scenario.initial_map()?;
        scenarios.push((scenario, initial));
    }

    let mut rows = Vec::new();
    for (scenario, initial) in &scenarios {
        for planner_name in &config.planners {
            let planner = parse_planner(planner_name)?;
            for &seed in &config.seeds {
                let rollout_config = RolloutConfig {
                    planner,
                    horizon: config.horizon,
                    seed,
                    ga: GaConfig::default(),
                };
                let started = Instant::now();
                let episode = run_episode(initial, scenario, &model, &rollout_config)
                    .with_context(|| {
                        format!("episode failed: {} / {planner_name} / seed {seed}", scenario.name)
                    })?;
                let wall_ms = started.elapsed().as_millis();
                let records = trace_records(
                    scenario,
                    &episode,
                    config.horizon,
                    SpreadConfig::default().intensity_cap,
                );
                let trace_path =
                    traces_dir.join(format!("{}_{planner_name}_{seed}.jsonl", scenario.name));
                write_trace(&trace_path, &records)?;
                rows.push(EpisodeRow {
                    env: scenario.name.clone(),
                    planner: planner_name.clone(),
                    seed,
                    moves: episode.moves,
                    rounds: episode.rounds,
                    burn_cost: episode.burn_cost,
                    termination: episode.termination.label().to_string(),
                    wall_ms,
                });
            }
        }
    }

    let report_path = config.out_dir.join("report.csv");
    let timings_path = config.out_dir.join("timings.csv");
    let mean_reduction_pct = write_report(&report_path, config, &rows)?;
    write_timings(&timings_path, &rows)?;
    Ok(BenchOutcome { rows, report_path, timings_path, mean_reduction_pct })
}

/// Writes the deterministic report: per-episode rows, per-cell means, the
/// per-environment move reduction of `mip_ccro` against `mip_plain`, and
/// its mean. Returns the mean reduction, when defined.
fn write_report(path: &Path, config: &BenchConfig, rows: &[EpisodeRow]) -> Result<Option<f64>> {
    let file =
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "kind,env,planner,seed,moves,rounds,burn_cost,termination")?;
    for row in rows {
        writeln!(
            w,
            "episode,{},{},{},{},{},{},{}",
            row.env, row.planner, row.seed, row.moves, row.rounds, row.burn_cost, row.termination
        )?;
    }

    // Environment names in first-appearance order (one per config entry).
    let mut env_order: Vec<String> = Vec::new();
    for row in rows {
        if !env_order.contains(&row.env) {
            env_order.push(row.env.clone());
        }
    }

    for env in &env_order {
        for planner in &config.planners {
            if let Some((moves, rounds, burn)) = cell_means(rows, env, planner) {
                writeln!(w, "mean,{env},{planner},,{moves},{rounds},{burn},")?;
            }
        }
    }

    let mut reductions = Vec::new();
    for env in &env_order {
        let plain = cell_means(rows, env, "mip_plain");
        let ccro = cell_means(rows, env, "mip_ccro");
        if let (Some((plain_moves, ..)), Some((ccro_moves, ..))) = (plain, ccro) {
            if plain_moves > 0.0 {
                let pct = 100.0 * (plain_moves - ccro_moves) / plain_moves;
                writeln!(w, "reduction_pct,{env},,,{pct},,,")?;
                reductions.push(pct);
            }
        }
    }
    let mean_reduction = mean(reductions.into_iter());
    if let Some(pct) = mean_reduction {
        writeln!(w, "mean_reduction_pct,,,,{pct},,,")?;
    }
    Ok(mean_reduction)
}

fn write_timings(path: &Path, rows: &[EpisodeRow]) -> Result<()> {
    let file =
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "env,planner,seed,wall_ms")?;
    for row in rows {
        writeln!(w, "{},{},{},{}", row.env, row.planner, row.seed, row.wall_ms)?;
    }
    Ok(())
}
