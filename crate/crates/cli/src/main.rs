//! `pyroswarm` — command-line harness for the wildfire drone-dispatch
//! toolkit: dataset generation, surrogate training and evaluation,
//! one-period planning, multi-period rollouts, planner benchmarks, and
//! trace rendering.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime fault.

mod bench;
mod render;
mod trace;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use pyroswarm_core::baseline_ga::{plan_ga, GaConfig};
use pyroswarm_core::firegrid::{augment, generate_pairs, read_pairs_jsonl, write_pairs_jsonl};
use pyroswarm_core::model::{extract_instance, load_scenario, default_tau_max};
use pyroswarm_core::predictor::{
    evaluate, load_model_from_path, save_model_to_path, train, PredictorKind, TrainConfig,
};
use pyroswarm_core::rollout::{run_episode, PlannerKind, RolloutConfig};
use pyroswarm_core::solver::plan_period;
use pyroswarm_core::{FleetSnapshot, PlanOptions, SpreadConfig, TimeModel};

use crate::bench::{parse_planner, run_bench, BenchConfig};
use crate::render::render_trace;
use crate::trace::{read_trace, trace_records, write_trace};

#[derive(Parser)]
#[command(
    name = "pyroswarm",
    version,
    about = "Wildfire drone-dispatch toolkit: simulate, train surrogates, plan, benchmark"
)]
struct Cli {
    /// Master random seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate simulator training pairs, with and without quench actions.
    GenData {
        /// Grid side length.
        #[arg(long, default_value_t = 20)]
        size: usize,
        /// Number of random environments.
        #[arg(long, default_value_t = 30)]
        envs: usize,
        /// Snapshots rolled out per environment (yields horizon-1 pairs).
        #[arg(long, default_value_t = 6)]
        horizon: usize,
        /// Output directory for pairs_s.jsonl and pairs_sq.jsonl.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a convex surrogate on generated pairs.
    Train {
        /// Training pairs (JSONL from gen-data).
        #[arg(long)]
        data: PathBuf,
        /// Surrogate kind: `s` (spread only) or `sq` (spread + quench).
        #[arg(long)]
        kind: String,
        /// Checkpoint output path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 24)]
        epochs: usize,
        /// Hidden layer width.
        #[arg(long, default_value_t = 64)]
        width: usize,
        /// Number of hidden layers.
        #[arg(long, default_value_t = 2)]
        layers: usize,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 1.0)]
        learning_rate: f64,
        /// Skip the symmetry augmentation (rotations, mirrors, shifts).
        #[arg(long)]
        no_augment: bool,
    },
    /// Evaluate a surrogate's burn classification on held-out pairs.
    EvalPredictor {
        #[arg(long)]
        model: PathBuf,
        /// Held-out pairs (JSONL).
        #[arg(long)]
        data: PathBuf,
        /// Classification threshold on the burn probability.
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Plan a single period for a scenario's initial fire.
    Plan {
        #[arg(long)]
        scenario: PathBuf,
        /// Trained spread+quench checkpoint.
        #[arg(long)]
        model: PathBuf,
        /// mip_ccro, mip_plain, or ga.
        #[arg(long, default_value = "mip_ccro")]
        planner: String,
        /// Demand full coverage of every fire point.
        #[arg(long)]
        terminal: bool,
    },
    /// Run a multi-period episode and write its trace.
    Rollout {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// mip_ccro, mip_plain, or ga.
        #[arg(long, default_value = "mip_ccro")]
        planner: String,
        #[arg(long, default_value_t = 8)]
        horizon: usize,
        /// Trace output path (JSONL).
        #[arg(long)]
        trace: PathBuf,
    },
    /// Compare planners across scenarios; writes report.csv and traces.
    Bench {
        /// Benchmark config (JSON).
        #[arg(long)]
        config: PathBuf,
    },
    /// Render a trace into PGM frames and an SVG sortie map.
    Render {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            if err.use_stderr() {
                eprint!("{err}");
                return ExitCode::from(1);
            }
            // --help / --version
            print!("{err}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::GenData { size, envs, horizon, out } => gen_data(size, envs, horizon, &out, seed),
        Command::Train {
            data,
            kind,
            out,
            epochs,
            width,
            layers,
            batch,
            learning_rate,
            no_augment,
        } => {
            let kind = match kind.as_str() {
                "s" => PredictorKind::Spread,
                "sq" => PredictorKind::SpreadQuench,
                other => bail!("unknown predictor kind {other:?} (expected s or sq)"),
            };
            let config = TrainConfig {
                hidden_layers: layers,
                hidden_width: width,
                epochs,
                batch_size: batch,
                learning_rate,
                ..Default::default()
            };
            train_cmd(&data, kind, &out, &config, !no_augment, seed)
        }
        Command::EvalPredictor { model, data, threshold } => eval_cmd(&model, &data, threshold),
        Command::Plan { scenario, model, planner, terminal } => {
            plan_cmd(&scenario, &model, &planner, terminal, seed)
        }
        Command::Rollout { scenario, model, planner, horizon, trace } => {
            rollout_cmd(&scenario, &model, &planner, horizon, &trace, seed)
        }
        Command::Bench { config } => bench_cmd(&config),
        Command::Render { trace, out } => render_cmd(&trace, &out),
    }
}

fn gen_data(size: usize, envs: usize, horizon: usize, out: &PathBuf, seed: u64) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    for (name, with_quench) in [("pairs_s.jsonl", false), ("pairs_sq.jsonl", true)] {
        let pairs = generate_pairs(envs, size, horizon, with_quench, seed);
        let path = out.join(name);
        let file = fs::File::create(&path)
            .with_context(|| format!("cannot create {}", path.display()))?;
        write_pairs_jsonl(&pairs, std::io::BufWriter::new(file))?;
        println!("{}: {} pairs", path.display(), pairs.len());
    }
    Ok(())
}

fn train_cmd(
    data: &PathBuf,
    kind: PredictorKind,
    out: &PathBuf,
    config: &TrainConfig,
    augment_pairs: bool,
    seed: u64,
) -> Result<()> {
    let file = fs::File::open(data).with_context(|| format!("cannot open {}", data.display()))?;
    let pairs = read_pairs_jsonl(std::io::BufReader::new(file))?;
    if pairs.is_empty() {
        bail!("no training pairs in {}", data.display());
    }
    let pairs = if augment_pairs { augment(&pairs) } else { pairs };
    let model = train(&pairs, kind, config, seed)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    save_model_to_path(&model, out)?;
    println!(
        "trained {kind:?} on {} pairs ({} epochs) -> {}",
        pairs.len(),
        config.epochs,
        out.display()
    );
    Ok(())
}

fn eval_cmd(model_path: &PathBuf, data: &PathBuf, threshold: f64) -> Result<()> {
    let model = load_model_from_path(model_path)
        .with_context(|| format!("cannot load model {}", model_path.display()))?;
    let file = fs::File::open(data).with_context(|| format!("cannot open {}", data.display()))?;
    let pairs = read_pairs_jsonl(std::io::BufReader::new(file))?;
    let metrics = evaluate(&model, &pairs, threshold)?;
    println!("accuracy: {:.4}", metrics.accuracy());
    println!("sensitivity: {:.4}", metrics.sensitivity());
    println!("specificity: {:.4}", metrics.specificity());
    println!("precision: {:.4}", metrics.precision());
    Ok(())
}

fn plan_cmd(
    scenario_path: &PathBuf,
    model_path: &PathBuf,
    planner: &str,
    terminal: bool,
    seed: u64,
) -> Result<()> {
    let planner = parse_planner(planner)?;
    let scenario = load_scenario(scenario_path)
        .with_context(|| format!("cannot load scenario {}", scenario_path.display()))?;
    let model = load_model_from_path(model_path)
        .with_context(|| format!("cannot load model {}", model_path.display()))?;
    let map = scenario.initial_map()?;
    let fleet = FleetSnapshot::fresh(scenario.drones.len());
    let instance = extract_instance(&map, &scenario, &fleet)?;

    let (decision, objective, predicted, satisfied) = match planner {
        PlannerKind::Ccro | PlannerKind::Plain => {
            let time_model = match planner {
                PlannerKind::Plain => TimeModel::WorstCase { tau_max: default_tau_max(&instance) },
                _ => TimeModel::Robust,
            };
            let options = PlanOptions { time_model, terminal_coverage: terminal };
            let out = plan_period(&map, &scenario, &instance, &model, &options)?;
            (out.decision, out.objective, out.predicted_burn_cost, out.coverage_satisfied)
        }
        PlannerKind::Ga => {
            let options =
                PlanOptions { time_model: TimeModel::Robust, terminal_coverage: terminal };
            let out =
                plan_ga(&map, &scenario, &instance, &model, &options, &GaConfig::default(), seed)?;
            (out.decision, out.objective, out.predicted_burn_cost, out.feasible)
        }
    };

    let result = serde_json::json!({
        "planner": planner.label(),
        "objective": objective,
        "predicted_burn_cost": predicted,
        "coverage_satisfied": satisfied,
        "moves": decision.total_travel(&instance),
        "active_bases": decision.active_base_count(),
        "assignments": decision.triples(),
    });
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}

fn rollout_cmd(
    scenario_path: &PathBuf,
    model_path: &PathBuf,
    planner: &str,
    horizon: usize,
    trace_path: &PathBuf,
    seed: u64,
) -> Result<()> {
    let planner = parse_planner(planner)?;
    let scenario = load_scenario(scenario_path)
        .with_context(|| format!("cannot load scenario {}", scenario_path.display()))?;
    let model = load_model_from_path(model_path)
        .with_context(|| format!("cannot load model {}", model_path.display()))?;
    let initial = scenario.initial_map()?;
    let config = RolloutConfig { planner, horizon, seed, ga: GaConfig::default() };
    let episode = run_episode(&initial, &scenario, &model, &config)?;

    if let Some(parent) = trace_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let records =
        trace_records(&scenario, &episode, horizon, SpreadConfig::default().intensity_cap);
    write_trace(trace_path, &records)?;

    let summary = serde_json::json!({
        "planner": planner.label(),
        "periods": episode.periods.len(),
        "moves": episode.moves,
        "rounds": episode.rounds,
        "burn_cost": episode.burn_cost,
        "termination": episode.termination.label(),
        "trace": trace_path,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn bench_cmd(config_path: &PathBuf) -> Result<()> {
    let config = BenchConfig::load(config_path)?;
    let outcome = run_bench(&config)?;
    println!("episodes: {}", outcome.rows.len());
    println!("report: {}", outcome.report_path.display());
    println!("timings: {}", outcome.timings_path.display());
    if let Some(pct) = outcome.mean_reduction_pct {
        println!("mean move reduction (mip_ccro vs mip_plain): {pct:.2}%");
    }
    Ok(())
}

fn render_cmd(trace_path: &PathBuf, out: &PathBuf) -> Result<()> {
    let records = read_trace(trace_path)?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let summary = render_trace(&records, out)?;
    println!("frames: {}", summary.frames);
    println!("paths: {}", summary.svg_path.display());
    Ok(())
}
