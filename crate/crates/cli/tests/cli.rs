//! End-to-end tests of the `pyroswarm` binary: exit codes, dataset
//! determinism, and the full gen-data -> train -> eval -> plan -> rollout
//! -> bench -> render pipeline on a miniature problem.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pyroswarm_core::model::{
    save_scenario, CovarianceModel, DroneSpec, InitialFire, MeanModel, ServiceModel,
};
use pyroswarm_core::{Scenario, Weather, WindDirection};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pyroswarm"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn assert_success(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed (status {:?}):\n{}\n{}",
        out.status.code(),
        stdout(out),
        stderr(out),
    );
}

fn tiny_scenario(dir: &Path) -> PathBuf {
    let scenario = Scenario {
        name: "tiny".into(),
        grid_width: 6,
        grid_height: 6,
        barren: vec![],
        initial_fires: vec![
            InitialFire { x: 1, y: 1, intensity: 1.1 },
            InitialFire { x: 4, y: 4, intensity: 0.7 },
        ],
        weather: Weather {
            wind_direction: WindDirection::East,
            wind_speed: 0.2,
            moisture: 0.3,
        },
        bases: vec![(-1.0, 2.0), (6.0, 3.0)],
        drones: vec![
            DroneSpec { home_base: 0, range: 40.0 },
            DroneSpec { home_base: 0, range: 40.0 },
            DroneSpec { home_base: 1, range: 40.0 },
        ],
        drone_speed: 2.0,
        weight_burn: 1.0,
        weight_base: 0.3,
        weight_travel: 0.05,
        period_length: 9.0,
        safe_distance: 0.5,
        reserve_threshold: 0.2,
        risk_level: 0.1,
        big_m: 1000.0,
        service: ServiceModel {
            mean: MeanModel::Uniform { value: 0.8 },
            covariance: CovarianceModel::Kernel { variance: 0.09, length: 1.5, nugget: 0.01 },
        },
    };
    let path = dir.join("tiny.json");
    save_scenario(&scenario, &path).expect("scenario saves");
    path
}

#[test]
fn usage_errors_exit_one() {
    let out = run(&["definitely-not-a-subcommand"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&["plan", "--scenario"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("gen-data"));
}

#[test]
fn runtime_errors_exit_two_and_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no-such-config.json");
    let out = run(&["bench", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no-such-config.json"));

    let out = run(&[
        "plan",
        "--scenario",
        missing.to_str().unwrap(),
        "--model",
        missing.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_data_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out_dir in [&a, &b] {
        let out = run(&[
            "gen-data",
            "--size",
            "6",
            "--envs",
            "3",
            "--horizon",
            "3",
            "--out",
            out_dir.to_str().unwrap(),
            "--seed",
            "42",
        ]);
        assert_success(&out, "gen-data");
    }
    for name in ["pairs_s.jsonl", "pairs_sq.jsonl"] {
        let lhs = fs::read(a.join(name)).unwrap();
        let rhs = fs::read(b.join(name)).unwrap();
        assert!(!lhs.is_empty(), "{name} is empty");
        assert_eq!(lhs, rhs, "{name} differs between identically seeded runs");
    }
}

#[test]
fn pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let data = root.join("data");
    let model = root.join("sq.json");
    let scenario = tiny_scenario(root);

    let out = run(&[
        "gen-data",
        "--size",
        "6",
        "--envs",
        "4",
        "--horizon",
        "3",
        "--out",
        data.to_str().unwrap(),
        "--seed",
        "7",
    ]);
    assert_success(&out, "gen-data");

    let out = run(&[
        "train",
        "--data",
        data.join("pairs_sq.jsonl").to_str().unwrap(),
        "--kind",
        "sq",
        "--out",
        model.to_str().unwrap(),
        "--epochs",
        "4",
        "--width",
        "12",
        "--no-augment",
        "--seed",
        "7",
    ]);
    assert_success(&out, "train");
    assert!(model.exists());

    let out = run(&[
        "eval-predictor",
        "--model",
        model.to_str().unwrap(),
        "--data",
        data.join("pairs_sq.jsonl").to_str().unwrap(),
    ]);
    assert_success(&out, "eval-predictor");
    let text = stdout(&out);
    for metric in ["accuracy:", "sensitivity:", "specificity:", "precision:"] {
        assert!(text.contains(metric), "missing {metric} in:\n{text}");
    }

    let out = run(&[
        "plan",
        "--scenario",
        scenario.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--planner",
        "mip_ccro",
        "--terminal",
    ]);
    assert_success(&out, "plan");
    let plan: serde_json::Value = serde_json::from_str(&stdout(&out)).expect("plan prints JSON");
    assert_eq!(plan["planner"], "mip_ccro");
    assert_eq!(plan["coverage_satisfied"], true);
    // Terminal coverage on two fires with ceil(1.1) + ceil(0.7) = 3 drones.
    assert_eq!(plan["assignments"].as_array().unwrap().len(), 3);
    assert!(plan["moves"].as_f64().unwrap() > 0.0);

    let trace = root.join("trace.jsonl");
    let out = run(&[
        "rollout",
        "--scenario",
        scenario.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--planner",
        "mip_ccro",
        "--horizon",
        "3",
        "--trace",
        trace.to_str().unwrap(),
        "--seed",
        "5",
    ]);
    assert_success(&out, "rollout");
    let summary: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(summary["periods"], 3);
    assert!(summary["burn_cost"].as_f64().unwrap() >= 0.0);

    let lines: Vec<String> =
        fs::read_to_string(&trace).unwrap().lines().map(str::to_owned).collect();
    // Header + one record per period + summary.
    assert_eq!(lines.len(), 1 + 3 + 1);
    let header: serde_json::Value = serde_json::from_str(&lines[0]).unwrap();
    assert_eq!(header["kind"], "header");
    assert_eq!(header["grid_width"], 6);
    let tail: serde_json::Value = serde_json::from_str(lines.last().unwrap()).unwrap();
    assert_eq!(tail["kind"], "summary");
    assert_eq!(tail["final_map"].as_array().unwrap().len(), 36);

    let rendered = root.join("render");
    let out = run(&[
        "render",
        "--trace",
        trace.to_str().unwrap(),
        "--out",
        rendered.to_str().unwrap(),
    ]);
    assert_success(&out, "render");
    assert!(rendered.join("paths.svg").exists());
    let frame = fs::read(rendered.join("frames/frame_000.pgm")).unwrap();
    assert!(frame.starts_with(b"P5\n6 6\n255\n"), "unexpected PGM header");
    assert_eq!(frame.len(), "P5\n6 6\n255\n".len() + 36);
}

#[test]
fn bench_report_is_reproducible_and_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let data = root.join("data");
    let model = root.join("sq.json");
    let scenario = tiny_scenario(root);

    let out = run(&[
        "gen-data",
        "--size",
        "6",
        "--envs",
        "3",
        "--horizon",
        "3",
        "--out",
        data.to_str().unwrap(),
    ]);
    assert_success(&out, "gen-data");
    let out = run(&[
        "train",
        "--data",
        data.join("pairs_sq.jsonl").to_str().unwrap(),
        "--kind",
        "sq",
        "--out",
        model.to_str().unwrap(),
        "--epochs",
        "3",
        "--width",
        "10",
        "--no-augment",
    ]);
    assert_success(&out, "train");

    let bench_out = root.join("bench");
    let config = root.join("bench.json");
    fs::write(
        &config,
        serde_json::to_string_pretty(&serde_json::json!({
            "scenarios": [scenario],
            "model": model,
            "horizon": 2,
            "planners": ["mip_ccro", "mip_plain"],
            "seeds": [1, 2],
            "out_dir": bench_out,
        }))
        .unwrap(),
    )
    .unwrap();

    let out = run(&["bench", "--config", config.to_str().unwrap()]);
    assert_success(&out, "bench");
    let report_path = bench_out.join("report.csv");
    let first = fs::read(&report_path).unwrap();

    // Same config, second run: byte-identical report.
    let out = run(&["bench", "--config", config.to_str().unwrap()]);
    assert_success(&out, "bench");
    assert_eq!(first, fs::read(&report_path).unwrap(), "report.csv not reproducible");

    // Aggregate rows must restate the episode rows exactly.
    let text = String::from_utf8(first).unwrap();
    let mut episodes: Vec<(String, f64, f64)> = Vec::new(); // planner, moves, burn
    let mut means: Vec<(String, f64, f64)> = Vec::new();
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 8, "bad row: {line}");
        match fields[0] {
            "episode" => episodes.push((
                fields[2].into(),
                fields[4].parse().unwrap(),
                fields[6].parse().unwrap(),
            )),
            "mean" => means.push((
                fields[2].into(),
                fields[4].parse().unwrap(),
                fields[6].parse().unwrap(),
            )),
            "reduction_pct" | "mean_reduction_pct" => {}
            other => panic!("unknown row kind {other}"),
        }
    }
    assert_eq!(episodes.len(), 4);
    assert_eq!(means.len(), 2);
    for (planner, mean_moves, mean_burn) in means {
        let rows: Vec<&(String, f64, f64)> =
            episodes.iter().filter(|(p, _, _)| *p == planner).collect();
        assert_eq!(rows.len(), 2);
        let moves = rows.iter().map(|(_, m, _)| m).sum::<f64>() / rows.len() as f64;
        let burn = rows.iter().map(|(_, _, b)| b).sum::<f64>() / rows.len() as f64;
        assert!((moves - mean_moves).abs() <= 1e-9, "{planner} mean moves mismatch");
        assert!((burn - mean_burn).abs() <= 1e-9, "{planner} mean burn mismatch");
    }

    // Wall-clock timings live in their own file, not in the report.
    let timings = fs::read_to_string(bench_out.join("timings.csv")).unwrap();
    assert!(timings.starts_with("env,planner,seed,wall_ms"));
    assert_eq!(timings.lines().count(), 1 + 4);
}
