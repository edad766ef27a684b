//! Episode trace files: one JSON record per line.
//!
//! A trace starts with a `header` line (scenario geometry and run
//! identity), carries one `period` record per decision period (the full
//! rollout bookkeeping plus the planning-time intensity grid), and ends
//! with a `summary` record (episode totals and the final grid).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use pyroswarm_core::rollout::{Episode, PeriodRecord};
use pyroswarm_core::Scenario;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceRecord {
    Header {
        scenario: String,
        planner: String,
        seed: u64,
        horizon: usize,
        grid_width: usize,
        grid_height: usize,
        bases: Vec<(f64, f64)>,
        /// Intensity ceiling, for grayscale normalization when rendering.
        intensity_cap: f64,
    },
    Period {
        #[serde(flatten)]
        record: PeriodRecord,
        /// Planning-time cell intensities, row-major.
        map: Vec<f64>,
    },
    Summary {
        moves: f64,
        rounds: usize,
        burn_cost: f64,
        termination: String,
        /// Cell intensities after the final period, row-major.
        final_map: Vec<f64>,
    },
}

/// Flattens an episode into the record sequence of a trace file.
pub fn trace_records(
    scenario: &Scenario,
    episode: &Episode,
    horizon: usize,
    intensity_cap: f64,
) -> Vec<TraceRecord> {
    let mut records = vec![TraceRecord::Header {
        scenario: scenario.name.clone(),
        planner: episode.planner.label().to_string(),
        seed: episode.seed,
        horizon,
        grid_width: scenario.grid_width,
        grid_height: scenario.grid_height,
        bases: scenario.bases.clone(),
        intensity_cap,
    }];
    for (record, map) in episode.periods.iter().zip(&episode.maps) {
        records.push(TraceRecord::Period {
            record: record.clone(),
            map: map.raw_intensity().to_vec(),
        });
    }
    let final_map = episode.maps.last().expect("an episode always has its initial map");
    records.push(TraceRecord::Summary {
        moves: episode.moves,
        rounds: episode.rounds,
        burn_cost: episode.burn_cost,
        termination: episode.termination.label().to_string(),
        final_map: final_map.raw_intensity().to_vec(),
    });
    records
}

pub fn write_trace(path: &Path, records: &[TraceRecord]) -> Result<()> {
    let file = File::create(path)
        .with_context(|| format!("cannot create trace file {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for record in records {
        serde_json::to_writer(&mut w, record)?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    let file =
        File::open(path).with_context(|| format!("cannot open trace file {}", path.display()))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TraceRecord = serde_json::from_str(&line)
            .with_context(|| format!("bad trace record on line {} of {}", i + 1, path.display()))?;
        records.push(record);
    }
    Ok(records)
}
