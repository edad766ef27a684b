//! Trace rendering: grayscale PGM frames and an SVG sortie overlay.
//!
//! `frames/frame_NNN.pgm` holds the planning-time intensity grid of each
//! period (binary P5, `255 * min(1, intensity / cap)` per cell).
//! `paths.svg` overlays the grid with base positions, the fires of every
//! period, and one straight base-to-fire line per assignment, colored by
//! period.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crate::trace::TraceRecord;

/// Pixels per grid cell in the SVG.
const CELL: f64 = 24.0;
/// Period line colors, cycled.
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct RenderSummary {
    pub frames: usize,
    pub svg_path: PathBuf,
}

pub fn render_trace(records: &[TraceRecord], out_dir: &Path) -> Result<RenderSummary> {
    let header = records.iter().find_map(|r| match r {
        TraceRecord::Header {
            grid_width, grid_height, bases, intensity_cap, scenario, planner, ..
        } => Some((*grid_width, *grid_height, bases.clone(), *intensity_cap, scenario.clone(), planner.clone())),
        _ => None,
    });
    let Some((width, height, bases, cap, scenario, planner)) = header else {
        bail!("trace has no header record");
    };

    let frames_dir = out_dir.join("frames");
    fs::create_dir_all(&frames_dir)
        .with_context(|| format!("cannot create {}", frames_dir.display()))?;

    let mut frames = 0usize;
    for record in records {
        if let TraceRecord::Period { record: period, map } = record {
            let path = frames_dir.join(format!("frame_{:03}.pgm", period.period));
            write_pgm(&path, width, height, map, cap)?;
            frames += 1;
        }
    }

    let svg_path = out_dir.join("paths.svg");
    write_paths_svg(&svg_path, width, height, &bases, records, &scenario, &planner)?;
    Ok(RenderSummary { frames, svg_path })
}

/// Binary PGM, one byte per cell: intensity over the cap, saturated.
fn write_pgm(path: &Path, width: usize, height: usize, map: &[f64], cap: f64) -> Result<()> {
    if map.len() != width * height {
        bail!("frame has {} cells but the grid is {width}x{height}", map.len());
    }
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    write!(w, "P5\n{width} {height}\n255\n")?;
    let bytes: Vec<u8> = map
        .iter()
        .map(|&g| (255.0 * (g / cap).clamp(0.0, 1.0)).round() as u8)
        .collect();
    w.write_all(&bytes)?;
    Ok(())
}

fn svg_x(x: f64) -> f64 {
    (x + 0.5) * CELL
}

fn svg_y(y: f64) -> f64 {
    (y + 0.5) * CELL
}

/// One SVG for the whole episode: grid frame, bases (squares), fire cells
/// per period (dots), and one line per assignment. Repeated flights of the
/// same base-fire pair by different drones get a small parallel offset so
/// every sortie stays visible.
fn write_paths_svg(
    path: &Path,
    width: usize,
    height: usize,
    bases: &[(f64, f64)],
    records: &[TraceRecord],
    scenario: &str,
    planner: &str,
) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);

    // Bases can sit outside the grid; pad the canvas to include them.
    let mut min_x: f64 = 0.0;
    let mut min_y: f64 = 0.0;
    let mut max_x = width as f64;
    let mut max_y = height as f64;
    for &(bx, by) in bases {
        min_x = min_x.min(bx - 1.0);
        min_y = min_y.min(by - 1.0);
        max_x = max_x.max(bx + 2.0);
        max_y = max_y.max(by + 2.0);
    }
    let origin_x = min_x * CELL;
    let origin_y = min_y * CELL;
    let canvas_w = (max_x - min_x) * CELL;
    let canvas_h = (max_y - min_y) * CELL;

    writeln!(
        w,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{origin_x} {origin_y} {canvas_w} {canvas_h}\">"
    )?;
    writeln!(w, "  <title>{scenario} / {planner}: drone sorties by period</title>")?;
    writeln!(
        w,
        "  <rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#fbf7ef\" stroke=\"#444\"/>",
        width as f64 * CELL,
        height as f64 * CELL
    )?;

    for record in records {
        let TraceRecord::Period { record: period, .. } = record else { continue };
        let color = PALETTE[period.period % PALETTE.len()];
        for &(x, y, _) in &period.fires {
            writeln!(
                w,
                "  <circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{color}\" fill-opacity=\"0.35\"/>",
                svg_x(x as f64),
                svg_y(y as f64),
                0.3 * CELL
            )?;
        }
        for &(fire, base, drone) in &period.assignments {
            let (fx, fy, _) = period.fires[fire];
            let (bx, by) = bases[base];
            // Small perpendicular offset per drone, so stacked sorties on
            // the same pair are all drawn and countable.
            let dx = fx as f64 - bx;
            let dy = fy as f64 - by;
            let len = (dx * dx + dy * dy).sqrt().max(1e-9);
            let (px, py) = (-dy / len, dx / len);
            let off = 0.08 * CELL * drone as f64;
            writeln!(
                w,
                "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"2\"/>",
                svg_x(bx) + px * off,
                svg_y(by) + py * off,
                svg_x(fx as f64) + px * off,
                svg_y(fy as f64) + py * off
            )?;
        }
    }

    for (j, &(bx, by)) in bases.iter().enumerate() {
        writeln!(
            w,
            "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#222\"/>",
            svg_x(bx) - 0.3 * CELL,
            svg_y(by) - 0.3 * CELL,
            0.6 * CELL,
            0.6 * CELL
        )?;
        writeln!(
            w,
            "  <text x=\"{}\" y=\"{}\" font-size=\"{}\" fill=\"#fff\" text-anchor=\"middle\" dominant-baseline=\"central\">{j}</text>",
            svg_x(bx),
            svg_y(by),
            0.45 * CELL
        )?;
    }

    writeln!(w, "</svg>")?;
    Ok(())
}
