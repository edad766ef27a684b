//! Seeded cellular fire-spread simulator on a rectangular grid.
//!
//! Cells carry a fuel flag and a continuous burn intensity. Spread is
//! stochastic but fully reproducible: one `step_spread` call with the same
//! map, weather, and seed always produces the same successor map. The module
//! also generates the (before, after) training pairs consumed by the
//! predictor, including the quench-conditioned variant, and the dihedral +
//! translation augmentation used to stretch a small corpus.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;
use thiserror::Error;

/// Cell code in serialized training pairs: bare ground (no fuel left).
pub const CELL_BARE: u8 = 0;
/// Cell code: unburned fuel.
pub const CELL_FUEL: u8 = 1;
/// Cell code: actively burning.
pub const CELL_BURNING: u8 = 2;

/// Intensities this close to zero are treated as extinguished.
const EXTINCT_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FireGridError {
    #[error("grid dimensions must be positive, got {width}x{height}")]
    EmptyGrid { width: usize, height: usize },
    #[error("expected {expected} cells, got {got}")]
    CellCountMismatch { expected: usize, got: usize },
    #[error("cell ({x}, {y}) is out of bounds for a {width}x{height} grid")]
    OutOfBounds { x: usize, y: usize, width: usize, height: usize },
    #[error("cannot ignite cell ({x}, {y}): no fuel")]
    NoFuel { x: usize, y: usize },
    #[error("quench applied to unburning cell ({x}, {y})")]
    QuenchOnUnburning { x: usize, y: usize },
    #[error("intensity must be finite and non-negative, got {value}")]
    BadIntensity { value: f64 },
    #[error("malformed map text: {0}")]
    MalformedText(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Eight-way compass wind direction. The vector points where the wind blows
/// *toward*; spread aligned with it is favored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindDirection {
    North,
    NorthEast,
    East,
    SouthEast,
    South,
    SouthWest,
    West,
    NorthWest,
}

impl WindDirection {
    pub const ALL: [WindDirection; 8] = [
        WindDirection::North,
        WindDirection::NorthEast,
        WindDirection::East,
        WindDirection::SouthEast,
        WindDirection::South,
        WindDirection::SouthWest,
        WindDirection::West,
        WindDirection::NorthWest,
    ];

    /// Unit vector in grid coordinates (x grows east, y grows south).
    pub fn unit_vector(self) -> (f64, f64) {
        let d = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            WindDirection::North => (0.0, -1.0),
            WindDirection::NorthEast => (d, -d),
            WindDirection::East => (1.0, 0.0),
            WindDirection::SouthEast => (d, d),
            WindDirection::South => (0.0, 1.0),
            WindDirection::SouthWest => (-d, d),
            WindDirection::West => (-1.0, 0.0),
            WindDirection::NorthWest => (-d, -d),
        }
    }
}

/// Exogenous weather for one period.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weather {
    pub wind_direction: WindDirection,
    /// Wind strength in `[0, 1]`; 0 makes spread isotropic.
    pub wind_speed: f64,
    /// Fuel moisture in `[0, 1]`; damps every ignition probability.
    pub moisture: f64,
}

impl Weather {
    pub fn calm() -> Self {
        Weather { wind_direction: WindDirection::North, wind_speed: 0.0, moisture: 0.0 }
    }

    pub fn validate(&self) -> Result<(), FireGridError> {
        for value in [self.wind_speed, self.moisture] {
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                return Err(FireGridError::BadIntensity { value });
            }
        }
        Ok(())
    }
}

/// Tunables of the spread process. `Default` is the configuration every
/// bundled dataset and scenario uses.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SpreadConfig {
    /// Per-burning-neighbor ignition probability before weather modifiers.
    pub base_ignition: f64,
    /// Fractional intensity loss per step for burning cells. At 0 a burning
    /// cell keeps burning until quenched.
    pub decay: f64,
    /// Intensity ceiling; also the largest crew size one cell can demand.
    pub intensity_cap: f64,
    /// Lower bound of the wind alignment factor, so upwind spread never
    /// fully stalls.
    pub wind_floor: f64,
}

impl Default for SpreadConfig {
    fn default() -> Self {
        SpreadConfig { base_ignition: 0.35, decay: 0.0, intensity_cap: 3.0, wind_floor: 0.2 }
    }
}

/// Rectangular grid state: per-cell fuel flag and burn intensity.
///
/// Row-major layout; `(x, y)` indexes column `x` of row `y`. A cell is
/// *burning* when its intensity is positive, which requires fuel.
#[derive(Clone, Debug, PartialEq)]
pub struct FireMap {
    width: usize,
    height: usize,
    fuel: Vec<bool>,
    intensity: Vec<f64>,
}

impl FireMap {
    /// Fresh all-fuel, nothing-burning map.
    pub fn new(width: usize, height: usize) -> Result<Self, FireGridError> {
        if width == 0 || height == 0 {
            return Err(FireGridError::EmptyGrid { width, height });
        }
        Ok(FireMap {
            width,
            height,
            fuel: vec![true; width * height],
            intensity: vec![0.0; width * height],
        })
    }

    pub fn with_fuel(width: usize, height: usize, fuel: Vec<bool>) -> Result<Self, FireGridError> {
        let mut map = FireMap::new(width, height)?;
        if fuel.len() != map.cells() {
            return Err(FireGridError::CellCountMismatch { expected: map.cells(), got: fuel.len() });
        }
        map.fuel = fuel;
        Ok(map)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    fn check_bounds(&self, x: usize, y: usize) -> Result<(), FireGridError> {
        if x >= self.width || y >= self.height {
            return Err(FireGridError::OutOfBounds { x, y, width: self.width, height: self.height });
        }
        Ok(())
    }

    pub fn fuel_at(&self, x: usize, y: usize) -> bool {
        self.fuel[self.index(x, y)]
    }

    pub fn intensity_at(&self, x: usize, y: usize) -> f64 {
        self.intensity[self.index(x, y)]
    }

    pub fn is_burning(&self, x: usize, y: usize) -> bool {
        self.intensity[self.index(x, y)] > EXTINCT_EPS
    }

    pub fn set_fuel(&mut self, x: usize, y: usize, fuel: bool) -> Result<(), FireGridError> {
        self.check_bounds(x, y)?;
        let idx = self.index(x, y);
        if !fuel && self.intensity[idx] > EXTINCT_EPS {
            // A burning cell cannot lose its fuel flag out from under the fire.
            self.intensity[idx] = 0.0;
        }
        self.fuel[idx] = fuel;
        Ok(())
    }

    /// Start (or boost) a fire at a fuel cell.
    pub fn ignite(&mut self, x: usize, y: usize, intensity: f64) -> Result<(), FireGridError> {
        self.check_bounds(x, y)?;
        if !intensity.is_finite() || intensity < 0.0 {
            return Err(FireGridError::BadIntensity { value: intensity });
        }
        let idx = self.index(x, y);
        if !self.fuel[idx] {
            return Err(FireGridError::NoFuel { x, y });
        }
        self.intensity[idx] = intensity;
        Ok(())
    }

    /// Burning cells as `(x, y, intensity)`, row-major order.
    pub fn burning_cells(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.intensity.iter().enumerate().filter_map(move |(idx, &g)| {
            (g > EXTINCT_EPS).then(|| {
                let (x, y) = self.coords(idx);
                (x, y, g)
            })
        })
    }

    pub fn burning_count(&self) -> usize {
        self.intensity.iter().filter(|g| **g > EXTINCT_EPS).count()
    }

    pub fn total_intensity(&self) -> f64 {
        self.intensity.iter().sum()
    }

    /// Binary burning mask, row-major.
    pub fn burning_mask(&self) -> Vec<u8> {
        self.intensity.iter().map(|&g| u8::from(g > EXTINCT_EPS)).collect()
    }

    /// Tri-state cell codes (`CELL_BARE` / `CELL_FUEL` / `CELL_BURNING`),
    /// row-major.
    pub fn cell_codes(&self) -> Vec<u8> {
        self.intensity
            .iter()
            .zip(&self.fuel)
            .map(|(&g, &fuel)| {
                if g > EXTINCT_EPS {
                    CELL_BURNING
                } else if fuel {
                    CELL_FUEL
                } else {
                    CELL_BARE
                }
            })
            .collect()
    }

    pub fn raw_intensity(&self) -> &[f64] {
        &self.intensity
    }

    pub fn raw_fuel(&self) -> &[bool] {
        &self.fuel
    }
}

/// Number of cells currently burning, as the scalar cost the planner trades
/// off against flight effort.
pub fn burn_cost(map: &FireMap) -> f64 {
    map.burning_count() as f64
}

const NEIGHBOR_OFFSETS: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Advance the fire by one period.
///
/// Burning cells persist with intensity `g * (1 - decay)` (capped); a cell
/// that decays out has exhausted its fuel. Every fuel cell adjacent (8-way)
/// to a burning cell draws one ignition trial per burning neighbor, in fixed
/// neighbor order, with probability
/// `base_ignition * wind_factor * (1 - moisture)`, where the wind factor
/// interpolates between isotropic and `max(wind_floor, cos θ)` by wind
/// speed (θ = angle between spread direction and wind). Newly ignited cells
/// draw an initial intensity in `[1, intensity_cap]`.
///
/// Fully deterministic in `(map, weather, config, seed)`.
pub fn step_spread(map: &FireMap, weather: &Weather, config: &SpreadConfig, seed: u64) -> FireMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next = map.clone();
    let wind = weather.wind_direction.unit_vector();

    // Existing fires evolve first; ignition below looks at the *input* map,
    // so a cell ignited this step cannot propagate within the same step.
    for idx in 0..map.cells() {
        let g = map.intensity[idx];
        if g <= EXTINCT_EPS {
            continue;
        }
        let decayed = (g * (1.0 - config.decay)).min(config.intensity_cap);
        if decayed < 0.05 && config.decay > 0.0 {
            next.intensity[idx] = 0.0;
            next.fuel[idx] = false; // burned out
        } else {
            next.intensity[idx] = decayed;
        }
    }

    for y in 0..map.height {
        for x in 0..map.width {
            let idx = map.index(x, y);
            if map.intensity[idx] > EXTINCT_EPS || !map.fuel[idx] {
                continue;
            }
            let mut ignited = false;
            for (dx, dy) in NEIGHBOR_OFFSETS {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx < 0 || ny < 0 || nx >= map.width as isize || ny >= map.height as isize {
                    continue;
                }
                let nidx = map.index(nx as usize, ny as usize);
                if map.intensity[nidx] <= EXTINCT_EPS {
                    continue;
                }
                // Direction of spread: from the burning neighbor toward us.
                let len = ((dx * dx + dy * dy) as f64).sqrt();
                let spread = (-dx as f64 / len, -dy as f64 / len);
                let cos = spread.0 * wind.0 + spread.1 * wind.1;
                let wind_factor = (1.0 - weather.wind_speed)
                    + weather.wind_speed * cos.max(config.wind_floor);
                let p = (config.base_ignition * wind_factor * (1.0 - weather.moisture))
                    .clamp(0.0, 1.0);
                if rng.gen::<f64>() < p {
                    ignited = true;
                    break;
                }
            }
            if ignited {
                let g0 = rng.gen_range(1.0..=config.intensity_cap);
                next.intensity[idx] = g0;
            }
        }
    }
    next
}

/// Apply a quench allocation: `quench[cell]` drone sorties each knock one
/// unit of intensity off that cell. A cell driven to zero stops burning and
/// its fuel is written off (retardant-soaked ground does not reignite), so a
/// fully quenched cell stays out on the next step. Quenching a cell that is
/// not burning is an error.
pub fn apply_quench(map: &FireMap, quench: &[u32]) -> Result<FireMap, FireGridError> {
    if quench.len() != map.cells() {
        return Err(FireGridError::CellCountMismatch { expected: map.cells(), got: quench.len() });
    }
    let mut next = map.clone();
    for (idx, &q) in quench.iter().enumerate() {
        if q == 0 {
            continue;
        }
        if map.intensity[idx] <= EXTINCT_EPS {
            let (x, y) = map.coords(idx);
            return Err(FireGridError::QuenchOnUnburning { x, y });
        }
        let g = (map.intensity[idx] - q as f64).max(0.0);
        next.intensity[idx] = g;
        if g <= EXTINCT_EPS {
            next.intensity[idx] = 0.0;
            next.fuel[idx] = false;
        }
    }
    Ok(next)
}

// ---------------------------------------------------------------------------
// Training data
// ---------------------------------------------------------------------------

/// One supervised example: a tri-state map (plus the quench mask applied to
/// it, when training the quench-conditioned model) and the binary burning
/// mask one step later, together with the scalar burn cost of that successor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    /// Rows of tri-state cell codes before the transition.
    pub before: Vec<Vec<u8>>,
    /// Rows of binary burning flags after the transition.
    pub after: Vec<Vec<u8>>,
    /// Binary mask of cells fully quenched before spreading, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quench: Option<Vec<Vec<u8>>>,
    /// Burning-cell count of `after`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next_cost: Option<f64>,
}

impl TrainingPair {
    pub fn width(&self) -> usize {
        self.before.first().map_or(0, Vec::len)
    }

    pub fn height(&self) -> usize {
        self.before.len()
    }

    pub fn validate(&self) -> Result<(), FireGridError> {
        let (w, h) = (self.width(), self.height());
        if w == 0 || h == 0 {
            return Err(FireGridError::EmptyGrid { width: w, height: h });
        }
        let check = |grid: &Vec<Vec<u8>>, max: u8| -> Result<(), FireGridError> {
            if grid.len() != h || grid.iter().any(|row| row.len() != w) {
                return Err(FireGridError::CellCountMismatch {
                    expected: w * h,
                    got: grid.iter().map(Vec::len).sum(),
                });
            }
            if grid.iter().flatten().any(|&c| c > max) {
                return Err(FireGridError::MalformedText(format!(
                    "cell code above {max} in training pair"
                )));
            }
            Ok(())
        };
        check(&self.before, CELL_BURNING)?;
        check(&self.after, 1)?;
        if let Some(q) = &self.quench {
            check(q, 1)?;
        }
        Ok(())
    }
}

/// Provenance of a generated pair, kept so tests can replay the exact
/// transition (the continuous intensities are not recoverable from the
/// tri-state codes alone).
#[derive(Clone, Debug)]
pub struct PairMeta {
    /// Continuous state the pair's `before` codes were taken from.
    pub pre_quench: FireMap,
    /// State actually fed to `step_spread` (quench already applied).
    pub post_quench: FireMap,
    pub weather: Weather,
    pub step_seed: u64,
}

/// Generate `n_envs` random environments and roll each out for `horizon`
/// snapshots, yielding `n_envs * (horizon - 1)` consecutive pairs. With
/// `with_quench`, a random subset of burning cells is fully quenched before
/// each step and recorded in the pair. Deterministic in `seed`.
pub fn generate_pairs(
    n_envs: usize,
    size: usize,
    horizon: usize,
    with_quench: bool,
    seed: u64,
) -> Vec<TrainingPair> {
    generate_pairs_with_meta(n_envs, size, horizon, with_quench, seed)
        .into_iter()
        .map(|(pair, _)| pair)
        .collect()
}

/// As [`generate_pairs`], but keeping per-pair provenance.
pub fn generate_pairs_with_meta(
    n_envs: usize,
    size: usize,
    horizon: usize,
    with_quench: bool,
    seed: u64,
) -> Vec<(TrainingPair, PairMeta)> {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let config = SpreadConfig::default();
    let mut out = Vec::new();
    for _ in 0..n_envs {
        let env_seed = master.gen::<u64>();
        let mut rng = ChaCha8Rng::seed_from_u64(env_seed);
        let (mut current, weather) = random_environment(size, &mut rng);
        for _ in 1..horizon {
            let quench_mask = if with_quench {
                let mut mask = vec![0u32; current.cells()];
                for idx in 0..current.cells() {
                    if current.raw_intensity()[idx] > EXTINCT_EPS && rng.gen::<f64>() < 0.35 {
                        mask[idx] = current.raw_intensity()[idx].ceil() as u32;
                    }
                }
                Some(mask)
            } else {
                None
            };
            let quenched = match &quench_mask {
                Some(mask) => apply_quench(&current, mask).expect("mask built from burning cells"),
                None => current.clone(),
            };
            let step_seed = rng.gen::<u64>();
            let next = step_spread(&quenched, &weather, &config, step_seed);
            let to_rows = |cells: Vec<u8>| -> Vec<Vec<u8>> {
                cells.chunks(size).map(<[u8]>::to_vec).collect()
            };
            let pair = TrainingPair {
                before: to_rows(current.cell_codes()),
                after: to_rows(next.burning_mask()),
                quench: quench_mask
                    .as_ref()
                    .map(|m| to_rows(m.iter().map(|&q| u8::from(q > 0)).collect())),
                next_cost: Some(burn_cost(&next)),
            };
            let meta = PairMeta {
                pre_quench: current.clone(),
                post_quench: quenched,
                weather,
                step_seed,
            };
            out.push((pair, meta));
            current = next;
        }
    }
    out
}

/// Random fuel layout, weather, and 1–3 ignition clusters on a `size x size`
/// grid. Used by the pair generator and by synthetic benchmarks.
pub fn random_environment(size: usize, rng: &mut ChaCha8Rng) -> (FireMap, Weather) {
    let config = SpreadConfig::default();
    let density = rng.gen_range(0.85..0.98);
    let fuel: Vec<bool> = (0..size * size).map(|_| rng.gen::<f64>() < density).collect();
    let mut map = FireMap::with_fuel(size, size, fuel).expect("size checked by caller");
    let weather = Weather {
        wind_direction: WindDirection::ALL[rng.gen_range(0..WindDirection::ALL.len())],
        wind_speed: rng.gen_range(0.0..0.9),
        moisture: rng.gen_range(0.0..0.35),
    };
    let clusters = rng.gen_range(1..=3);
    for _ in 0..clusters {
        let cx = rng.gen_range(0..size);
        let cy = rng.gen_range(0..size);
        let cluster_size = rng.gen_range(1..=4);
        let (mut x, mut y) = (cx, cy);
        for _ in 0..cluster_size {
            let g = rng.gen_range(0.8..config.intensity_cap);
            map.set_fuel(x, y, true).expect("in bounds");
            map.ignite(x, y, g).expect("fuel just set");
            x = (x + rng.gen_range(0.. 3)).saturating_sub(1).min(size - 1);
            y = (y + rng.gen_range(0..3)).saturating_sub(1).min(size - 1);
        }
    }
    (map, weather)
}

/// The twelve augmentation ops: the eight dihedral symmetries and four
/// one-cell cyclic translations of the identity orientation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum AugmentOp {
    Dihedral { quarter_turns: u8, mirror: bool },
    Shift { dx: isize, dy: isize },
}

const AUGMENT_OPS: [AugmentOp; 12] = [
    AugmentOp::Dihedral { quarter_turns: 0, mirror: false },
    AugmentOp::Dihedral { quarter_turns: 1, mirror: false },
    AugmentOp::Dihedral { quarter_turns: 2, mirror: false },
    AugmentOp::Dihedral { quarter_turns: 3, mirror: false },
    AugmentOp::Dihedral { quarter_turns: 0, mirror: true },
    AugmentOp::Dihedral { quarter_turns: 1, mirror: true },
    AugmentOp::Dihedral { quarter_turns: 2, mirror: true },
    AugmentOp::Dihedral { quarter_turns: 3, mirror: true },
    AugmentOp::Shift { dx: 1, dy: 0 },
    AugmentOp::Shift { dx: -1, dy: 0 },
    AugmentOp::Shift { dx: 0, dy: 1 },
    AugmentOp::Shift { dx: 0, dy: -1 },
];

fn transform_grid(grid: &[Vec<u8>], op: AugmentOp) -> Vec<Vec<u8>> {
    let h = grid.len();
    let w = grid[0].len();
    match op {
        AugmentOp::Shift { dx, dy } => (0..h)
            .map(|r| {
                let src_r = (r as isize - dy).rem_euclid(h as isize) as usize;
                (0..w)
                    .map(|c| {
                        let src_c = (c as isize - dx).rem_euclid(w as isize) as usize;
                        grid[src_r][src_c]
                    })
                    .collect()
            })
            .collect(),
        AugmentOp::Dihedral { quarter_turns, mirror } => {
            let mut cur: Vec<Vec<u8>> = grid.to_vec();
            for _ in 0..quarter_turns {
                // Quarter turn clockwise: out[r][c] = in[h-1-c][r].
                let (ch, cw) = (cur.len(), cur[0].len());
                cur = (0..cw)
                    .map(|r| (0..ch).map(|c| cur[ch - 1 - c][r]).collect())
                    .collect();
            }
            if mirror {
                for row in &mut cur {
                    row.reverse();
                }
            }
            cur
        }
    }
}

/// Expand each pair into its twelve symmetry/translation variants (identity
/// included), transforming every grid in the pair consistently. The scalar
/// cost is invariant.
pub fn augment(pairs: &[TrainingPair]) -> Vec<TrainingPair> {
    let mut out = Vec::with_capacity(pairs.len() * AUGMENT_OPS.len());
    for pair in pairs {
        for op in AUGMENT_OPS {
            out.push(TrainingPair {
                before: transform_grid(&pair.before, op),
                after: transform_grid(&pair.after, op),
                quench: pair.quench.as_ref().map(|q| transform_grid(q, op)),
                next_cost: pair.next_cost,
            });
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Text and JSONL I/O
// ---------------------------------------------------------------------------

/// Write the intensity grid: a `width height` header line, then `height`
/// rows of space-separated intensities.
pub fn write_map_text(map: &FireMap, mut w: impl Write) -> Result<(), FireGridError> {
    writeln!(w, "{} {}", map.width, map.height)?;
    for y in 0..map.height {
        let row: Vec<String> =
            (0..map.width).map(|x| format!("{}", map.intensity_at(x, y))).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

/// Write the fuel layer in the same format, cells as `0`/`1`.
pub fn write_fuel_text(map: &FireMap, mut w: impl Write) -> Result<(), FireGridError> {
    writeln!(w, "{} {}", map.width, map.height)?;
    for y in 0..map.height {
        let row: Vec<String> =
            (0..map.width).map(|x| format!("{}", u8::from(map.fuel_at(x, y)))).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

fn parse_grid_text(r: impl BufRead) -> Result<(usize, usize, Vec<f64>), FireGridError> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| FireGridError::MalformedText("empty file".into()))??;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| FireGridError::MalformedText(format!("bad header `{header}`"))))
        .collect::<Result<_, _>>()?;
    let [width, height] = dims[..] else {
        return Err(FireGridError::MalformedText(format!("bad header `{header}`")));
    };
    let mut values = Vec::with_capacity(width * height);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| FireGridError::MalformedText(format!("bad value `{tok}`")))?;
            values.push(v);
        }
    }
    if values.len() != width * height {
        return Err(FireGridError::CellCountMismatch { expected: width * height, got: values.len() });
    }
    Ok((width, height, values))
}

/// Read an intensity grid, optionally paired with a fuel layer file; absent
/// a fuel file every cell has fuel.
pub fn read_map_text(
    grid: impl BufRead,
    fuel: Option<impl BufRead>,
) -> Result<FireMap, FireGridError> {
    let (width, height, intensity) = parse_grid_text(grid)?;
    let mut map = FireMap::new(width, height)?;
    if let Some(fuel) = fuel {
        let (fw, fh, fv) = parse_grid_text(fuel)?;
        if (fw, fh) != (width, height) {
            return Err(FireGridError::CellCountMismatch {
                expected: width * height,
                got: fw * fh,
            });
        }
        map.fuel = fv.iter().map(|&v| v != 0.0).collect();
    }
    for (idx, &g) in intensity.iter().enumerate() {
        if !g.is_finite() || g < 0.0 {
            return Err(FireGridError::BadIntensity { value: g });
        }
        if g > EXTINCT_EPS {
            let (x, y) = map.coords(idx);
            map.fuel[idx] = true;
            map.ignite(x, y, g)?;
        }
    }
    Ok(map)
}

pub fn load_map(
    grid_path: &Path,
    fuel_path: Option<&Path>,
) -> Result<FireMap, FireGridError> {
    let grid = std::io::BufReader::new(std::fs::File::open(grid_path)?);
    let fuel = fuel_path
        .map(|p| std::fs::File::open(p).map(std::io::BufReader::new))
        .transpose()?;
    read_map_text(grid, fuel)
}

pub fn save_map(map: &FireMap, grid_path: &Path, fuel_path: &Path) -> Result<(), FireGridError> {
    write_map_text(map, std::fs::File::create(grid_path)?)?;
    write_fuel_text(map, std::fs::File::create(fuel_path)?)?;
    Ok(())
}

/// One JSON object per line.
pub fn write_pairs_jsonl(pairs: &[TrainingPair], mut w: impl Write) -> Result<(), FireGridError> {
    for pair in pairs {
        serde_json::to_writer(&mut w, pair)?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_pairs_jsonl(r: impl BufRead) -> Result<Vec<TrainingPair>, FireGridError> {
    let mut pairs = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let pair: TrainingPair = serde_json::from_str(&line)?;
        pair.validate()?;
        pairs.push(pair);
    }
    Ok(pairs)
}
