//! Scenario descriptions: the static data a planning episode runs against.
//!
//! A [`Scenario`] bundles the terrain (grid size, barren cells, initial
//! ignitions, weather), the fleet (bases, drones, speed), the economic
//! weights of the dispatch objective, and the service-time uncertainty
//! model. Scenarios are plain JSON documents so they can be bundled with
//! the CLI and shared between runs.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::firegrid::{FireMap, Weather};

use super::ModelError;

/// A single drone: where it is stationed and how far it can fly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroneSpec {
    /// Index into [`Scenario::bases`] of the drone's home station.
    pub home_base: usize,
    /// Maximum total flight distance on a full battery, in grid units.
    pub range: f64,
}

/// An initially burning cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialFire {
    pub x: usize,
    pub y: usize,
    pub intensity: f64,
}

/// Mean service time per cell (time a drone spends working a fire there).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanModel {
    /// Same mean everywhere.
    Uniform { value: f64 },
    /// One value per grid cell, row-major.
    PerCell { values: Vec<f64> },
}

/// Covariance of service times across cells.
///
/// Planning only ever needs the restriction of this matrix to the cells
/// that are actually burning, so the scenario stores a generator rather
/// than a full grid-sized matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceModel {
    /// Independent cells with a common variance.
    Diagonal { variance: f64 },
    /// Squared-exponential kernel over cell-center distance, plus a
    /// diagonal nugget that keeps the matrix positive definite:
    /// `cov(a, b) = variance * exp(-d(a,b)^2 / (2 * length^2)) + nugget * [a == b]`.
    Kernel {
        variance: f64,
        length: f64,
        nugget: f64,
    },
}

/// Ambiguity set for service times: only the mean vector and covariance
/// matrix are trusted, not any particular distribution family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServiceModel {
    pub mean: MeanModel,
    pub covariance: CovarianceModel,
}

/// Everything a planning episode needs that does not change period to
/// period. Dynamic state (which cells burn, fleet batteries) lives in
/// [`FireMap`] and the controller's fleet state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub grid_width: usize,
    pub grid_height: usize,
    /// Cells with no fuel, as `(x, y)` pairs.
    #[serde(default)]
    pub barren: Vec<(usize, usize)>,
    pub initial_fires: Vec<InitialFire>,
    pub weather: Weather,
    /// Station coordinates in the same frame as the grid (a cell `(x, y)`
    /// has its center at coordinates `(x, y)`).
    pub bases: Vec<(f64, f64)>,
    pub drones: Vec<DroneSpec>,
    /// Cruise speed, grid units per time unit.
    pub drone_speed: f64,
    /// Objective weight on the predicted next-period burn cost.
    pub weight_burn: f64,
    /// Objective weight on each base kept active.
    pub weight_base: f64,
    /// Objective weight on total flight distance.
    pub weight_travel: f64,
    /// Length of one decision period, in time units.
    pub period_length: f64,
    /// Minimum base-to-fire distance for a base to serve a fire.
    pub safe_distance: f64,
    /// Battery fraction below which a drone must return for a recharge.
    pub reserve_threshold: f64,
    /// Acceptable probability of a drone overrunning the period.
    pub risk_level: f64,
    /// Big constant used by indicator-style constraints and recharge logic.
    pub big_m: f64,
    pub service: ServiceModel,
}

impl Scenario {
    /// Number of grid cells.
    pub fn cells(&self) -> usize {
        self.grid_width * self.grid_height
    }

    /// `(1 - risk_level) / risk_level`, the scaling between variance and
    /// squared mean slack in the distributionally robust time constraint.
    pub fn risk_ratio(&self) -> f64 {
        (1.0 - self.risk_level) / self.risk_level
    }

    /// Checks internal consistency; returns the first problem found.
    pub fn validate(&self) -> Result<(), ModelError> {
        fn bad(msg: String) -> Result<(), ModelError> {
            Err(ModelError::InvalidScenario(msg))
        }
        if self.grid_width == 0 || self.grid_height == 0 {
            return bad("grid dimensions must be positive".into());
        }
        if !(self.drone_speed > 0.0) {
            return bad(format!("drone speed must be positive, got {}", self.drone_speed));
        }
        if !(self.period_length > 0.0) {
            return bad(format!("period length must be positive, got {}", self.period_length));
        }
        if !(self.risk_level > 0.0 && self.risk_level < 1.0) {
            return bad(format!("risk level must lie in (0, 1), got {}", self.risk_level));
        }
        if !(0.0..1.0).contains(&self.reserve_threshold) {
            return bad(format!(
                "reserve threshold must lie in [0, 1), got {}",
                self.reserve_threshold
            ));
        }
        if !(self.big_m > 0.0) {
            return bad(format!("big-M must be positive, got {}", self.big_m));
        }
        if self.safe_distance < 0.0 {
            return bad(format!("safe distance must be non-negative, got {}", self.safe_distance));
        }
        for (name, w) in [
            ("burn", self.weight_burn),
            ("base", self.weight_base),
            ("travel", self.weight_travel),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return bad(format!("{name} weight must be a non-negative number, got {w}"));
            }
        }
        if self.bases.is_empty() {
            return bad("at least one base is required".into());
        }
        for (j, (bx, by)) in self.bases.iter().enumerate() {
            if !bx.is_finite() || !by.is_finite() {
                return bad(format!("base {j} has non-finite coordinates"));
            }
        }
        for (l, drone) in self.drones.iter().enumerate() {
            if drone.home_base >= self.bases.len() {
                return bad(format!(
                    "drone {l} is stationed at base {} but only {} bases exist",
                    drone.home_base,
                    self.bases.len()
                ));
            }
            if !(drone.range > 0.0) {
                return bad(format!("drone {l} must have positive range, got {}", drone.range));
            }
        }
        for &(x, y) in &self.barren {
            if x >= self.grid_width || y >= self.grid_height {
                return bad(format!("barren cell ({x}, {y}) lies outside the grid"));
            }
        }
        for fire in &self.initial_fires {
            if fire.x >= self.grid_width || fire.y >= self.grid_height {
                return bad(format!("initial fire ({}, {}) lies outside the grid", fire.x, fire.y));
            }
            if !(fire.intensity > 0.0) {
                return bad(format!(
                    "initial fire ({}, {}) must have positive intensity, got {}",
                    fire.x, fire.y, fire.intensity
                ));
            }
        }
        self.weather
            .validate()
            .map_err(|e| ModelError::InvalidScenario(e.to_string()))?;
        match &self.service.mean {
            MeanModel::Uniform { value } => {
                if !(*value >= 0.0 && value.is_finite()) {
                    return bad(format!("uniform service mean must be non-negative, got {value}"));
                }
            }
            MeanModel::PerCell { values } => {
                if values.len() != self.cells() {
                    return bad(format!(
                        "per-cell service means have {} entries but the grid has {} cells",
                        values.len(),
                        self.cells()
                    ));
                }
                if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                    return bad(format!("service means must be non-negative, found {v}"));
                }
            }
        }
        match &self.service.covariance {
            CovarianceModel::Diagonal { variance } => {
                if !(*variance > 0.0) {
                    return bad(format!("diagonal variance must be positive, got {variance}"));
                }
            }
            CovarianceModel::Kernel {
                variance,
                length,
                nugget,
            } => {
                if !(*variance >= 0.0) || !(*length > 0.0) || !(*nugget > 0.0) {
                    return bad(format!(
                        "kernel covariance needs variance >= 0, length > 0, nugget > 0; \
                         got variance {variance}, length {length}, nugget {nugget}"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Mean service time at a single cell.
    pub fn service_mean_at(&self, cell: usize) -> f64 {
        match &self.service.mean {
            MeanModel::Uniform { value } => *value,
            MeanModel::PerCell { values } => values[cell],
        }
    }

    /// Service-time covariance between two cells, identified by their
    /// `(x, y)` coordinates.
    pub fn service_cov_between(&self, a: (usize, usize), b: (usize, usize)) -> f64 {
        match &self.service.covariance {
            CovarianceModel::Diagonal { variance } => {
                if a == b {
                    *variance
                } else {
                    0.0
                }
            }
            CovarianceModel::Kernel {
                variance,
                length,
                nugget,
            } => {
                let dx = a.0 as f64 - b.0 as f64;
                let dy = a.1 as f64 - b.1 as f64;
                let d2 = dx * dx + dy * dy;
                let k = variance * (-d2 / (2.0 * length * length)).exp();
                if a == b {
                    k + nugget
                } else {
                    k
                }
            }
        }
    }

    /// Builds the starting grid: full fuel except barren cells, with the
    /// initial fires lit.
    pub fn initial_map(&self) -> Result<FireMap, ModelError> {
        let mut fuel = vec![true; self.cells()];
        for &(x, y) in &self.barren {
            fuel[y * self.grid_width + x] = false;
        }
        let mut map = FireMap::with_fuel(self.grid_width, self.grid_height, fuel)
            .map_err(|e| ModelError::InvalidScenario(e.to_string()))?;
        for fire in &self.initial_fires {
            map.set_fuel(fire.x, fire.y, true)
                .map_err(|e| ModelError::InvalidScenario(e.to_string()))?;
            map.ignite(fire.x, fire.y, fire.intensity)
                .map_err(|e| ModelError::InvalidScenario(e.to_string()))?;
        }
        Ok(map)
    }
}

/// Reads and validates a scenario from a JSON file.
pub fn load_scenario(path: &Path) -> Result<Scenario, ModelError> {
    let text = fs::read_to_string(path)?;
    let scenario: Scenario = serde_json::from_str(&text)?;
    scenario.validate()?;
    Ok(scenario)
}

/// Writes a scenario as pretty-printed JSON.
pub fn save_scenario(scenario: &Scenario, path: &Path) -> Result<(), ModelError> {
    let text = serde_json::to_string_pretty(scenario)?;
    fs::write(path, text)?;
    Ok(())
}
