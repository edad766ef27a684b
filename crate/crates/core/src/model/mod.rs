//! One-period dispatch model: data extraction, objective, and constraints.
//!
//! Each decision period the controller sees a snapshot of the fire and the
//! fleet. This module turns that snapshot into a compact [`Instance`]
//! (fire points, travel distances, eligibility, service-time moments),
//! defines the [`Decision`] variables (which drone flies from which base
//! to which fire, and which bases stay active), and provides the
//! constraint machinery: deterministic resource checks plus the
//! distributionally robust period-time constraint in both its exact
//! oracle form and its mixed-integer reformulation (see [`ccro`]).

pub mod ccro;
mod scenario;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::firegrid::FireMap;

pub use ccro::{
    build_ccro, cantelli_feasible, completion_moments, default_tau_max, plain_time_feasible,
    plain_time_used, robust_completion_bound, tie_rule_pick, CcroConstraint, TimeModel,
};
pub use scenario::{
    load_scenario, save_scenario, CovarianceModel, DroneSpec, InitialFire, MeanModel,
    ServiceModel, Scenario,
};

/// Errors from scenario handling and instance extraction.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("map is {map_w}x{map_h} but the scenario expects {want_w}x{want_h}")]
    GridMismatch {
        map_w: usize,
        map_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("fleet snapshot covers {got} drones but the scenario has {want}")]
    FleetSizeMismatch { got: usize, want: usize },
    #[error("battery level {level} of drone {drone} is outside [0, 1]")]
    BadBatteryLevel { drone: usize, level: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A burning cell that needs service this period.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FirePoint {
    pub x: usize,
    pub y: usize,
    pub intensity: f64,
}

impl FirePoint {
    /// How many drones this point can absorb this period: the intensity
    /// rounded up, so even a faint fire admits one drone.
    pub fn drone_cap(&self) -> u32 {
        self.intensity.ceil() as u32
    }
}

/// Fleet status entering a period: per-drone availability and battery
/// fraction. Kept separate from the controller's richer bookkeeping so
/// the one-period model does not depend on multi-period state.
#[derive(Clone, Debug, PartialEq)]
pub struct FleetSnapshot {
    pub available: Vec<bool>,
    /// Battery charge as a fraction of capacity, one entry per drone.
    pub battery: Vec<f64>,
}

impl FleetSnapshot {
    /// A fully charged, fully available fleet of `n` drones.
    pub fn fresh(n: usize) -> Self {
        FleetSnapshot {
            available: vec![true; n],
            battery: vec![1.0; n],
        }
    }
}

/// The one-period planning data: everything the dispatch optimizer needs,
/// already restricted to the cells that are actually burning.
#[derive(Clone, Debug)]
pub struct Instance {
    pub fire_points: Vec<FirePoint>,
    pub n_bases: usize,
    pub n_drones: usize,
    /// `distances[i][j]`: one-way distance from fire point `i` to base `j`.
    pub distances: Vec<Vec<f64>>,
    /// `eligible[i][j]`: base `j` is far enough from fire point `i` to
    /// operate (stations too close to the flames are ruled out).
    pub eligible: Vec<Vec<bool>>,
    /// Per-drone availability this period.
    pub available: Vec<bool>,
    /// Per-drone battery fraction in `[0, 1]`.
    pub battery: Vec<f64>,
    /// Mean service time at each fire point.
    pub service_mean: DVector<f64>,
    /// Service-time covariance across fire points (positive definite).
    pub service_cov: DMatrix<f64>,
}

impl Instance {
    pub fn n_fires(&self) -> usize {
        self.fire_points.len()
    }

    /// Distance budget of drone `l` this period: its remaining charge
    /// times its full-battery range.
    pub fn battery_budget(&self, scenario: &Scenario, drone: usize) -> f64 {
        scenario.drones[drone].range * self.battery[drone]
    }
}

/// Extracts the one-period instance from the current grid and fleet.
///
/// Fire points are the burning cells in row-major order. Distances are
/// Euclidean between base coordinates and cell centers (cell `(x, y)`
/// sits at coordinates `(x, y)`). The service-time moments are the
/// scenario's mean/covariance model restricted to the burning cells.
pub fn extract_instance(
    map: &FireMap,
    scenario: &Scenario,
    fleet: &FleetSnapshot,
) -> Result<Instance, ModelError> {
    if map.width() != scenario.grid_width || map.height() != scenario.grid_height {
        return Err(ModelError::GridMismatch {
            map_w: map.width(),
            map_h: map.height(),
            want_w: scenario.grid_width,
            want_h: scenario.grid_height,
        });
    }
    let n_drones = scenario.drones.len();
    if fleet.available.len() != n_drones || fleet.battery.len() != n_drones {
        return Err(ModelError::FleetSizeMismatch {
            got: fleet.available.len().min(fleet.battery.len()),
            want: n_drones,
        });
    }
    for (l, &level) in fleet.battery.iter().enumerate() {
        if !(0.0..=1.0).contains(&level) {
            return Err(ModelError::BadBatteryLevel { drone: l, level });
        }
    }

    let fire_points: Vec<FirePoint> = map
        .burning_cells()
        .into_iter()
        .map(|(x, y, intensity)| FirePoint { x, y, intensity })
        .collect();
    let n_fires = fire_points.len();
    let n_bases = scenario.bases.len();

    let mut distances = vec![vec![0.0; n_bases]; n_fires];
    let mut eligible = vec![vec![false; n_bases]; n_fires];
    for (i, fp) in fire_points.iter().enumerate() {
        for (j, &(bx, by)) in scenario.bases.iter().enumerate() {
            let dx = bx - fp.x as f64;
            let dy = by - fp.y as f64;
            let d = (dx * dx + dy * dy).sqrt();
            distances[i][j] = d;
            eligible[i][j] = d >= scenario.safe_distance;
        }
    }

    let cell_of = |fp: &FirePoint| fp.y * scenario.grid_width + fp.x;
    let service_mean = DVector::from_iterator(
        n_fires,
        fire_points.iter().map(|fp| scenario.service_mean_at(cell_of(fp))),
    );
    let service_cov = DMatrix::from_fn(n_fires, n_fires, |r, c| {
        scenario.service_cov_between(
            (fire_points[r].x, fire_points[r].y),
            (fire_points[c].x, fire_points[c].y),
        )
    });

    Ok(Instance {
        fire_points,
        n_bases,
        n_drones,
        distances,
        eligible,
        available: fleet.available.clone(),
        battery: fleet.battery.clone(),
        service_mean,
        service_cov,
    })
}

/// A one-period dispatch plan: which drone serves which fire from which
/// base, and which bases are kept active.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    n_fires: usize,
    n_bases: usize,
    n_drones: usize,
    /// Flattened `[fire][base][drone]` indicator.
    assignments: Vec<bool>,
    /// Which bases are active this period.
    pub active_bases: Vec<bool>,
}

impl Decision {
    /// The all-zero plan (no sorties, all bases dark).
    pub fn empty(n_fires: usize, n_bases: usize, n_drones: usize) -> Self {
        Decision {
            n_fires,
            n_bases,
            n_drones,
            assignments: vec![false; n_fires * n_bases * n_drones],
            active_bases: vec![false; n_bases],
        }
    }

    /// The all-zero plan sized for an instance.
    pub fn empty_for(instance: &Instance) -> Self {
        Decision::empty(instance.n_fires(), instance.n_bases, instance.n_drones)
    }

    pub fn n_fires(&self) -> usize {
        self.n_fires
    }

    pub fn n_bases(&self) -> usize {
        self.n_bases
    }

    pub fn n_drones(&self) -> usize {
        self.n_drones
    }

    fn idx(&self, fire: usize, base: usize, drone: usize) -> usize {
        debug_assert!(fire < self.n_fires && base < self.n_bases && drone < self.n_drones);
        (fire * self.n_bases + base) * self.n_drones + drone
    }

    pub fn get(&self, fire: usize, base: usize, drone: usize) -> bool {
        self.assignments[self.idx(fire, base, drone)]
    }

    pub fn set(&mut self, fire: usize, base: usize, drone: usize, value: bool) {
        let idx = self.idx(fire, base, drone);
        self.assignments[idx] = value;
    }

    /// All set `(fire, base, drone)` triples in row-major order.
    pub fn triples(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for fire in 0..self.n_fires {
            for base in 0..self.n_bases {
                for drone in 0..self.n_drones {
                    if self.get(fire, base, drone) {
                        out.push((fire, base, drone));
                    }
                }
            }
        }
        out
    }

    /// Number of sorties in the plan.
    pub fn count_assignments(&self) -> usize {
        self.assignments.iter().filter(|&&v| v).count()
    }

    /// The `(fire, base)` tasks flown by one drone.
    pub fn drone_tasks(&self, drone: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for fire in 0..self.n_fires {
            for base in 0..self.n_bases {
                if self.get(fire, base, drone) {
                    out.push((fire, base));
                }
            }
        }
        out
    }

    /// Total round-trip distance flown under this plan.
    pub fn total_travel(&self, instance: &Instance) -> f64 {
        self.triples()
            .iter()
            .fold(0.0, |acc, &(i, j, _)| acc + 2.0 * instance.distances[i][j])
    }

    /// Number of active bases.
    pub fn active_base_count(&self) -> usize {
        self.active_bases.iter().filter(|&&b| b).count()
    }

    /// Marks exactly the bases that have at least one departure as active.
    pub fn activate_used_bases(&mut self) {
        let mut used = vec![false; self.n_bases];
        for &(_, base, _) in &self.triples() {
            used[base] = true;
        }
        self.active_bases = used;
    }

    /// Drones dispatched per fire point (the suppression effort each
    /// fire receives this period).
    pub fn coverage(&self) -> Vec<u32> {
        let mut cover = vec![0u32; self.n_fires];
        for &(fire, _, _) in &self.triples() {
            cover[fire] += 1;
        }
        cover
    }

    /// Expands per-fire coverage into a whole-grid quench plan: each
    /// drone fully extinguishes an even share of its fire's intensity.
    pub fn quench_grid(&self, instance: &Instance, map: &FireMap) -> Vec<u32> {
        let mut quench = vec![0u32; map.width() * map.height()];
        for (i, &count) in self.coverage().iter().enumerate() {
            if count == 0 {
                continue;
            }
            let fp = &instance.fire_points[i];
            quench[map.index(fp.x, fp.y)] = count;
        }
        quench
    }
}

/// The one-period objective: weighted predicted burn cost, base-activation
/// cost, and round-trip travel.
pub fn objective(
    scenario: &Scenario,
    instance: &Instance,
    decision: &Decision,
    predicted_burn_cost: f64,
) -> f64 {
    scenario.weight_burn * predicted_burn_cost
        + scenario.weight_base * decision.active_base_count() as f64
        + scenario.weight_travel * decision.total_travel(instance)
}

/// Why an assignment is not allowed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IneligibleReason {
    /// The base sits inside the safe-distance radius of the fire.
    SafeDistance,
    /// The drone is stationed at a different base.
    WrongHomeBase,
    /// The drone is recharging and cannot fly this period.
    DroneUnavailable,
    /// The base is not active in the plan.
    InactiveBase,
}

/// A deterministic constraint violation found in a plan.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    /// A drone is asked to fly farther than its charge allows.
    BatteryExceeded {
        drone: usize,
        used: f64,
        budget: f64,
    },
    /// An assignment breaks an eligibility rule.
    IneligibleAssignment {
        fire: usize,
        base: usize,
        drone: usize,
        reason: IneligibleReason,
    },
    /// More drones sent to a fire than its intensity justifies.
    CoverageExceeded {
        fire: usize,
        assigned: u32,
        cap: u32,
    },
}

/// Checks every deterministic constraint: per-drone battery budgets,
/// assignment eligibility (safe distance, home base, availability, active
/// base), and per-fire coverage caps. Returns all violations found.
pub fn check_deterministic(
    scenario: &Scenario,
    instance: &Instance,
    decision: &Decision,
) -> Vec<Violation> {
    let mut violations = Vec::new();

    for (fire, base, drone) in decision.triples() {
        if !instance.eligible[fire][base] {
            violations.push(Violation::IneligibleAssignment {
                fire,
                base,
                drone,
                reason: IneligibleReason::SafeDistance,
            });
        }
        if scenario.drones[drone].home_base != base {
            violations.push(Violation::IneligibleAssignment {
                fire,
                base,
                drone,
                reason: IneligibleReason::WrongHomeBase,
            });
        }
        if !instance.available[drone] {
            violations.push(Violation::IneligibleAssignment {
                fire,
                base,
                drone,
                reason: IneligibleReason::DroneUnavailable,
            });
        }
        if !decision.active_bases[base] {
            violations.push(Violation::IneligibleAssignment {
                fire,
                base,
                drone,
                reason: IneligibleReason::InactiveBase,
            });
        }
    }

    for drone in 0..decision.n_drones() {
        let used: f64 = decision
            .drone_tasks(drone)
            .iter()
            .map(|&(i, j)| 2.0 * instance.distances[i][j])
            .sum();
        let budget = instance.battery_budget(scenario, drone);
        if used > budget + 1e-9 {
            violations.push(Violation::BatteryExceeded { drone, used, budget });
        }
    }

    for (fire, &assigned) in decision.coverage().iter().enumerate() {
        let cap = instance.fire_points[fire].drone_cap();
        if assigned > cap {
            violations.push(Violation::CoverageExceeded { fire, assigned, cap });
        }
    }

    violations
}
