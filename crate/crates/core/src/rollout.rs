//! Myopic multi-period rollout controller.
//!
//! Runs a full episode: each period the controller snapshots the fire and
//! the fleet, extracts a one-period instance, asks the configured planner
//! for a dispatch plan, realizes random service times, applies the quench
//! to the true simulator, advances the spread, and rolls the fleet state
//! forward. Fleet dynamics follow the recharge-at-reserve rule (a drone
//! whose projected residual charge would not stay above the reserve
//! threshold swaps to a full battery between periods) and overtime
//! bookkeeping (work beyond the period length spills over and grounds the
//! drone until the backlog drains).
//!
//! The final period of the horizon demands full coverage — every fire
//! point receives its whole drone complement — so a contained fire stays
//! out. When full coverage is unattainable the episode ends uncontained.
//!
//! Everything is deterministic in `(initial map, scenario, model, config)`:
//! per-period random streams are derived functionally from the episode
//! seed, so two planners replaying the same scenario face identical
//! service-time and spread randomness for as long as their fire maps
//! agree.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline_ga::{plan_ga, GaConfig};
use crate::firegrid::{apply_quench, step_spread, FireGridError, FireMap, SpreadConfig};
use crate::model::{
    default_tau_max, extract_instance, Decision, FleetSnapshot, Instance, ModelError, Scenario,
    TimeModel,
};
use crate::predictor::IcnnModel;
use crate::solver::{plan_period, PlanOptions, SolverError};

#[derive(Debug, Error)]
pub enum RolloutError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    FireGrid(#[from] FireGridError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Predictor(#[from] crate::predictor::PredictorError),
}

/// Which planner dispatches the fleet each period.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    /// Exact branch-and-cut with the distributionally robust time rule.
    Ccro,
    /// Exact branch-and-cut with the worst-case (deterministic) time rule.
    Plain,
    /// The genetic-algorithm baseline (robust time rule in its fitness).
    Ga,
}

impl PlannerKind {
    pub fn label(self) -> &'static str {
        match self {
            PlannerKind::Ccro => "mip_ccro",
            PlannerKind::Plain => "mip_plain",
            PlannerKind::Ga => "ga",
        }
    }
}

/// Episode configuration.
#[derive(Clone, Debug)]
pub struct RolloutConfig {
    pub planner: PlannerKind,
    /// Number of decision periods (the last one demands full coverage).
    pub horizon: usize,
    pub seed: u64,
    /// Search parameters for the GA planner (ignored by the exact ones).
    pub ga: GaConfig,
}

/// Multi-period fleet bookkeeping: battery fractions and overtime backlog.
#[derive(Clone, Debug, PartialEq)]
pub struct FleetState {
    /// Battery charge per drone, as a fraction of capacity.
    pub battery: Vec<f64>,
    /// Overtime backlog per drone; a positive backlog grounds the drone
    /// for the next period.
    pub overtime: Vec<f64>,
}

impl FleetState {
    /// A rested fleet: full batteries, no backlog.
    pub fn fresh(n: usize) -> Self {
        FleetState { battery: vec![1.0; n], overtime: vec![0.0; n] }
    }

    /// The availability/battery snapshot the one-period planner sees.
    pub fn snapshot(&self) -> FleetSnapshot {
        FleetSnapshot {
            available: self.overtime.iter().map(|&z| z <= 0.0).collect(),
            battery: self.battery.clone(),
        }
    }

    /// Rolls the fleet forward by one period under a flown plan and the
    /// realized per-fire service times.
    ///
    /// Per drone: the residual charge is the current charge minus the flown
    /// round trips over the full-battery range. If the residual clears the
    /// reserve threshold the drone keeps it; otherwise it swaps to a full
    /// battery between periods. Work time (round-trip flight plus realized
    /// service, summed over the drone's tasks) beyond the period length
    /// accumulates as overtime; an idle period drains the backlog by one
    /// period length. A drone is grounded exactly while its backlog is
    /// positive.
    pub fn advance(
        &mut self,
        scenario: &Scenario,
        instance: &Instance,
        decision: &Decision,
        service: &[f64],
    ) {
        for drone in 0..self.battery.len() {
            let tasks = decision.drone_tasks(drone);
            let mut flown = 0.0;
            let mut work = 0.0;
            for &(fire, base) in &tasks {
                let round_trip = 2.0 * instance.distances[fire][base];
                flown += round_trip;
                work += round_trip / scenario.drone_speed + service[fire];
            }
            let residual = self.battery[drone] - flown / scenario.drones[drone].range;
            // Recharge indicator: 1 exactly when the residual stays above
            // the reserve threshold (the ceiling of a tiny positive number
            // over the penalty constant), else the drone swaps to full.
            let keep = ((residual - scenario.reserve_threshold).max(0.0) / scenario.big_m).ceil();
            self.battery[drone] = keep * residual + (1.0 - keep);
            self.overtime[drone] =
                (self.overtime[drone] + work - scenario.period_length).max(0.0);
        }
    }
}

/// Everything recorded about one period of an episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub period: usize,
    /// Burning cells at planning time: `(x, y, intensity)`.
    pub fires: Vec<(usize, usize, f64)>,
    /// Flown assignments as `(fire index, base index, drone index)`.
    pub assignments: Vec<(usize, usize, usize)>,
    /// Drones dispatched per fire point.
    pub coverage: Vec<u32>,
    /// Drones that flew at least one task.
    pub sorties: usize,
    /// Total round-trip distance flown this period.
    pub travel: f64,
    pub active_bases: usize,
    /// The planner's surrogate burn-cost estimate for its plan.
    pub predicted_burn_cost: f64,
    /// The planner's one-period objective value.
    pub objective: f64,
    /// Whether the coverage requirement of a final period was met
    /// (`true` for every non-final period).
    pub coverage_satisfied: bool,
    /// Realized service time per fire point (drawn whether or not the
    /// fire was served, so planner choices do not shift the stream).
    pub service_times: Vec<f64>,
    pub battery_after: Vec<f64>,
    pub overtime_after: Vec<f64>,
    /// Burning cells after this period's quench and spread.
    pub burning_after: usize,
}

/// How an episode ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// No cell was burning at the end.
    Contained,
    /// Fire survived the horizon (or full terminal coverage was
    /// unattainable).
    Uncontained,
}

impl Termination {
    pub fn label(self) -> &'static str {
        match self {
            Termination::Contained => "contained",
            Termination::Uncontained => "uncontained",
        }
    }
}

/// A finished episode.
#[derive(Clone, Debug)]
pub struct Episode {
    pub planner: PlannerKind,
    pub seed: u64,
    pub periods: Vec<PeriodRecord>,
    /// Map states: the initial map, then one entry per period (after that
    /// period's quench and spread).
    pub maps: Vec<FireMap>,
    /// Total movement: round-trip distance summed over the episode.
    pub moves: f64,
    /// Periods with at least one assignment.
    pub rounds: usize,
    /// Cumulative realized burn cost: burning-cell count after each
    /// period, summed.
    pub burn_cost: f64,
    pub termination: Termination,
}

/// SplitMix64 finalizer: derives independent per-period streams from the
/// episode seed without consuming a shared generator.
fn mix(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws a service time from the lognormal with the given mean and
/// variance (moment matching on the log scale).
fn sample_service(mean: f64, variance: f64, rng: &mut ChaCha8Rng) -> f64 {
    if variance <= 0.0 {
        return mean;
    }
    let sigma2 = (1.0 + variance / (mean * mean)).ln();
    let mu = mean.ln() - 0.5 * sigma2;
    LogNormal::new(mu, sigma2.sqrt())
        .expect("moment-matched lognormal parameters are finite")
        .sample(rng)
}

/// One period's plan: what to fly, what the planner claims, and whether a
/// final period's coverage demand was met.
struct PeriodPlan {
    decision: Decision,
    predicted_burn_cost: f64,
    objective: f64,
    coverage_satisfied: bool,
}

fn plan_one_period(
    map: &FireMap,
    scenario: &Scenario,
    instance: &Instance,
    sq: &IcnnModel,
    config: &RolloutConfig,
    period: usize,
    terminal: bool,
) -> Result<PeriodPlan, RolloutError> {
    let exact_options = |time_model| PlanOptions { time_model, terminal_coverage: terminal };
    match config.planner {
        PlannerKind::Ccro => {
            let out = plan_period(map, scenario, instance, sq, &exact_options(TimeModel::Robust))?;
            Ok(PeriodPlan {
                decision: out.decision,
                predicted_burn_cost: out.predicted_burn_cost,
                objective: out.objective,
                coverage_satisfied: out.coverage_satisfied,
            })
        }
        PlannerKind::Plain => {
            let time_model = TimeModel::WorstCase { tau_max: default_tau_max(instance) };
            let out = plan_period(map, scenario, instance, sq, &exact_options(time_model))?;
            Ok(PeriodPlan {
                decision: out.decision,
                predicted_burn_cost: out.predicted_burn_cost,
                objective: out.objective,
                coverage_satisfied: out.coverage_satisfied,
            })
        }
        PlannerKind::Ga => {
            let options = exact_options(TimeModel::Robust);
            let seed = mix(config.seed, 2 * period as u64 + 1);
            let out = plan_ga(map, scenario, instance, sq, &options, &config.ga, seed)?;
            if out.feasible {
                return Ok(PeriodPlan {
                    decision: out.decision,
                    predicted_burn_cost: out.predicted_burn_cost,
                    objective: out.objective,
                    coverage_satisfied: true,
                });
            }
            // The GA's best plan breaks a hard constraint, so it cannot be
            // flown. In a final period, retry without the coverage demand;
            // otherwise (and if the retry is also infeasible) stand down.
            let fallback = if terminal {
                let relaxed = PlanOptions { terminal_coverage: false, ..options };
                Some(plan_ga(map, scenario, instance, sq, &relaxed, &config.ga, mix(seed, 1))?)
                    .filter(|out| out.feasible)
            } else {
                None
            };
            match fallback {
                Some(out) => Ok(PeriodPlan {
                    decision: out.decision,
                    predicted_burn_cost: out.predicted_burn_cost,
                    objective: out.objective,
                    coverage_satisfied: false,
                }),
                None => {
                    let decision = Decision::empty_for(instance);
                    let cost = sq.predict(&map.cell_codes(), None)?.cost;
                    Ok(PeriodPlan {
                        decision,
                        predicted_burn_cost: cost,
                        objective: scenario.weight_burn * cost,
                        coverage_satisfied: !terminal,
                    })
                }
            }
        }
    }
}

/// Runs one episode from the given initial map.
pub fn run_episode(
    initial: &FireMap,
    scenario: &Scenario,
    sq: &IcnnModel,
    config: &RolloutConfig,
) -> Result<Episode, RolloutError> {
    let spread_config = SpreadConfig::default();
    let mut fleet = FleetState::fresh(scenario.drones.len());
    let mut map = initial.clone();
    let mut maps = vec![map.clone()];
    let mut periods: Vec<PeriodRecord> = Vec::new();
    let mut moves = 0.0;
    let mut rounds = 0;
    let mut burn_total = 0.0;

    for period in 0..config.horizon {
        if map.burning_count() == 0 {
            break;
        }
        let terminal = period + 1 == config.horizon;
        let instance = extract_instance(&map, scenario, &fleet.snapshot())?;
        let plan = plan_one_period(&map, scenario, &instance, sq, config, period, terminal)?;

        // Per-period randomness, derived functionally from the episode
        // seed: one service time per fire point, then the spread seed.
        let mut period_rng = ChaCha8Rng::seed_from_u64(mix(config.seed, 2 * period as u64));
        let service: Vec<f64> = (0..instance.n_fires())
            .map(|i| {
                sample_service(
                    instance.service_mean[i],
                    instance.service_cov[(i, i)],
                    &mut period_rng,
                )
            })
            .collect();
        let spread_seed = period_rng.gen::<u64>();

        fleet.advance(scenario, &instance, &plan.decision, &service);
        let quenched = apply_quench(&map, &plan.decision.quench_grid(&instance, &map))?;
        map = step_spread(&quenched, &scenario.weather, &spread_config, spread_seed);
        maps.push(map.clone());

        let travel = plan.decision.total_travel(&instance);
        let assignments = plan.decision.triples();
        let sorties = (0..scenario.drones.len())
            .filter(|&l| !plan.decision.drone_tasks(l).is_empty())
            .count();
        moves += travel;
        if !assignments.is_empty() {
            rounds += 1;
        }
        let burning_after = map.burning_count();
        burn_total += burning_after as f64;
        periods.push(PeriodRecord {
            period,
            fires: instance.fire_points.iter().map(|fp| (fp.x, fp.y, fp.intensity)).collect(),
            assignments,
            coverage: plan.decision.coverage(),
            sorties,
            travel,
            active_bases: plan.decision.active_base_count(),
            predicted_burn_cost: plan.predicted_burn_cost,
            objective: plan.objective,
            coverage_satisfied: plan.coverage_satisfied,
            service_times: service,
            battery_after: fleet.battery.clone(),
            overtime_after: fleet.overtime.clone(),
            burning_after,
        });
    }

    let termination = if map.burning_count() == 0 {
        Termination::Contained
    } else {
        Termination::Uncontained
    };
    Ok(Episode {
        planner: config.planner,
        seed: config.seed,
        periods,
        maps,
        moves,
        rounds,
        burn_cost: burn_total,
        termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::testutil::{small_map, small_scenario, small_sq_model};

    fn quick_ga() -> GaConfig {
        GaConfig { population: 24, generations: 25, ..Default::default() }
    }

    fn config(planner: PlannerKind, horizon: usize, seed: u64) -> RolloutConfig {
        RolloutConfig { planner, horizon, seed, ga: quick_ga() }
    }

    #[test]
    fn battery_floor_holds_in_every_period() {
        let scenario = small_scenario();
        for seed in 0..6 {
            let map = small_map(&[(1, 1, 1.7), (3, 2, 0.9)]);
            let episode = run_episode(
                &map,
                &scenario,
                small_sq_model(),
                &config(PlannerKind::Ccro, 4, seed),
            )
            .unwrap();
            for record in &episode.periods {
                for (&u, &z) in record.battery_after.iter().zip(&record.overtime_after) {
                    assert!(
                        u == 1.0 || u > scenario.reserve_threshold,
                        "seed {seed}: battery {u} dipped to the reserve"
                    );
                    assert!(u <= 1.0 && z >= 0.0);
                }
            }
        }
    }

    #[test]
    fn overtime_bookkeeping_matches_a_recomputation() {
        let scenario = small_scenario();
        let map = small_map(&[(0, 1, 2.3), (2, 3, 1.4), (4, 0, 0.8)]);
        let episode = run_episode(
            &map,
            &scenario,
            small_sq_model(),
            &config(PlannerKind::Ccro, 5, 31),
        )
        .unwrap();
        let n = scenario.drones.len();
        let mut zeta = vec![0.0f64; n];
        for record in &episode.periods {
            for drone in 0..n {
                let mut work = 0.0;
                for &(fire, base, d) in &record.assignments {
                    if d != drone {
                        continue;
                    }
                    let (fx, fy, _) = record.fires[fire];
                    let (bx, by) = scenario.bases[base];
                    let dist = ((fx as f64 - bx).powi(2) + (fy as f64 - by).powi(2)).sqrt();
                    work += 2.0 * dist / scenario.drone_speed + record.service_times[fire];
                }
                zeta[drone] = (zeta[drone] + work - scenario.period_length).max(0.0);
                assert!(
                    (zeta[drone] - record.overtime_after[drone]).abs() <= 1e-9,
                    "period {} drone {drone}: recomputed {} vs recorded {}",
                    record.period,
                    zeta[drone],
                    record.overtime_after[drone]
                );
            }
        }
    }

    #[test]
    fn totals_match_their_per_period_sums() {
        let scenario = small_scenario();
        let map = small_map(&[(2, 2, 1.2), (1, 3, 0.7)]);
        let episode = run_episode(
            &map,
            &scenario,
            small_sq_model(),
            &config(PlannerKind::Ccro, 6, 8),
        )
        .unwrap();
        let travel: f64 = episode.periods.iter().map(|p| p.travel).sum();
        let burn: f64 = episode.periods.iter().map(|p| p.burning_after as f64).sum();
        let rounds = episode.periods.iter().filter(|p| !p.assignments.is_empty()).count();
        assert!((episode.moves - travel).abs() <= 1e-12);
        assert!((episode.burn_cost - burn).abs() <= 1e-12);
        assert_eq!(episode.rounds, rounds);
        assert_eq!(episode.maps.len(), episode.periods.len() + 1);
    }

    #[test]
    fn terminal_period_contains_an_attainable_fire() {
        let scenario = small_scenario();
        let map = small_map(&[(2, 2, 0.9)]);
        let episode = run_episode(
            &map,
            &scenario,
            small_sq_model(),
            &config(PlannerKind::Ccro, 1, 3),
        )
        .unwrap();
        assert_eq!(episode.termination, Termination::Contained);
        assert_eq!(episode.periods.len(), 1);
        assert!(episode.periods[0].coverage_satisfied);
        assert_eq!(episode.periods[0].coverage, vec![1]);
        assert_eq!(episode.periods[0].burning_after, 0);
    }

    #[test]
    fn stops_early_once_contained() {
        let scenario = small_scenario();
        let map = small_map(&[(2, 2, 0.9)]);
        let episode = run_episode(
            &map,
            &scenario,
            small_sq_model(),
            &config(PlannerKind::Ccro, 8, 3),
        )
        .unwrap();
        if episode.termination == Termination::Contained {
            let last = episode.periods.last().unwrap();
            assert_eq!(last.burning_after, 0);
            assert!(episode.periods.len() <= 8);
        }
    }

    #[test]
    fn overwhelmed_fleet_ends_uncontained() {
        let mut scenario = small_scenario();
        scenario.drones.truncate(1);
        scenario.bases.truncate(1);
        let map = small_map(&[(0, 0, 3.0), (2, 2, 3.0), (4, 4, 3.0)]);
        let episode = run_episode(
            &map,
            &scenario,
            small_sq_model(),
            &config(PlannerKind::Ccro, 2, 12),
        )
        .unwrap();
        assert_eq!(episode.termination, Termination::Uncontained);
        assert!(!episode.periods.last().unwrap().coverage_satisfied);
    }

    #[test]
    fn ga_episode_is_deterministic_and_lawful() {
        let scenario = small_scenario();
        let map = small_map(&[(1, 2, 1.6), (3, 1, 1.0)]);
        let a = run_episode(
            &map,
            &scenario,
            small_sq_model(),
            &config(PlannerKind::Ga, 3, 77),
        )
        .unwrap();
        let b = run_episode(
            &map,
            &scenario,
            small_sq_model(),
            &config(PlannerKind::Ga, 3, 77),
        )
        .unwrap();
        assert_eq!(a.periods, b.periods);
        for record in &a.periods {
            for (fire, &count) in record.coverage.iter().enumerate() {
                let cap = record.fires[fire].2.ceil() as u32;
                assert!(count <= cap, "GA plan exceeds a coverage cap");
            }
            for &u in &record.battery_after {
                assert!(u == 1.0 || u > scenario.reserve_threshold);
            }
        }
    }

    #[test]
    fn plain_planner_runs_the_same_scenario() {
        let scenario = small_scenario();
        let map = small_map(&[(1, 2, 1.6), (3, 1, 1.0)]);
        let episode = run_episode(
            &map,
            &scenario,
            small_sq_model(),
            &config(PlannerKind::Plain, 3, 77),
        )
        .unwrap();
        assert!(!episode.periods.is_empty());
        for record in &episode.periods {
            assert!(record.travel >= 0.0);
        }
    }

    #[test]
    fn no_fire_means_an_empty_contained_episode() {
        let scenario = small_scenario();
        let map = small_map(&[]);
        let episode = run_episode(
            &map,
            &scenario,
            small_sq_model(),
            &config(PlannerKind::Ccro, 4, 1),
        )
        .unwrap();
        assert_eq!(episode.termination, Termination::Contained);
        assert!(episode.periods.is_empty());
        assert_eq!(episode.rounds, 0);
        assert_eq!(episode.moves, 0.0);
    }
}
