//! Genetic-algorithm dispatch baseline.
//!
//! Plans a single period from the same data and with the same objective and
//! feasibility rules as [`crate::solver`], but searches assignment space
//! with a penalized genetic algorithm instead of exact branch-and-cut. Hard
//! constraints (battery budgets, coverage caps, the period-time rule) enter
//! the fitness as squared penalties; eligibility is enforced structurally by
//! only giving the genome loci for assignments that could ever be legal.
//!
//! The GA carries no optimality or feasibility guarantee. It exists as the
//! comparison planner the multi-period benchmarks measure the exact
//! pipeline against.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::firegrid::FireMap;
use crate::model::{
    objective, plain_time_used, robust_completion_bound, Decision, Instance, Scenario, TimeModel,
};
use crate::predictor::{IcnnModel, PredictorKind};
use crate::solver::{PlanOptions, SolverError};

/// Search parameters. `Default` is the configuration every bundled
/// benchmark uses.
#[derive(Clone, Copy, Debug)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    /// Tournament size for parent selection.
    pub tournament: usize,
    /// Probability that a child is produced by uniform crossover
    /// (otherwise the first parent is cloned before mutation).
    pub crossover_rate: f64,
    /// Per-gene flip probability applied to every child.
    pub mutation_rate: f64,
    /// Best individuals carried over unchanged each generation.
    pub elitism: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 60,
            generations: 120,
            tournament: 3,
            crossover_rate: 0.8,
            mutation_rate: 0.05,
            elitism: 1,
        }
    }
}

/// The best plan the GA found.
#[derive(Clone, Debug)]
pub struct GaOutcome {
    pub decision: Decision,
    /// Penalized fitness of the winner; equals `objective` when `feasible`.
    pub fitness: f64,
    /// The same objective the exact planner reports (weighted predicted
    /// burn cost + active bases + travel).
    pub objective: f64,
    pub predicted_burn_cost: f64,
    /// Whether the winner satisfies every hard constraint (including full
    /// coverage when `terminal_coverage` was requested).
    pub feasible: bool,
}

/// One genome locus: a fire-drone pair that could legally be assigned
/// (drone available, home base outside the safe radius, round trip within
/// even a full battery).
#[derive(Clone, Copy)]
struct Locus {
    fire: usize,
    base: usize,
    drone: usize,
}

struct Evaluator<'a> {
    scenario: &'a Scenario,
    instance: &'a Instance,
    sq: &'a IcnnModel,
    map_codes: Vec<u8>,
    fire_cells: Vec<usize>,
    loci: Vec<Locus>,
    options: PlanOptions,
    /// Squared-violation multiplier; large against the objective scale.
    penalty: f64,
    use_cost: bool,
    cost_cache: HashMap<Vec<u32>, f64>,
}

struct Scored {
    genome: Vec<bool>,
    fitness: f64,
}

impl<'a> Evaluator<'a> {
    fn new(
        map: &FireMap,
        scenario: &'a Scenario,
        instance: &'a Instance,
        sq: &'a IcnnModel,
        options: &PlanOptions,
    ) -> Result<Self, SolverError> {
        if sq.kind() != PredictorKind::SpreadQuench {
            return Err(SolverError::PredictorMismatch(
                "the planner needs a spread+quench surrogate, got a spread-only model".into(),
            ));
        }
        if sq.width() != map.width() || sq.height() != map.height() {
            return Err(SolverError::PredictorMismatch(format!(
                "surrogate is {}x{} but the map is {}x{}",
                sq.width(),
                sq.height(),
                map.width(),
                map.height()
            )));
        }
        let mut loci = Vec::new();
        for fire in 0..instance.n_fires() {
            for drone in 0..instance.n_drones {
                let base = scenario.drones[drone].home_base;
                if !instance.available[drone] || !instance.eligible[fire][base] {
                    continue;
                }
                if 2.0 * instance.distances[fire][base] > instance.battery_budget(scenario, drone)
                {
                    continue;
                }
                loci.push(Locus { fire, base, drone });
            }
        }
        let fire_cells = instance
            .fire_points
            .iter()
            .map(|fp| fp.y * scenario.grid_width + fp.x)
            .collect();
        let penalty =
            1e3 * (scenario.weight_burn + scenario.weight_base + scenario.weight_travel);
        Ok(Evaluator {
            scenario,
            instance,
            sq,
            map_codes: map.cell_codes(),
            fire_cells,
            loci,
            options: *options,
            penalty,
            use_cost: scenario.weight_burn > 0.0,
            cost_cache: HashMap::new(),
        })
    }

    fn decode(&self, genome: &[bool]) -> Decision {
        let mut decision = Decision::empty_for(self.instance);
        for (locus, &on) in self.loci.iter().zip(genome) {
            if on {
                decision.set(locus.fire, locus.base, locus.drone, true);
            }
        }
        decision.activate_used_bases();
        decision
    }

    fn predicted_cost(&mut self, coverage: &[u32]) -> Result<f64, SolverError> {
        if !self.use_cost {
            return Ok(0.0);
        }
        if let Some(&hit) = self.cost_cache.get(coverage) {
            return Ok(hit);
        }
        let mut quench = vec![0.0; self.sq.cells()];
        for (i, &c) in coverage.iter().enumerate() {
            quench[self.fire_cells[i]] = f64::from(c);
        }
        let cost = self.sq.predict(&self.map_codes, Some(&quench))?.cost;
        self.cost_cache.insert(coverage.to_vec(), cost);
        Ok(cost)
    }

    /// Sum of squared hard-constraint violations of a decoded plan.
    fn violation(&self, decision: &Decision) -> f64 {
        let mut total = 0.0;

        for drone in 0..self.instance.n_drones {
            let tasks = decision.drone_tasks(drone);
            if tasks.is_empty() {
                continue;
            }
            let flown: f64 = tasks
                .iter()
                .map(|&(i, j)| 2.0 * self.instance.distances[i][j])
                .sum();
            let battery_excess = flown - self.instance.battery_budget(self.scenario, drone);
            if battery_excess > 0.0 {
                total += battery_excess * battery_excess;
            }
            let time_excess = match self.options.time_model {
                TimeModel::Robust => {
                    robust_completion_bound(self.instance, self.scenario, &tasks)
                        - self.scenario.period_length
                }
                TimeModel::WorstCase { tau_max } => {
                    plain_time_used(self.instance, self.scenario, &tasks, tau_max)
                        - self.scenario.period_length
                }
            };
            if time_excess > 0.0 {
                total += time_excess * time_excess;
            }
        }

        for (fire, &count) in decision.coverage().iter().enumerate() {
            let cap = self.instance.fire_points[fire].drone_cap();
            let gap = if self.options.terminal_coverage {
                f64::from(count) - f64::from(cap)
            } else {
                (f64::from(count) - f64::from(cap)).max(0.0)
            };
            if gap != 0.0 {
                total += gap * gap;
            }
        }

        total
    }

    fn score(&mut self, genome: &[bool]) -> Result<(f64, f64, f64, bool), SolverError> {
        let decision = self.decode(genome);
        let cost = self.predicted_cost(&decision.coverage())?;
        let value = objective(self.scenario, self.instance, &decision, cost);
        let violation = self.violation(&decision);
        let fitness = value + self.penalty * violation;
        Ok((fitness, value, cost, violation == 0.0))
    }
}

fn tournament_pick<'p>(
    population: &'p [Scored],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> &'p [bool] {
    let mut best: Option<&Scored> = None;
    for _ in 0..k.max(1) {
        let contender = &population[rng.gen_range(0..population.len())];
        best = match best {
            Some(b) if b.fitness <= contender.fitness => Some(b),
            _ => Some(contender),
        };
    }
    &best.expect("population is never empty").genome
}

/// Runs the GA and returns its best plan. Deterministic in
/// `(map, scenario, instance, model, options, config, seed)`.
pub fn plan_ga(
    map: &FireMap,
    scenario: &Scenario,
    instance: &Instance,
    sq: &IcnnModel,
    options: &PlanOptions,
    config: &GaConfig,
    seed: u64,
) -> Result<GaOutcome, SolverError> {
    let mut eval = Evaluator::new(map, scenario, instance, sq, options)?;
    let n_genes = eval.loci.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let finish = |eval: &mut Evaluator, genome: &[bool]| -> Result<GaOutcome, SolverError> {
        let decision = eval.decode(genome);
        let (fitness, value, cost, feasible) = eval.score(genome)?;
        Ok(GaOutcome {
            decision,
            fitness,
            objective: value,
            predicted_burn_cost: cost,
            feasible,
        })
    };

    if n_genes == 0 {
        return finish(&mut eval, &[]);
    }

    // Initial population: one empty plan (feasible whenever coverage is not
    // forced) plus random plans of varying density.
    let pop_size = config.population.max(2);
    let mut population = Vec::with_capacity(pop_size);
    let mut genomes = vec![vec![false; n_genes]];
    while genomes.len() < pop_size {
        let density = if options.terminal_coverage {
            rng.gen_range(0.2..0.8)
        } else {
            rng.gen_range(0.05..0.5)
        };
        genomes.push((0..n_genes).map(|_| rng.gen_bool(density)).collect());
    }
    for genome in genomes {
        let (fitness, ..) = eval.score(&genome)?;
        population.push(Scored { genome, fitness });
    }

    let better = |a: &Scored, b: &Scored| {
        a.fitness
            .partial_cmp(&b.fitness)
            .expect("fitness is never NaN")
    };

    for _ in 0..config.generations {
        population.sort_by(better);
        let mut next: Vec<Scored> = population
            .drain(..config.elitism.min(pop_size))
            .collect();
        while next.len() < pop_size {
            let mut child: Vec<bool> = if rng.gen_bool(config.crossover_rate) {
                let a = tournament_pick(&population, config.tournament, &mut rng);
                let b = tournament_pick(&population, config.tournament, &mut rng);
                a.iter()
                    .zip(b)
                    .map(|(&ga, &gb)| if rng.gen_bool(0.5) { ga } else { gb })
                    .collect()
            } else {
                tournament_pick(&population, config.tournament, &mut rng).to_vec()
            };
            for gene in child.iter_mut() {
                if rng.gen_bool(config.mutation_rate) {
                    *gene = !*gene;
                }
            }
            let (fitness, ..) = eval.score(&child)?;
            next.push(Scored { genome: child, fitness });
        }
        population = next;
    }

    population.sort_by(better);
    let winner = population[0].genome.clone();
    finish(&mut eval, &winner)
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::model::{check_deterministic, extract_instance, FleetSnapshot};
    use crate::solver::enumerate_exact;
    use crate::testutil::{small_map, small_scenario, small_sq_model};

    #[test]
    fn finds_the_exact_optimum_on_a_single_fire() {
        let scenario = small_scenario();
        let map = small_map(&[(2, 2, 1.5)]);
        let instance = extract_instance(&map, &scenario, &FleetSnapshot::fresh(2)).unwrap();
        let options = PlanOptions::default();
        let ga = plan_ga(
            &map,
            &scenario,
            &instance,
            small_sq_model(),
            &options,
            &GaConfig::default(),
            11,
        )
        .unwrap();
        let exact =
            enumerate_exact(&map, &scenario, &instance, small_sq_model(), &options).unwrap();
        assert!(ga.feasible);
        assert!(
            (ga.objective - exact.objective).abs() <= 1e-9,
            "ga {} vs exact {}",
            ga.objective,
            exact.objective
        );
    }

    #[test]
    fn winner_is_feasible_and_deterministic() {
        let scenario = small_scenario();
        let map = small_map(&[(1, 1, 2.2), (3, 3, 1.0)]);
        let instance = extract_instance(&map, &scenario, &FleetSnapshot::fresh(2)).unwrap();
        let options = PlanOptions::default();
        let a = plan_ga(
            &map,
            &scenario,
            &instance,
            small_sq_model(),
            &options,
            &GaConfig::default(),
            5,
        )
        .unwrap();
        let b = plan_ga(
            &map,
            &scenario,
            &instance,
            small_sq_model(),
            &options,
            &GaConfig::default(),
            5,
        )
        .unwrap();
        assert_eq!(a.decision, b.decision);
        assert_eq!(a.fitness.to_bits(), b.fitness.to_bits());
        assert!(a.feasible);
        assert!(check_deterministic(&scenario, &instance, &a.decision).is_empty());
    }

    #[test]
    fn never_beats_the_exact_planner() {
        let scenario = small_scenario();
        for (seed, fires) in [
            (1u64, vec![(0usize, 0usize, 1.0f64)]),
            (2, vec![(2, 2, 2.4), (4, 4, 0.7)]),
            (3, vec![(1, 3, 1.8), (3, 1, 1.2), (2, 0, 0.5)]),
        ] {
            let map = small_map(&fires);
            let instance =
                extract_instance(&map, &scenario, &FleetSnapshot::fresh(2)).unwrap();
            let options = PlanOptions::default();
            let ga = plan_ga(
                &map,
                &scenario,
                &instance,
                small_sq_model(),
                &options,
                &GaConfig::default(),
                seed,
            )
            .unwrap();
            let exact =
                enumerate_exact(&map, &scenario, &instance, small_sq_model(), &options)
                    .unwrap();
            assert!(
                ga.objective >= exact.objective - 1e-9,
                "seed {seed}: GA {} undercuts exact {}",
                ga.objective,
                exact.objective
            );
            if ga.feasible {
                assert!(check_deterministic(&scenario, &instance, &ga.decision).is_empty());
            }
        }
    }

    #[test]
    fn empty_instance_returns_an_empty_plan() {
        let scenario = small_scenario();
        let map = small_map(&[]);
        let instance = extract_instance(&map, &scenario, &FleetSnapshot::fresh(2)).unwrap();
        let ga = plan_ga(
            &map,
            &scenario,
            &instance,
            small_sq_model(),
            &PlanOptions::default(),
            &GaConfig::default(),
            0,
        )
        .unwrap();
        assert_eq!(ga.decision.count_assignments(), 0);
        assert!(ga.feasible);
    }

    #[test]
    fn terminal_mode_pushes_toward_full_coverage() {
        let scenario = small_scenario();
        let map = small_map(&[(2, 2, 1.9)]);
        let instance = extract_instance(&map, &scenario, &FleetSnapshot::fresh(2)).unwrap();
        let options = PlanOptions { terminal_coverage: true, ..Default::default() };
        let ga = plan_ga(
            &map,
            &scenario,
            &instance,
            small_sq_model(),
            &options,
            &GaConfig::default(),
            21,
        )
        .unwrap();
        assert!(ga.feasible, "full coverage is attainable here");
        assert_eq!(ga.decision.coverage(), vec![2]);
    }
}
