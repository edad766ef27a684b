//! One-period dispatch optimization.
//!
//! The period problem — which bases to activate and which drone flies to
//! which fire — is solved exactly by a two-level decomposition:
//!
//! * An outer **activation search** over base subsets (logic-based
//!   Benders with implicit enumeration, practical because the number of
//!   bases is small). Optimality cuts exploit that opening more bases
//!   never hurts the dispatch value, so a solved subset lower-bounds all
//!   of its subsets.
//! * An inner **branch-and-cut** over drone-to-fire assignments. The LP
//!   relaxation (solved with the dense simplex in [`lp`]) carries the
//!   linear dispatch rows; the two nonlinear ingredients enter as
//!   outer-approximation cuts:
//!   - the convex surrogate burn cost through epigraph cuts from its
//!     value/subgradient oracle, and
//!   - the robust period-time constraint through linearizations of its
//!     second-order-cone form (the quadratic reformulation row is
//!     indefinite, but the feasible set is a cone section and therefore
//!     admits globally valid gradient cuts).
//!   Integer candidates are always re-checked against the exact
//!   probabilistic oracle; when a linearized cut cannot separate a bad
//!   candidate, an exact no-good cut on its assignment pattern does.
//!
//! [`enumerate_exact`] solves the same problem by brute force over all
//! assignment subsets. It shares only the feasibility oracles with the
//! planner and exists as the ground truth the optimizer is tested
//! against.

pub mod lp;

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::firegrid::FireMap;
use crate::model::{
    cantelli_feasible, plain_time_feasible, tie_rule_pick, Decision, Instance, ModelError,
    Scenario, TimeModel,
};
use crate::predictor::{IcnnModel, PredictorError, PredictorKind};

use lp::{Constraint, LinearProgram, LpStatus, Relation};

/// Hard limits keeping the exact searches inside sane budgets.
const MAX_BASES: usize = 12;
const MAX_ENUM_TRIPLES: usize = 24;
const MAX_NODES: usize = 100_000;
/// Pop the best-bound node instead of the deepest every this many nodes.
const BEST_BOUND_STRIDE: usize = 64;
/// Integrality tolerance on LP values.
const INT_TOL: f64 = 1e-6;
/// Feasibility slack for oracle re-checks.
const ORACLE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("simplex hit its iteration limit")]
    SimplexStall,
    #[error("branch-and-cut exceeded {0} nodes")]
    NodeLimit(usize),
    #[error("{got} bases exceed the activation-search limit of {limit}")]
    TooManyBases { got: usize, limit: usize },
    #[error("{got} assignment triples exceed the enumeration limit of {limit}")]
    EnumerationTooLarge { got: usize, limit: usize },
    #[error("planner/predictor mismatch: {0}")]
    PredictorMismatch(String),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Planner configuration for one period.
#[derive(Clone, Copy, Debug)]
pub struct PlanOptions {
    /// How per-drone period-time feasibility is judged.
    pub time_model: TimeModel,
    /// Require every fire point to receive its full drone complement
    /// (used in the final period of an episode).
    pub terminal_coverage: bool,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions {
            time_model: TimeModel::Robust,
            terminal_coverage: false,
        }
    }
}

/// Work counters from one `plan_period` call.
#[derive(Clone, Copy, Debug, Default)]
pub struct SolveStats {
    pub master_iterations: usize,
    pub subproblems: usize,
    pub nodes: usize,
    pub lp_solves: usize,
    pub oa_cuts: usize,
    pub nogood_cuts: usize,
}

/// An optimal one-period plan.
#[derive(Clone, Debug)]
pub struct PlanOutcome {
    pub decision: Decision,
    /// Full objective: weighted predicted burn cost + active bases +
    /// travel.
    pub objective: f64,
    /// Surrogate burn cost at the chosen coverage.
    pub predicted_burn_cost: f64,
    /// In terminal mode, whether full coverage was attainable; the
    /// returned plan falls back to the ordinary problem when it was not.
    pub coverage_satisfied: bool,
    pub stats: SolveStats,
}

// ---------------------------------------------------------------------------
// Shared per-call context
// ---------------------------------------------------------------------------

struct EtaCut {
    /// Coverage point the cut was generated at (per fire, as f64).
    at: Vec<f64>,
    value: f64,
    /// Subgradient per fire point.
    grad: Vec<f64>,
}

struct PlanContext<'a> {
    scenario: &'a Scenario,
    instance: &'a Instance,
    sq: &'a IcnnModel,
    map_codes: Vec<u8>,
    fire_cells: Vec<usize>,
    time_model: TimeModel,
    terminal: bool,
    /// Whether the burn-cost term participates in the objective.
    use_cost: bool,
    /// Entrywise-nonnegative covariance permits superset no-good cuts
    /// for the robust oracle.
    cov_nonneg: bool,
    cost_cache: HashMap<Vec<u32>, (f64, Vec<f64>)>,
    eta_cuts: Vec<EtaCut>,
    eta_cut_keys: HashSet<Vec<u32>>,
    stats: SolveStats,
}

impl<'a> PlanContext<'a> {
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
        let fire_cells = instance
            .fire_points
            .iter()
            .map(|fp| fp.y * scenario.grid_width + fp.x)
            .collect();
        let cov_nonneg = instance.service_cov.iter().all(|&v| v >= -1e-12);
        Ok(PlanContext {
            scenario,
            instance,
            sq,
            map_codes: map.cell_codes(),
            fire_cells,
            time_model: options.time_model,
            terminal: options.terminal_coverage,
            use_cost: scenario.weight_burn > 0.0,
            cov_nonneg,
            cost_cache: HashMap::new(),
            eta_cuts: Vec::new(),
            eta_cut_keys: HashSet::new(),
            stats: SolveStats::default(),
        })
    }

    /// Surrogate burn cost and its per-fire subgradient at a coverage
    /// vector (drones dispatched to each fire point), memoized.
    fn cost(&mut self, coverage: &[u32]) -> Result<(f64, Vec<f64>), SolverError> {
        if let Some(hit) = self.cost_cache.get(coverage) {
            return Ok(hit.clone());
        }
        let mut quench = vec![0.0; self.sq.cells()];
        for (i, &c) in coverage.iter().enumerate() {
            quench[self.fire_cells[i]] = c as f64;
        }
        let (value, grad_cells) = self.sq.cost_and_subgradient(&self.map_codes, &quench)?;
        let grad = self.fire_cells.iter().map(|&c| grad_cells[c]).collect::<Vec<_>>();
        self.cost_cache
            .insert(coverage.to_vec(), (value, grad.clone()));
        Ok((value, grad))
    }

    /// Registers an epigraph cut for the burn cost at a coverage point
    /// (once per distinct point). Returns whether it was new.
    fn add_eta_cut(&mut self, coverage: &[u32], value: f64, grad: &[f64]) -> bool {
        if !self.eta_cut_keys.insert(coverage.to_vec()) {
            return false;
        }
        self.eta_cuts.push(EtaCut {
            at: coverage.iter().map(|&c| c as f64).collect(),
            value,
            grad: grad.to_vec(),
        });
        self.stats.oa_cuts += 1;
        true
    }

    /// Exact per-drone time feasibility for a task set.
    fn time_feasible(&self, tasks: &[(usize, usize)]) -> bool {
        match self.time_model {
            TimeModel::Robust => {
                cantelli_feasible(self.instance, self.scenario, tasks, ORACLE_TOL)
            }
            TimeModel::WorstCase { tau_max } => {
                plain_time_feasible(self.instance, self.scenario, tasks, tau_max, ORACLE_TOL)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Dispatch subproblem: branch-and-cut for a fixed base activation
// ---------------------------------------------------------------------------

#[derive(Clone, Copy)]
struct Pair {
    fire: usize,
    drone: usize,
    base: usize,
    dist: f64,
}

struct SubOutcome {
    /// Dispatch value: weighted predicted burn cost + travel (no base
    /// activation term).
    value: f64,
    predicted_burn_cost: f64,
    assigned: Vec<(usize, usize, usize)>,
    /// False only in terminal mode when full coverage is unattainable.
    feasible: bool,
}

struct Node {
    /// `(x-variable index, forced value)` fixings along this branch.
    fixings: Vec<(usize, u8)>,
    bound: f64,
}

fn solve_subproblem(ctx: &mut PlanContext, mask: u32) -> Result<SubOutcome, SolverError> {
    ctx.stats.subproblems += 1;
    let instance = ctx.instance;
    let scenario = ctx.scenario;
    let n_fires = instance.n_fires();

    // Usable (fire, drone) pairs under this activation.
    let mut pairs: Vec<Pair> = Vec::new();
    for (l, spec) in scenario.drones.iter().enumerate() {
        let home = spec.home_base;
        if mask & (1 << home) == 0 || !instance.available[l] {
            continue;
        }
        let budget = instance.battery_budget(scenario, l);
        for i in 0..n_fires {
            if !instance.eligible[i][home] {
                continue;
            }
            let dist = instance.distances[i][home];
            if 2.0 * dist > budget + ORACLE_TOL {
                continue;
            }
            // A pair whose single-task workload already violates the
            // period is unusable whenever feasibility is antitone in the
            // task set (always for the worst-case model; for the robust
            // model when the covariance is entrywise non-negative).
            let antitone = matches!(ctx.time_model, TimeModel::WorstCase { .. }) || ctx.cov_nonneg;
            if antitone && !ctx.time_feasible(&[(i, home)]) {
                continue;
            }
            pairs.push(Pair { fire: i, drone: l, base: home, dist });
        }
    }

    let infeasible = SubOutcome {
        value: f64::INFINITY,
        predicted_burn_cost: 0.0,
        assigned: Vec::new(),
        feasible: false,
    };
    if ctx.terminal {
        // Quick necessary condition: every fire can raise its full
        // complement of drones.
        for i in 0..n_fires {
            let supply = pairs.iter().filter(|p| p.fire == i).count() as u32;
            if supply < instance.fire_points[i].drone_cap() {
                return Ok(infeasible);
            }
        }
    }

    // Variable layout: x per pair, m per pair, then the burn-cost
    // epigraph variable eta.
    let n_pairs = pairs.len();
    let mut drones: Vec<usize> = pairs.iter().map(|p| p.drone).collect();
    drones.sort_unstable();
    drones.dedup();
    let drone_pairs: Vec<Vec<usize>> = drones
        .iter()
        .map(|&l| (0..n_pairs).filter(|&p| pairs[p].drone == l).collect())
        .collect();
    let x_var = |p: usize| p;
    let m_var = |p: usize| n_pairs + p;
    let eta_var = 2 * n_pairs;
    let n_vars = eta_var + 1;

    let mut objective = vec![0.0; n_vars];
    for (p, pair) in pairs.iter().enumerate() {
        objective[x_var(p)] = 2.0 * scenario.weight_travel * pair.dist;
    }
    if ctx.use_cost {
        objective[eta_var] = scenario.weight_burn;
    }

    // Static rows.
    let mut base_lp = LinearProgram::new(n_vars);
    base_lp.objective = objective;
    for p in 0..n_pairs {
        base_lp.push_row(&[(x_var(p), 1.0)], Relation::Le, 1.0);
        base_lp.push_row(&[(m_var(p), 1.0), (x_var(p), -1.0)], Relation::Le, 0.0);
    }
    for i in 0..n_fires {
        let terms: Vec<(usize, f64)> = (0..n_pairs)
            .filter(|&p| pairs[p].fire == i)
            .map(|p| (x_var(p), 1.0))
            .collect();
        let cap = instance.fire_points[i].drone_cap() as f64;
        if ctx.terminal {
            base_lp.push_row(&terms, Relation::Eq, cap);
        } else if !terms.is_empty() {
            base_lp.push_row(&terms, Relation::Le, cap);
        }
    }
    for (d, &l) in drones.iter().enumerate() {
        let members = &drone_pairs[d];
        let budget = instance.battery_budget(scenario, l);
        let battery: Vec<(usize, f64)> = members
            .iter()
            .map(|&p| (x_var(p), 2.0 * pairs[p].dist))
            .collect();
        base_lp.push_row(&battery, Relation::Le, budget);

        let m_sum: Vec<(usize, f64)> = members.iter().map(|&p| (m_var(p), 1.0)).collect();
        base_lp.push_row(&m_sum, Relation::Le, 1.0);
        for &p in members {
            let mut row = vec![(x_var(p), 1.0)];
            row.extend(members.iter().map(|&q| (m_var(q), -1.0)));
            base_lp.push_row(&row, Relation::Le, 0.0);
        }
        // Workload row: every chosen task costs a round trip plus service;
        // the designated last task credits back its return leg and one
        // service term. Maximizing the credit designates the longest
        // task, which is exactly the tie rule the oracles apply.
        let service = |p: usize| match ctx.time_model {
            TimeModel::Robust => instance.service_mean[pairs[p].fire],
            TimeModel::WorstCase { tau_max } => tau_max,
        };
        let mut row = Vec::new();
        for &p in members {
            let c = pairs[p].dist / scenario.drone_speed + service(p);
            row.push((x_var(p), 2.0 * c));
            row.push((m_var(p), -c));
        }
        base_lp.push_row(&row, Relation::Le, scenario.period_length);
    }

    // Incumbent. Outside terminal mode the empty dispatch is always
    // feasible and seeds the search with a finite bound; in terminal
    // mode a greedy cover (most-constrained fire first, cheapest
    // oracle-feasible extension) usually produces one, which lets the
    // tree prune from the first node.
    let mut incumbent: Option<(f64, Vec<usize>, f64)> = None; // (value, pairs, cost)
    if ctx.terminal {
        if let Some(chosen) = greedy_cover(ctx, &pairs, &drones, &drone_pairs) {
            let travel: f64 = chosen.iter().fold(0.0, |acc, &p| acc + 2.0 * pairs[p].dist);
            let mut coverage = vec![0u32; n_fires];
            for &p in &chosen {
                coverage[pairs[p].fire] += 1;
            }
            let (cost, grad) = ctx.cost(&coverage)?;
            let value = if ctx.use_cost {
                scenario.weight_burn * cost + scenario.weight_travel * travel
            } else {
                scenario.weight_travel * travel
            };
            if ctx.use_cost {
                ctx.add_eta_cut(&coverage, cost, &grad);
            }
            incumbent = Some((value, chosen, cost));
        }
    } else {
        let (c0, g0) = ctx.cost(&vec![0; n_fires])?;
        let value = if ctx.use_cost { scenario.weight_burn * c0 } else { 0.0 };
        incumbent = Some((value, Vec::new(), c0));
        if ctx.use_cost {
            ctx.add_eta_cut(&vec![0; n_fires], c0, &g0);
        }
    }

    // Local cut pools for this mask. No-goods are exclusion certificates
    // and must all stay; cone linearizations only tighten the bound, so
    // the pool is capped and the oldest are retired to keep node LPs
    // from growing without end.
    let mut nogoods: Vec<Constraint> = Vec::new();
    let mut cones: VecDeque<Constraint> = VecDeque::new();
    let mut stack = vec![Node { fixings: Vec::new(), bound: f64::NEG_INFINITY }];
    let mut popped = 0usize;
    let mut sub_nodes = 0usize;

    let eta_row = |cut: &EtaCut| -> Constraint {
        // eta >= value + grad . (q - at), q_i = sum of x over fire i.
        let mut coeffs = vec![0.0; n_vars];
        for (p, pair) in pairs.iter().enumerate() {
            coeffs[x_var(p)] += cut.grad[pair.fire];
        }
        coeffs[eta_var] = -1.0;
        let rhs = cut
            .grad
            .iter()
            .zip(&cut.at)
            .map(|(g, a)| g * a)
            .sum::<f64>()
            - cut.value;
        Constraint { coeffs, relation: Relation::Le, rhs }
    };

    let debug = std::env::var_os("PYRO_SOLVER_DEBUG").is_some();
    while let Some(node) = pop_node(&mut stack, &mut popped) {
        sub_nodes += 1;
        ctx.stats.nodes += 1;
        if debug && sub_nodes % 25 == 0 {
            eprintln!(
                "[bnc] nodes {} stack {} cuts {} lp_solves {} incumbent {:?}",
                sub_nodes, stack.len(),
                nogoods.len() + cones.len() + ctx.eta_cuts.len(),
                ctx.stats.lp_solves, incumbent.as_ref().map(|(v, _, _)| *v)
            );
        }
        if sub_nodes > MAX_NODES {
            return Err(SolverError::NodeLimit(MAX_NODES));
        }
        if let Some((inc, _, _)) = incumbent {
            if node.bound >= inc - 1e-9 {
                continue;
            }
        }

        // Cut-and-resolve loop at this node.
        let mut rounds = 0usize;
        'node: loop {
            rounds += 1;
            let mut lp_prob = base_lp.clone();
            for cut in &ctx.eta_cuts {
                if ctx.use_cost {
                    lp_prob.constraints.push(eta_row(cut));
                }
            }
            lp_prob.constraints.extend(nogoods.iter().cloned());
            lp_prob.constraints.extend(cones.iter().cloned());
            for &(var, val) in &node.fixings {
                if val == 0 {
                    lp_prob.push_row(&[(var, 1.0)], Relation::Le, 0.0);
                } else {
                    lp_prob.push_row(&[(var, 1.0)], Relation::Ge, 1.0);
                }
            }
            ctx.stats.lp_solves += 1;
            let sol = lp::solve_lp(&lp_prob)?;
            match sol.status {
                LpStatus::Infeasible => break 'node,
                LpStatus::Unbounded => {
                    // All variables are bounded by rows; cannot happen.
                    debug_assert!(false, "bounded dispatch LP reported unbounded");
                    break 'node;
                }
                LpStatus::Optimal => {}
            }
            if let Some((inc, _, _)) = incumbent {
                if sol.objective >= inc - 1e-9 {
                    break 'node;
                }
            }

            // Integrality of the assignment variables.
            let frac = (0..n_pairs)
                .map(|p| {
                    let v = sol.values[x_var(p)];
                    (p, (v - v.round()).abs())
                })
                .filter(|&(_, f)| f > INT_TOL)
                .max_by(|a, b| a.1.total_cmp(&b.1));

            if let Some((branch_p, _)) = frac {
                // Optionally tighten with cone cuts at the fractional
                // point before branching (robust mode only).
                if matches!(ctx.time_model, TimeModel::Robust) && rounds <= 2 {
                    let added = separate_cone_cuts(
                        ctx,
                        &pairs,
                        &drones,
                        &drone_pairs,
                        &sol.values,
                        n_pairs,
                        n_vars,
                        &mut cones,
                    );
                    if added {
                        continue 'node;
                    }
                }
                let v = sol.values[x_var(branch_p)];
                let up_first = v >= 0.5;
                let child = |val: u8| {
                    let mut fixings = node.fixings.clone();
                    fixings.push((x_var(branch_p), val));
                    Node { fixings, bound: sol.objective }
                };
                // Push the preferred child last so it pops first.
                if up_first {
                    stack.push(child(0));
                    stack.push(child(1));
                } else {
                    stack.push(child(1));
                    stack.push(child(0));
                }
                break 'node;
            }

            // Integer candidate: re-derive tasks from x alone and check
            // the exact oracles.
            let chosen: Vec<usize> = (0..n_pairs)
                .filter(|&p| sol.values[x_var(p)].round() == 1.0)
                .collect();
            let mut bad_drones: Vec<usize> = Vec::new();
            let mut rounding_bad = false;
            for (d, &l) in drones.iter().enumerate() {
                let tasks: Vec<(usize, usize)> = chosen
                    .iter()
                    .filter(|&&p| pairs[p].drone == l)
                    .map(|&p| (pairs[p].fire, pairs[p].base))
                    .collect();
                if tasks.is_empty() {
                    continue;
                }
                let battery_used: f64 = chosen
                    .iter()
                    .filter(|&&p| pairs[p].drone == l)
                    .map(|&p| 2.0 * pairs[p].dist)
                    .sum();
                if battery_used > instance.battery_budget(scenario, l) + 1e-7 {
                    rounding_bad = true;
                }
                if !ctx.time_feasible(&tasks) {
                    bad_drones.push(d);
                }
            }
            let mut coverage = vec![0u32; n_fires];
            for &p in &chosen {
                coverage[pairs[p].fire] += 1;
            }
            for i in 0..n_fires {
                let cap = instance.fire_points[i].drone_cap();
                if coverage[i] > cap || (ctx.terminal && coverage[i] != cap) {
                    rounding_bad = true;
                }
            }

            if rounding_bad {
                // The rounded point violates a linear resource row (only
                // possible through accumulated LP tolerance): exclude
                // exactly this assignment and resolve.
                nogoods.push(exact_nogood(&chosen, n_pairs, n_vars));
                ctx.stats.nogood_cuts += 1;
                continue 'node;
            }

            if !bad_drones.is_empty() {
                let mut separated = false;
                if matches!(ctx.time_model, TimeModel::Robust) {
                    for &d in &bad_drones {
                        let tie_point = candidate_w(ctx, &pairs, &drone_pairs[d], &chosen);
                        if let Some(cut) = cone_cut(
                            ctx,
                            &pairs,
                            &drone_pairs[d],
                            &tie_point,
                            n_vars,
                        ) {
                            if row_violated(&cut, &sol.values) {
                                separated = true;
                            }
                            push_cone(&mut cones, cut);
                            ctx.stats.oa_cuts += 1;
                        }
                    }
                }
                for &d in &bad_drones {
                    let assigned: Vec<usize> = drone_pairs[d]
                        .iter()
                        .copied()
                        .filter(|p| chosen.contains(p))
                        .collect();
                    let antitone = matches!(ctx.time_model, TimeModel::WorstCase { .. })
                        || ctx.cov_nonneg;
                    let cut = if antitone {
                        superset_nogood(&assigned, n_vars)
                    } else {
                        drone_nogood(&assigned, &drone_pairs[d], n_vars)
                    };
                    if row_violated(&cut, &sol.values) {
                        separated = true;
                    }
                    nogoods.push(cut);
                    ctx.stats.nogood_cuts += 1;
                }
                debug_assert!(separated, "no cut separated an infeasible candidate");
                continue 'node;
            }

            // Feasible candidate: measure the true objective.
            let travel: f64 = chosen.iter().map(|&p| 2.0 * pairs[p].dist).sum();
            let (cost, grad) = ctx.cost(&coverage)?;
            let true_value = if ctx.use_cost {
                scenario.weight_burn * cost + scenario.weight_travel * travel
            } else {
                scenario.weight_travel * travel
            };
            let better = incumbent
                .as_ref()
                .map_or(true, |&(inc, _, _)| true_value < inc - 1e-12);
            if better {
                incumbent = Some((true_value, chosen.clone(), cost));
            }
            if ctx.use_cost {
                let eta_hat = sol.values[eta_var];
                if eta_hat < cost - 1e-9 && ctx.add_eta_cut(&coverage, cost, &grad) {
                    if rounds < 64 {
                        continue 'node;
                    }
                }
            }
            break 'node;
        }
    }

    match incumbent {
        Some((value, chosen, cost)) => Ok(SubOutcome {
            value,
            predicted_burn_cost: cost,
            assigned: chosen
                .iter()
                .map(|&p| (pairs[p].fire, pairs[p].base, pairs[p].drone))
                .collect(),
            feasible: true,
        }),
        None => Ok(infeasible),
    }
}

/// DFS pop, switching to the best-bound node on a fixed stride so deep
/// dives cannot starve better regions.
fn pop_node(stack: &mut Vec<Node>, popped: &mut usize) -> Option<Node> {
    if stack.is_empty() {
        return None;
    }
    *popped += 1;
    if *popped % BEST_BOUND_STRIDE == 0 {
        let best = stack
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.bound.total_cmp(&b.1.bound))
            .map(|(i, _)| i)
            .unwrap();
        return Some(stack.swap_remove(best));
    }
    stack.pop()
}

/// The workload point `w = 2x - m` a feasibility cut is taken at, using
/// the tie-rule designation for the drone's chosen pairs.
fn candidate_w(
    ctx: &PlanContext,
    pairs: &[Pair],
    members: &[usize],
    chosen: &[usize],
) -> Vec<f64> {
    let assigned: Vec<usize> = members
        .iter()
        .copied()
        .filter(|p| chosen.contains(p))
        .collect();
    let tasks: Vec<(usize, usize)> = assigned
        .iter()
        .map(|&p| (pairs[p].fire, pairs[p].base))
        .collect();
    let designated = tie_rule_pick(ctx.instance, &tasks);
    let mut w = vec![0.0; members.len()];
    for (slot, &p) in members.iter().enumerate() {
        if let Some(k) = assigned.iter().position(|&q| q == p) {
            w[slot] = if Some(k) == designated { 1.0 } else { 2.0 };
        }
    }
    w
}

/// Linearizes the robust time constraint's cone form
/// `c·w + sqrt(risk_ratio · wᵀ A_lᵀ Σ A_l w) <= Δ` for one drone at the
/// point `w_hat` (indexed by the drone's pair slots). Returns `None`
/// when the variance part vanishes (the linear mean row already covers
/// that regime).
fn cone_cut(
    ctx: &PlanContext,
    pairs: &[Pair],
    members: &[usize],
    w_hat: &[f64],
    n_vars: usize,
) -> Option<Constraint> {
    let instance = ctx.instance;
    let scenario = ctx.scenario;
    let kappa = scenario.risk_ratio();
    let n_fires = instance.n_fires();

    let mut agg = vec![0.0; n_fires];
    for (slot, &p) in members.iter().enumerate() {
        agg[pairs[p].fire] += w_hat[slot];
    }
    let mut sigma_a = vec![0.0; n_fires];
    let mut variance = 0.0;
    for i in 0..n_fires {
        let mut s = 0.0;
        for k in 0..n_fires {
            s += instance.service_cov[(i, k)] * agg[k];
        }
        sigma_a[i] = s;
        variance += agg[i] * s;
    }
    if variance <= 1e-12 {
        return None;
    }
    let std_term = (kappa * variance).sqrt();
    let mut g_value = std_term;
    let mut coeffs = vec![0.0; n_vars];
    let mut grad_dot_what = 0.0;
    for (slot, &p) in members.iter().enumerate() {
        let c_p = pairs[p].dist / scenario.drone_speed + instance.service_mean[pairs[p].fire];
        let grad_p = c_p + kappa * sigma_a[pairs[p].fire] / std_term;
        g_value += c_p * w_hat[slot];
        grad_dot_what += grad_p * w_hat[slot];
        // w = 2x - m.
        coeffs[p] += 2.0 * grad_p;
        coeffs[pairs.len() + p] -= grad_p;
    }
    // g(w_hat) + grad . (w - w_hat) <= Δ.
    let rhs = scenario.period_length - g_value + grad_dot_what;
    Some(Constraint { coeffs, relation: Relation::Le, rhs })
}

/// Cone cuts at a fractional LP point for every drone whose relaxed
/// workload violates the robust bound. Returns whether any cut was added.
#[allow(clippy::too_many_arguments)]
fn separate_cone_cuts(
    ctx: &mut PlanContext,
    pairs: &[Pair],
    drones: &[usize],
    drone_pairs: &[Vec<usize>],
    values: &[f64],
    n_pairs: usize,
    n_vars: usize,
    local_cuts: &mut Vec<Constraint>,
) -> bool {
    let mut added = false;
    for d in 0..drones.len() {
        let members = &drone_pairs[d];
        let w_hat: Vec<f64> = members
            .iter()
            .map(|&p| 2.0 * values[p] - values[n_pairs + p])
            .collect();
        if let Some(cut) = cone_cut(ctx, pairs, members, &w_hat, n_vars) {
            if row_violated(&cut, values) {
                local_cuts.push(cut);
                ctx.stats.oa_cuts += 1;
                added = true;
            }
        }
    }
    added
}

fn row_violated(cut: &Constraint, values: &[f64]) -> bool {
    let lhs: f64 = cut.coeffs.iter().zip(values).map(|(c, v)| c * v).sum();
    lhs > cut.rhs + 1e-9
}

/// Excludes exactly one assignment pattern over all pairs.
fn exact_nogood(chosen: &[usize], n_pairs: usize, n_vars: usize) -> Constraint {
    let mut coeffs = vec![0.0; n_vars];
    let mut rhs = -1.0;
    for p in 0..n_pairs {
        if chosen.contains(&p) {
            coeffs[p] = 1.0;
            rhs += 1.0;
        } else {
            coeffs[p] = -1.0;
        }
    }
    Constraint { coeffs, relation: Relation::Le, rhs }
}

/// Excludes an assignment set and all of its supersets (valid when
/// feasibility is antitone in the task set).
fn superset_nogood(assigned: &[usize], n_vars: usize) -> Constraint {
    let mut coeffs = vec![0.0; n_vars];
    for &p in assigned {
        coeffs[p] = 1.0;
    }
    Constraint {
        coeffs,
        relation: Relation::Le,
        rhs: assigned.len() as f64 - 1.0,
    }
}

/// Excludes exactly one drone's assignment pattern (over that drone's
/// pairs only), leaving other drones unconstrained.
fn drone_nogood(assigned: &[usize], members: &[usize], n_vars: usize) -> Constraint {
    let mut coeffs = vec![0.0; n_vars];
    let mut rhs = -1.0;
    for &p in members {
        if assigned.contains(&p) {
            coeffs[p] = 1.0;
            rhs += 1.0;
        } else {
            coeffs[p] = -1.0;
        }
    }
    Constraint { coeffs, relation: Relation::Le, rhs }
}

// ---------------------------------------------------------------------------
// Activation search (logic-based Benders over base subsets)
// ---------------------------------------------------------------------------

/// Plans one period: activates bases and assigns drones optimally for
/// the given instance (which must have been extracted from `map`).
pub fn plan_period(
    map: &FireMap,
    scenario: &Scenario,
    instance: &Instance,
    sq: &IcnnModel,
    options: &PlanOptions,
) -> Result<PlanOutcome, SolverError> {
    let mut ctx = PlanContext::new(map, scenario, instance, sq, options)?;
    let n_bases = instance.n_bases;
    if n_bases > MAX_BASES {
        return Err(SolverError::TooManyBases { got: n_bases, limit: MAX_BASES });
    }

    // Nothing burning: the only decision is to do nothing.
    if instance.n_fires() == 0 {
        let (c0, _) = ctx.cost(&[])?;
        let mut stats = ctx.stats;
        stats.master_iterations = 1;
        return Ok(PlanOutcome {
            decision: Decision::empty_for(instance),
            objective: scenario.weight_burn * c0,
            predicted_burn_cost: c0,
            coverage_satisfied: true,
            stats,
        });
    }

    match benders(&mut ctx)? {
        Some((mask, total, sub)) => {
            let decision = decision_from(instance, mask, &sub.assigned);
            let stats = ctx.stats;
            Ok(PlanOutcome {
                decision,
                objective: total,
                predicted_burn_cost: sub.predicted_burn_cost,
                coverage_satisfied: true,
                stats,
            })
        }
        None => {
            // Terminal coverage unattainable under every activation:
            // fall back to the ordinary problem and flag it.
            debug_assert!(ctx.terminal);
            ctx.terminal = false;
            let (mask, total, sub) =
                benders(&mut ctx)?.expect("ordinary dispatch always has the empty plan");
            let decision = decision_from(instance, mask, &sub.assigned);
            let stats = ctx.stats;
            Ok(PlanOutcome {
                decision,
                objective: total,
                predicted_burn_cost: sub.predicted_burn_cost,
                coverage_satisfied: false,
                stats,
            })
        }
    }
}

fn decision_from(instance: &Instance, mask: u32, assigned: &[(usize, usize, usize)]) -> Decision {
    let mut decision = Decision::empty_for(instance);
    for &(i, j, l) in assigned {
        decision.set(i, j, l, true);
    }
    decision.active_bases = (0..instance.n_bases).map(|j| mask & (1 << j) != 0).collect();
    decision
}

fn benders(ctx: &mut PlanContext) -> Result<Option<(u32, f64, SubOutcome)>, SolverError> {
    let n_bases = ctx.instance.n_bases;
    let w_base = ctx.scenario.weight_base;
    let all_masks = 1u32 << n_bases;

    let mut solved: HashSet<u32> = HashSet::new();
    let mut opt_cuts: Vec<(u32, f64)> = Vec::new();
    let mut excluded: Vec<u32> = Vec::new();
    let mut best: Option<(u32, f64, SubOutcome)> = None;

    loop {
        ctx.stats.master_iterations += 1;
        // Master: implicit enumeration of activation vectors against the
        // cut pool. A cut from a solved superset bounds this mask.
        let mut arg: Option<(f64, u32, u32)> = None; // (value, popcount, mask)
        for mask in 0..all_masks {
            if excluded.iter().any(|&e| mask & !e == 0) {
                continue;
            }
            let bound = opt_cuts
                .iter()
                .filter(|&&(cm, _)| mask & !cm == 0)
                .map(|&(_, v)| v)
                .fold(0.0, f64::max);
            let value = w_base * mask.count_ones() as f64 + bound;
            let key = (value, mask.count_ones(), mask);
            let replace = match arg {
                None => true,
                Some((bv, bp, bm)) => {
                    value < bv - 1e-12
                        || (value <= bv + 1e-12 && (key.1, key.2) < (bp, bm))
                }
            };
            if replace {
                arg = Some(key);
            }
        }
        let Some((lower_bound, _, mask)) = arg else {
            // Every activation is excluded (terminal coverage impossible).
            return Ok(best);
        };
        if let Some((_, ub, _)) = &best {
            if lower_bound >= *ub - 1e-9 {
                break;
            }
        }
        if solved.contains(&mask) {
            // The bound at a solved mask is exact, so reaching it again
            // means the gap is closed.
            break;
        }
        solved.insert(mask);
        let debug = std::env::var_os("PYRO_SOLVER_DEBUG").is_some();
        let t0 = std::time::Instant::now();
        if debug {
            eprintln!("[benders] mask {mask:b} lb {lower_bound:.3}");
        }
        let sub = solve_subproblem(ctx, mask)?;
        if debug {
            eprintln!(
                "[benders] mask {mask:b} done feasible {} value {:.3} in {:?} (lp_solves {} nodes {})",
                sub.feasible, sub.value, t0.elapsed(), ctx.stats.lp_solves, ctx.stats.nodes
            );
        }
        if !sub.feasible {
            excluded.push(mask);
            continue;
        }
        let total = w_base * mask.count_ones() as f64 + sub.value;
        opt_cuts.push((mask, sub.value));
        let better = match &best {
            None => true,
            Some((_, ub, _)) => total < *ub - 1e-12,
        };
        if better {
            best = Some((mask, total, sub));
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Exhaustive enumeration (test oracle)
// ---------------------------------------------------------------------------

/// Solves the period problem by enumerating every subset of assignment
/// triples. Exponential and deliberately simple: this is the ground
/// truth `plan_period` is validated against, sharing only the
/// feasibility oracles with it.
pub fn enumerate_exact(
    map: &FireMap,
    scenario: &Scenario,
    instance: &Instance,
    sq: &IcnnModel,
    options: &PlanOptions,
) -> Result<PlanOutcome, SolverError> {
    let mut ctx = PlanContext::new(map, scenario, instance, sq, options)?;

    let mut triples: Vec<(usize, usize, usize, f64)> = Vec::new();
    for (l, spec) in scenario.drones.iter().enumerate() {
        if !instance.available[l] {
            continue;
        }
        let j = spec.home_base;
        let budget = instance.battery_budget(scenario, l);
        for i in 0..instance.n_fires() {
            let dist = instance.distances[i][j];
            if instance.eligible[i][j] && 2.0 * dist <= budget + ORACLE_TOL {
                triples.push((i, j, l, dist));
            }
        }
    }
    let t = triples.len();
    if t > MAX_ENUM_TRIPLES {
        return Err(SolverError::EnumerationTooLarge { got: t, limit: MAX_ENUM_TRIPLES });
    }

    let n_fires = instance.n_fires();
    let n_drones = instance.n_drones;
    let mut best: Option<(f64, u32, Vec<u32>)> = None; // (value, subset, coverage)
    'subsets: for subset in 0u32..(1u32 << t) {
        let mut coverage = vec![0u32; n_fires];
        let mut battery = vec![0.0; n_drones];
        let mut tasks: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_drones];
        let mut used_bases = vec![false; instance.n_bases];
        let mut travel = 0.0;
        for (k, &(i, j, l, dist)) in triples.iter().enumerate() {
            if subset & (1 << k) != 0 {
                coverage[i] += 1;
                battery[l] += 2.0 * dist;
                tasks[l].push((i, j));
                used_bases[j] = true;
                travel += 2.0 * dist;
            }
        }
        for i in 0..n_fires {
            let cap = instance.fire_points[i].drone_cap();
            if coverage[i] > cap || (ctx.terminal && coverage[i] != cap) {
                continue 'subsets;
            }
        }
        for l in 0..n_drones {
            if battery[l] > instance.battery_budget(scenario, l) + ORACLE_TOL {
                continue 'subsets;
            }
            if !tasks[l].is_empty() && !ctx.time_feasible(&tasks[l]) {
                continue 'subsets;
            }
        }
        let burn = if ctx.use_cost { ctx.cost(&coverage)?.0 } else { 0.0 };
        let value = scenario.weight_burn * burn
            + scenario.weight_base * used_bases.iter().filter(|&&b| b).count() as f64
            + scenario.weight_travel * travel;
        if best.as_ref().map_or(true, |&(bv, _, _)| value < bv - 1e-12) {
            best = Some((value, subset, coverage));
        }
    }

    match best {
        Some((value, subset, coverage)) => {
            let mut decision = Decision::empty_for(instance);
            for (k, &(i, j, l, _)) in triples.iter().enumerate() {
                if subset & (1 << k) != 0 {
                    decision.set(i, j, l, true);
                }
            }
            decision.activate_used_bases();
            let predicted_burn_cost = ctx.cost(&coverage)?.0;
            let mut stats = ctx.stats;
            stats.nodes = 1 << t;
            Ok(PlanOutcome {
                decision,
                objective: value,
                predicted_burn_cost,
                coverage_satisfied: true,
                stats,
            })
        }
        None => {
            // Terminal coverage unattainable: fall back like the planner.
            debug_assert!(options.terminal_coverage);
            let fallback = PlanOptions {
                terminal_coverage: false,
                ..*options
            };
            let mut outcome = enumerate_exact(map, scenario, instance, sq, &fallback)?;
            outcome.coverage_satisfied = false;
            Ok(outcome)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::firegrid::generate_pairs;
    use crate::model::{
        check_deterministic, default_tau_max, extract_instance, CovarianceModel, DroneSpec,
        FleetSnapshot, MeanModel, ServiceModel,
    };
    use crate::predictor::{train, TrainConfig};
    use crate::testutil::{small_map as map_with_fires, small_scenario, small_sq_model, GRID};

    fn sq_model() -> &'static IcnnModel {
        small_sq_model()
    }

    fn base_scenario() -> Scenario {
        Scenario { name: "solver-test".into(), ..small_scenario() }
    }

    #[test]
    fn does_nothing_when_nothing_burns() {
        let scenario = base_scenario();
        let map = map_with_fires(&[]);
        let instance =
            extract_instance(&map, &scenario, &FleetSnapshot::fresh(2)).unwrap();
        let outcome =
            plan_period(&map, &scenario, &instance, sq_model(), &PlanOptions::default()).unwrap();
        assert_eq!(outcome.decision.count_assignments(), 0);
        assert_eq!(outcome.decision.active_base_count(), 0);
        assert!(outcome.coverage_satisfied);
        assert_eq!(outcome.stats.master_iterations, 1);
        assert_relative_eq!(
            outcome.objective,
            scenario.weight_burn * outcome.predicted_burn_cost
        );
    }

    #[test]
    fn terminal_coverage_uses_the_nearer_base() {
        let mut scenario = base_scenario();
        scenario.weight_burn = 0.0; // only travel and bases matter
        let map = map_with_fires(&[(1, 2, 0.9)]);
        let instance =
            extract_instance(&map, &scenario, &FleetSnapshot::fresh(2)).unwrap();
        let options = PlanOptions { terminal_coverage: true, ..Default::default() };
        let outcome = plan_period(&map, &scenario, &instance, sq_model(), &options).unwrap();
        assert!(outcome.coverage_satisfied);
        // Fire (1,2): base 0 at distance 2, base 1 at distance 4.
        assert_eq!(outcome.decision.triples(), vec![(0, 0, 0)]);
        let oracle = enumerate_exact(&map, &scenario, &instance, sq_model(), &options).unwrap();
        assert_relative_eq!(outcome.objective, oracle.objective, epsilon = 1e-9);
    }

    #[test]
    fn drained_battery_forces_the_farther_drone() {
        let mut scenario = base_scenario();
        scenario.weight_burn = 0.0;
        let map = map_with_fires(&[(1, 2, 0.9)]);
        let mut fleet = FleetSnapshot::fresh(2);
        fleet.battery[0] = 0.1; // budget 3 < round trip 4 to the fire
        let instance = extract_instance(&map, &scenario, &fleet).unwrap();
        let options = PlanOptions { terminal_coverage: true, ..Default::default() };
        let outcome = plan_period(&map, &scenario, &instance, sq_model(), &options).unwrap();
        assert_eq!(outcome.decision.triples(), vec![(0, 1, 1)]);
    }

    #[test]
    fn safe_distance_blocks_the_close_base() {
        let mut scenario = base_scenario();
        scenario.weight_burn = 0.0;
        scenario.safe_distance = 3.0;
        let map = map_with_fires(&[(0, 2, 0.9)]);
        let instance =
            extract_instance(&map, &scenario, &FleetSnapshot::fresh(2)).unwrap();
        let options = PlanOptions { terminal_coverage: true, ..Default::default() };
        let outcome = plan_period(&map, &scenario, &instance, sq_model(), &options).unwrap();
        // Base 0 sits 1 unit away (inside the 3-unit safety radius); base 1
        // is 5 units away and eligible.
        assert_eq!(outcome.decision.triples(), vec![(0, 1, 1)]);
    }

    #[test]
    fn unattainable_terminal_coverage_falls_back_and_flags() {
        let mut scenario = base_scenario();
        scenario.drones.truncate(1);
        let map = map_with_fires(&[(2, 2, 2.6)]); // cap 3, supply 1
        let instance =
            extract_instance(&map, &scenario, &FleetSnapshot::fresh(1)).unwrap();
        let options = PlanOptions { terminal_coverage: true, ..Default::default() };
        let outcome = plan_period(&map, &scenario, &instance, sq_model(), &options).unwrap();
        assert!(!outcome.coverage_satisfied);
        let oracle = enumerate_exact(&map, &scenario, &instance, sq_model(), &options).unwrap();
        assert!(!oracle.coverage_satisfied);
        assert_relative_eq!(outcome.objective, oracle.objective, epsilon = 1e-6);
    }

    #[test]
    fn planner_is_deterministic() {
        let scenario = base_scenario();
        let map = map_with_fires(&[(1, 1, 1.8), (3, 3, 0.7)]);
        let instance =
            extract_instance(&map, &scenario, &FleetSnapshot::fresh(2)).unwrap();
        let a = plan_period(&map, &scenario, &instance, sq_model(), &PlanOptions::default())
            .unwrap();
        let b = plan_period(&map, &scenario, &instance, sq_model(), &PlanOptions::default())
            .unwrap();
        assert_eq!(a.decision, b.decision);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }

    #[test]
    fn rejects_a_spread_only_surrogate() {
        let pairs = generate_pairs(4, GRID, 3, false, 5);
        let s_model = train(
            &pairs,
            PredictorKind::Spread,
            &TrainConfig {
                hidden_layers: 1,
                hidden_width: 8,
                epochs: 2,
                batch_size: 16,
                ..Default::default()
            },
            3,
        )
        .unwrap();
        let scenario = base_scenario();
        let map = map_with_fires(&[(1, 1, 1.0)]);
        let instance =
            extract_instance(&map, &scenario, &FleetSnapshot::fresh(2)).unwrap();
        let err = plan_period(&map, &scenario, &instance, &s_model, &PlanOptions::default());
        assert!(matches!(err, Err(SolverError::PredictorMismatch(_))));
    }

    /// The core correctness check: the branch-and-cut planner must match
    /// brute-force enumeration on random small instances, across both
    /// time models and both coverage modes.
    #[test]
    fn matches_exhaustive_enumeration_on_random_instances() {
        let sq = sq_model();
        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        let mut dispatching = 0usize;
        for case in 0..40 {
            // Even cases demand full terminal coverage; keep those lightly
            // loaded (unit caps, rested fleets) so coverage is attainable and
            // the sample exercises real dispatching, not just fallbacks.
            let terminal = case % 2 == 0;
            let n_fires = rng.gen_range(1..=3);
            let mut cells: Vec<(usize, usize)> = Vec::new();
            while cells.len() < n_fires {
                let c = (rng.gen_range(0..GRID), rng.gen_range(0..GRID));
                if !cells.contains(&c) {
                    cells.push(c);
                }
            }
            let intensity_cap = if terminal { 0.9 } else { 2.9 };
            let fires: Vec<(usize, usize, f64)> = cells
                .iter()
                .map(|&(x, y)| (x, y, rng.gen_range(0.4..intensity_cap)))
                .collect();
            let map = map_with_fires(&fires);

            let n_bases = rng.gen_range(1..=2);
            let n_drones = if terminal { rng.gen_range(2..=3) } else { rng.gen_range(1..=3) };
            let mut scenario = base_scenario();
            scenario.bases = (0..n_bases)
                .map(|_| (rng.gen_range(-1.0..6.0), rng.gen_range(-1.0..6.0)))
                .collect();
            scenario.drones = (0..n_drones)
                .map(|_| DroneSpec {
                    home_base: rng.gen_range(0..n_bases),
                    range: if terminal { rng.gen_range(20.0..34.0) } else { rng.gen_range(12.0..30.0) },
                })
                .collect();
            scenario.drone_speed = rng.gen_range(1.0..3.0);
            scenario.period_length = if terminal { rng.gen_range(9.0..16.0) } else { rng.gen_range(5.0..14.0) };
            scenario.weight_burn = if case % 5 == 0 { 0.0 } else { rng.gen_range(0.5..2.0) };
            scenario.weight_base = rng.gen_range(0.0..0.8);
            scenario.weight_travel = rng.gen_range(0.01..0.2);
            scenario.safe_distance = rng.gen_range(0.3..1.5);
            scenario.risk_level = rng.gen_range(0.05..0.25);
            scenario.service = ServiceModel {
                mean: MeanModel::Uniform { value: rng.gen_range(0.3..1.2) },
                covariance: CovarianceModel::Kernel {
                    variance: rng.gen_range(0.04..0.25),
                    length: rng.gen_range(1.0..3.0),
                    nugget: 0.01,
                },
            };
            scenario.validate().unwrap();

            let fleet = FleetSnapshot {
                available: (0..n_drones)
                    .map(|_| terminal || rng.gen_bool(0.9))
                    .collect(),
                battery: (0..n_drones)
                    .map(|_| if terminal { rng.gen_range(0.8..1.0) } else { rng.gen_range(0.5..1.0) })
                    .collect(),
            };
            let instance = extract_instance(&map, &scenario, &fleet).unwrap();

            let time_model = if case % 2 == 0 {
                TimeModel::Robust
            } else {
                TimeModel::WorstCase { tau_max: default_tau_max(&instance) }
            };
            let options = PlanOptions { time_model, terminal_coverage: terminal };

            let plan = plan_period(&map, &scenario, &instance, sq, &options).unwrap();
            let oracle = enumerate_exact(&map, &scenario, &instance, sq, &options).unwrap();
            assert_relative_eq!(
                plan.objective,
                oracle.objective,
                epsilon = 1e-6,
                max_relative = 1e-6
            );
            assert_eq!(
                plan.coverage_satisfied, oracle.coverage_satisfied,
                "coverage flags differ in case {case}"
            );

            // The returned plan must satisfy every deterministic rule and
            // the exact per-drone time oracle.
            assert!(
                check_deterministic(&scenario, &instance, &plan.decision).is_empty(),
                "case {case} plan violates deterministic constraints"
            );
            for l in 0..n_drones {
                let tasks = plan.decision.drone_tasks(l);
                if tasks.is_empty() {
                    continue;
                }
                let ok = match time_model {
                    TimeModel::Robust => {
                        cantelli_feasible(&instance, &scenario, &tasks, 1e-9)
                    }
                    TimeModel::WorstCase { tau_max } => {
                        plain_time_feasible(&instance, &scenario, &tasks, tau_max, 1e-9)
                    }
                };
                assert!(ok, "case {case} drone {l} violates the time oracle");
            }
            if plan.decision.count_assignments() > 0 {
                dispatching += 1;
            }
        }
        // The sample must exercise real dispatching, not just empty plans.
        assert!(dispatching >= 8, "only {dispatching} cases dispatched");
    }

    #[test]
    fn stats_track_the_search() {
        let scenario = base_scenario();
        let map = map_with_fires(&[(1, 2, 1.6), (3, 1, 0.8)]);
        let instance =
            extract_instance(&map, &scenario, &FleetSnapshot::fresh(2)).unwrap();
        let outcome =
            plan_period(&map, &scenario, &instance, sq_model(), &PlanOptions::default()).unwrap();
        assert!(outcome.stats.master_iterations >= 1);
        assert!(outcome.stats.subproblems >= 1);
        assert!(outcome.stats.subproblems <= 4); // 2^2 activations at most
        assert!(outcome.stats.lp_solves >= outcome.stats.nodes);
    }
}
