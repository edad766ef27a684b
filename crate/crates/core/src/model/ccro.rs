//! The period-time constraint on each drone's workload.
//!
//! A drone that flies several sorties in one period must finish before
//! the period ends, but service times at each fire are random and only
//! their mean vector and covariance matrix are trusted. The robust form
//! requires the workload to finish on time with probability at least
//! `1 - risk_level` under *every* distribution with those moments, which
//! by the one-sided Chebyshev (Cantelli) bound is exactly
//!
//! ```text
//! mean_time <= period_length  and
//! risk_ratio * variance <= (period_length - mean_time)^2
//! ```
//!
//! with `risk_ratio = (1 - risk_level) / risk_level`. The workload is
//! measured through the vector `w = 2 x - m` over (fire, base) pairs:
//! every sortie is a round trip except the designated farthest one `m`,
//! whose return leg falls outside the period accounting.
//!
//! [`CcroConstraint`] materializes the equivalent mixed-integer form
//! (a quadratic row plus a linear mean row and the linking rows that pin
//! `m` to the farthest assignment), while [`cantelli_feasible`] evaluates
//! the probabilistic oracle directly. The two agree exactly; tests and
//! the acceptance gate cross-check them on random instances.
//!
//! A deterministic alternative ([`plain_time_feasible`]) replaces every
//! random service time by a single pessimistic constant, which is the
//! natural baseline when no covariance information is used.

use nalgebra::{DMatrix, DVector};

use super::{Instance, Scenario};

/// How per-drone period-time feasibility is judged.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeModel {
    /// Distributionally robust chance constraint using the service-time
    /// mean and covariance.
    Robust,
    /// Deterministic check with every service time pinned at `tau_max`.
    WorstCase { tau_max: f64 },
}

/// The mixed-integer materialization of the robust time constraint for
/// one drone, over all `(fire, base)` pairs (pair index `fire * n_bases
/// + base`).
///
/// With `w = 2x - m`, feasibility is
///
/// ```text
/// wᵀ Q w + 2 Δ cᵀw - Δ² <= 0      (quadratic row)
/// cᵀw <= Δ                         (mean row)
/// x[p] * dist[p] <= θ              for every pair p
/// θ <= x[p] * dist[p] + M (1 - m[p])
/// Σ m = min(1, Σ x),  m <= x       (designated-pair rows)
/// ```
///
/// where `Q = risk_ratio · AᵀΣA - c cᵀ` and `c[p] = dist[p] / speed +
/// mean[fire(p)]`. `Q` is usually indefinite (the rank-one `c cᵀ` term
/// sees directions the fire aggregation `A` does not), but the feasible
/// set is nonetheless convex in `A w`: the quadratic and mean rows
/// together are equivalent to the second-order cone inequality
/// `cᵀw + sqrt(risk_ratio · wᵀAᵀΣAw) <= Δ`, which is what the planner's
/// outer-approximation cuts linearize.
#[derive(Clone, Debug)]
pub struct CcroConstraint {
    pub n_fires: usize,
    pub n_bases: usize,
    /// `Q` over pairs.
    pub quadratic: DMatrix<f64>,
    /// `c` over pairs: one-way travel time plus mean service time.
    pub linear: DVector<f64>,
    /// Fire-aggregation matrix `A` (fires x pairs).
    pub aggregate: DMatrix<f64>,
    /// One-way distance of each pair.
    pub pair_distance: DVector<f64>,
    pub period_length: f64,
    pub risk_ratio: f64,
    pub big_m: f64,
    /// Whether `Q` happens to be positive semidefinite.
    pub psd: bool,
}

/// Builds the materialized robust time constraint for an instance. The
/// matrix is drone-independent: restricting a drone to its home base is
/// the planner's job, not the constraint's.
pub fn build_ccro(instance: &Instance, scenario: &Scenario) -> CcroConstraint {
    let n_fires = instance.n_fires();
    let n_bases = instance.n_bases;
    let n_pairs = n_fires * n_bases;
    let risk_ratio = scenario.risk_ratio();

    let mut linear = DVector::zeros(n_pairs);
    let mut pair_distance = DVector::zeros(n_pairs);
    let mut aggregate = DMatrix::zeros(n_fires, n_pairs);
    for i in 0..n_fires {
        for j in 0..n_bases {
            let p = i * n_bases + j;
            pair_distance[p] = instance.distances[i][j];
            linear[p] = instance.distances[i][j] / scenario.drone_speed + instance.service_mean[i];
            aggregate[(i, p)] = 1.0;
        }
    }

    let spread = aggregate.transpose() * &instance.service_cov * &aggregate;
    let quadratic = spread * risk_ratio - &linear * linear.transpose();

    let psd = if n_pairs == 0 {
        true
    } else {
        let eigen = quadratic.clone().symmetric_eigen();
        let scale = eigen.eigenvalues.amax().max(1.0);
        eigen.eigenvalues.iter().all(|&ev| ev >= -1e-9 * scale)
    };

    CcroConstraint {
        n_fires,
        n_bases,
        quadratic,
        linear,
        aggregate,
        pair_distance,
        period_length: scenario.period_length,
        risk_ratio,
        big_m: scenario.big_m,
        psd,
    }
}

impl CcroConstraint {
    pub fn n_pairs(&self) -> usize {
        self.n_fires * self.n_bases
    }

    pub fn pair_index(&self, fire: usize, base: usize) -> usize {
        fire * self.n_bases + base
    }

    /// `w = 2x - m` over pairs.
    pub fn workload_vector(&self, x: &[f64], m: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.n_pairs(),
            x.iter().zip(m).map(|(&xv, &mv)| 2.0 * xv - mv),
        )
    }

    /// Left-hand side of the quadratic row: `wᵀQw + 2Δ cᵀw - Δ²`.
    /// Non-positive means the variance condition holds.
    pub fn quadratic_residual(&self, w: &DVector<f64>) -> f64 {
        let quad = (w.transpose() * &self.quadratic * w)[(0, 0)];
        quad + 2.0 * self.period_length * self.linear.dot(w) - self.period_length.powi(2)
    }

    /// Expected completion time `cᵀw`.
    pub fn mean_time(&self, w: &DVector<f64>) -> f64 {
        self.linear.dot(w)
    }

    /// Checks the complete mixed-integer system on candidate values:
    /// binary `x`/`m`, the designated-pair linking rows with `theta`,
    /// the mean row, and the quadratic row, all within `tol`.
    pub fn satisfied(&self, x: &[f64], m: &[f64], theta: f64, tol: f64) -> bool {
        assert_eq!(x.len(), self.n_pairs());
        assert_eq!(m.len(), self.n_pairs());
        let binary = |v: f64| (v - v.round()).abs() <= tol && (0.0..=1.0).contains(&v.round());
        if !x.iter().all(|&v| binary(v)) || !m.iter().all(|&v| binary(v)) {
            return false;
        }
        let x_sum: f64 = x.iter().sum();
        let m_sum: f64 = m.iter().sum();
        if (m_sum - x_sum.min(1.0)).abs() > tol {
            return false;
        }
        for p in 0..self.n_pairs() {
            if m[p] > x[p] + tol {
                return false;
            }
            if x[p] * self.pair_distance[p] > theta + tol {
                return false;
            }
            if theta > x[p] * self.pair_distance[p] + self.big_m * (1.0 - m[p]) + tol {
                return false;
            }
        }
        let w = self.workload_vector(x, m);
        self.mean_time(&w) <= self.period_length + tol && self.quadratic_residual(&w) <= tol
    }
}

/// Picks the designated pair for a task set: the one with the greatest
/// one-way distance, ties broken by the lowest `(fire, base)` pair in
/// lexicographic order. Returns an index into `tasks`.
pub fn tie_rule_pick(instance: &Instance, tasks: &[(usize, usize)]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (t, &(i, j)) in tasks.iter().enumerate() {
        let d = instance.distances[i][j];
        best = match best {
            None => Some(t),
            Some(b) => {
                let (bi, bj) = tasks[b];
                let bd = instance.distances[bi][bj];
                if d > bd || (d == bd && (i, j) < (bi, bj)) {
                    Some(t)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// Per-fire workload aggregation `a = A(2x - m)` and the travel-time
/// part of the mean, for a drone flying `tasks` with the designated
/// pair picked by the tie rule.
fn aggregate_workload(instance: &Instance, scenario: &Scenario, tasks: &[(usize, usize)]) -> (Vec<f64>, f64) {
    let designated = tie_rule_pick(instance, tasks);
    let mut per_fire = vec![0.0; instance.n_fires()];
    let mut travel_time = 0.0;
    for (t, &(i, j)) in tasks.iter().enumerate() {
        let weight = if Some(t) == designated { 1.0 } else { 2.0 };
        per_fire[i] += weight;
        travel_time += weight * instance.distances[i][j] / scenario.drone_speed;
    }
    (per_fire, travel_time)
}

/// Expected completion time and its variance for one drone's task set,
/// computed directly from the instance moments (the oracle form).
pub fn completion_moments(
    instance: &Instance,
    scenario: &Scenario,
    tasks: &[(usize, usize)],
) -> (f64, f64) {
    let (per_fire, travel_time) = aggregate_workload(instance, scenario, tasks);
    let mut mean = travel_time;
    let mut variance = 0.0;
    for (i, &a) in per_fire.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        mean += a * instance.service_mean[i];
        for (k, &b) in per_fire.iter().enumerate() {
            if b != 0.0 {
                variance += a * instance.service_cov[(i, k)] * b;
            }
        }
    }
    (mean, variance)
}

/// The distribution-free completion-time bound `mean + sqrt(risk_ratio ·
/// variance)`: the workload is robustly on time exactly when this is at
/// most the period length.
pub fn robust_completion_bound(
    instance: &Instance,
    scenario: &Scenario,
    tasks: &[(usize, usize)],
) -> f64 {
    let (mean, variance) = completion_moments(instance, scenario, tasks);
    mean + (scenario.risk_ratio() * variance.max(0.0)).sqrt()
}

/// Probabilistic oracle for the robust time constraint: under every
/// service-time distribution with the instance's moments, the drone
/// finishes the period with probability at least `1 - risk_level`.
pub fn cantelli_feasible(
    instance: &Instance,
    scenario: &Scenario,
    tasks: &[(usize, usize)],
    tol: f64,
) -> bool {
    let (mean, variance) = completion_moments(instance, scenario, tasks);
    let slack = scenario.period_length - mean;
    slack >= -tol && slack * slack - scenario.risk_ratio() * variance >= -tol
}

/// Deterministic completion time with every service pinned at `tau_max`:
/// all round trips except the designated pair's return leg.
pub fn plain_time_used(
    instance: &Instance,
    scenario: &Scenario,
    tasks: &[(usize, usize)],
    tau_max: f64,
) -> f64 {
    let designated = tie_rule_pick(instance, tasks);
    let mut used = 0.0;
    for (t, &(i, j)) in tasks.iter().enumerate() {
        let weight = if Some(t) == designated { 1.0 } else { 2.0 };
        used += weight * (instance.distances[i][j] / scenario.drone_speed + tau_max);
    }
    used
}

/// Deterministic worst-case time check: the pessimistic workload must fit
/// in the period.
pub fn plain_time_feasible(
    instance: &Instance,
    scenario: &Scenario,
    tasks: &[(usize, usize)],
    tau_max: f64,
    tol: f64,
) -> bool {
    plain_time_used(instance, scenario, tasks, tau_max) <= scenario.period_length + tol
}

/// The default pessimistic service time: three standard deviations above
/// the mean, at whichever fire point that is largest.
pub fn default_tau_max(instance: &Instance) -> f64 {
    (0..instance.n_fires())
        .map(|i| instance.service_mean[i] + 3.0 * instance.service_cov[(i, i)].max(0.0).sqrt())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FirePoint, Instance};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Hand-built instance: distances per fire x base, service moments.
    fn inst(distances: Vec<Vec<f64>>, mean: Vec<f64>, cov: DMatrix<f64>) -> Instance {
        let n_fires = distances.len();
        let n_bases = distances.first().map_or(0, Vec::len);
        Instance {
            fire_points: (0..n_fires)
                .map(|i| FirePoint { x: i, y: 0, intensity: 1.0 })
                .collect(),
            n_bases,
            n_drones: 1,
            eligible: vec![vec![true; n_bases]; n_fires],
            distances,
            available: vec![true],
            battery: vec![1.0],
            service_mean: DVector::from_vec(mean),
            service_cov: cov,
        }
    }

    fn scen(speed: f64, period: f64, risk: f64) -> Scenario {
        let mut s = super::super::tests::tiny_scenario();
        s.drone_speed = speed;
        s.period_length = period;
        s.risk_level = risk;
        s
    }

    fn random_psd(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(n, n) * 0.05
    }

    #[test]
    fn quadratic_row_equals_direct_moment_algebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let n_fires = rng.gen_range(1..=3);
            let n_bases = rng.gen_range(1..=2);
            let distances: Vec<Vec<f64>> = (0..n_fires)
                .map(|_| (0..n_bases).map(|_| rng.gen_range(0.5..6.0)).collect())
                .collect();
            let mean: Vec<f64> = (0..n_fires).map(|_| rng.gen_range(0.1..2.0)).collect();
            let cov = random_psd(n_fires, &mut rng);
            let instance = inst(distances, mean, cov);
            let scenario = scen(
                rng.gen_range(0.5..3.0),
                rng.gen_range(2.0..12.0),
                rng.gen_range(0.02..0.3),
            );
            let ccro = build_ccro(&instance, &scenario);

            // Random tasks: one per fire with a random base, some skipped.
            let mut tasks: Vec<(usize, usize)> = Vec::new();
            for i in 0..n_fires {
                if rng.gen_bool(0.7) {
                    tasks.push((i, rng.gen_range(0..n_bases)));
                }
            }
            let mut x = vec![0.0; ccro.n_pairs()];
            let mut m = vec![0.0; ccro.n_pairs()];
            for &(i, j) in &tasks {
                x[ccro.pair_index(i, j)] = 1.0;
            }
            if let Some(t) = tie_rule_pick(&instance, &tasks) {
                let (i, j) = tasks[t];
                m[ccro.pair_index(i, j)] = 1.0;
            }
            let w = ccro.workload_vector(&x, &m);

            let (mean_t, var_t) = completion_moments(&instance, &scenario, &tasks);
            let delta = scenario.period_length;
            // wᵀQw + 2Δcᵀw - Δ² should equal risk_ratio·V - (Δ - mean)².
            assert_relative_eq!(
                ccro.quadratic_residual(&w),
                scenario.risk_ratio() * var_t - (delta - mean_t).powi(2),
                epsilon = 1e-9,
                max_relative = 1e-9
            );
            assert_relative_eq!(ccro.mean_time(&w), mean_t, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn reformulation_agrees_with_cantelli_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut feasible_seen = 0;
        let mut infeasible_seen = 0;
        for _ in 0..60 {
            let n_fires = rng.gen_range(1..=3);
            let n_bases = rng.gen_range(1..=2);
            let distances: Vec<Vec<f64>> = (0..n_fires)
                .map(|_| (0..n_bases).map(|_| rng.gen_range(0.5..5.0)).collect())
                .collect();
            let mean: Vec<f64> = (0..n_fires).map(|_| rng.gen_range(0.1..2.5)).collect();
            let cov = random_psd(n_fires, &mut rng);
            let instance = inst(distances, mean, cov);
            let scenario = scen(
                rng.gen_range(0.5..2.5),
                rng.gen_range(2.0..10.0),
                rng.gen_range(0.02..0.3),
            );
            let ccro = build_ccro(&instance, &scenario);

            let mut tasks = Vec::new();
            let mut x = vec![0.0; ccro.n_pairs()];
            let mut m = vec![0.0; ccro.n_pairs()];
            for i in 0..n_fires {
                for j in 0..n_bases {
                    if rng.gen_bool(0.4) {
                        tasks.push((i, j));
                        x[ccro.pair_index(i, j)] = 1.0;
                    }
                }
            }
            let theta = match tie_rule_pick(&instance, &tasks) {
                Some(t) => {
                    let (i, j) = tasks[t];
                    m[ccro.pair_index(i, j)] = 1.0;
                    instance.distances[i][j]
                }
                None => 0.0,
            };

            let reform = ccro.satisfied(&x, &m, theta, 1e-9);
            let oracle = cantelli_feasible(&instance, &scenario, &tasks, 1e-9);
            assert_eq!(reform, oracle, "disagreement on tasks {tasks:?}");
            if oracle {
                feasible_seen += 1;
            } else {
                infeasible_seen += 1;
            }
        }
        // The sample must exercise both outcomes to be meaningful.
        assert!(feasible_seen > 0 && infeasible_seen > 0);
    }

    #[test]
    fn tie_rule_prefers_farthest_then_lowest_pair() {
        let instance = inst(
            vec![vec![3.0, 1.0], vec![3.0, 2.0]],
            vec![1.0, 1.0],
            DMatrix::identity(2, 2),
        );
        // Distances: (0,0)=3, (1,0)=3 tie -> lex picks (0,0).
        let tasks = vec![(1, 0), (0, 0)];
        let pick = tie_rule_pick(&instance, &tasks).unwrap();
        assert_eq!(tasks[pick], (0, 0));
        // Strictly farther wins regardless of order.
        let tasks = vec![(0, 0), (1, 1)];
        assert_eq!(tasks[tie_rule_pick(&instance, &tasks).unwrap()], (0, 0));
        assert_eq!(tie_rule_pick(&instance, &[]), None);
    }

    #[test]
    fn single_task_counts_one_trip_and_one_service() {
        // One-way travel time 2, worst-case service 2: the designated
        // (only) task is charged once, so the period needs 4 time units.
        let instance = inst(vec![vec![4.0]], vec![1.0], DMatrix::identity(1, 1));
        let scenario = scen(2.0, 5.0, 0.05);
        let tasks = vec![(0, 0)];
        assert_relative_eq!(plain_time_used(&instance, &scenario, &tasks, 2.0), 4.0);
        assert!(plain_time_feasible(&instance, &scenario, &tasks, 2.0, 1e-9));
        let tight = scen(2.0, 3.9, 0.05);
        assert!(!plain_time_feasible(&instance, &tight, &tasks, 2.0, 1e-9));
    }

    #[test]
    fn two_tasks_charge_round_trips_except_designated() {
        // Distances 4 and 2 at speed 2: travel times 2 and 1. tau 0.5.
        // Round trips: 2*(2 + 0.5) + 2*(1 + 0.5) = 8; designated is the
        // farther task, refunded once: 8 - (2 + 0.5) = 5.5.
        let instance = inst(vec![vec![4.0], vec![2.0]], vec![0.5, 0.5], DMatrix::identity(2, 2));
        let scenario = scen(2.0, 6.0, 0.05);
        let tasks = vec![(0, 0), (1, 0)];
        assert_relative_eq!(plain_time_used(&instance, &scenario, &tasks, 0.5), 5.5);
    }

    #[test]
    fn empty_task_set_is_always_feasible() {
        let instance = inst(vec![vec![5.0]], vec![1.0], DMatrix::identity(1, 1));
        let scenario = scen(1.0, 0.5, 0.05);
        assert!(cantelli_feasible(&instance, &scenario, &[], 0.0));
        assert!(plain_time_feasible(&instance, &scenario, &[], 99.0, 0.0));
        let ccro = build_ccro(&instance, &scenario);
        assert!(ccro.satisfied(&[0.0], &[0.0], 0.0, 1e-9));
    }

    #[test]
    fn bound_form_matches_two_condition_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..200 {
            let n = rng.gen_range(1..=3);
            let distances: Vec<Vec<f64>> =
                (0..n).map(|_| vec![rng.gen_range(0.5..5.0)]).collect();
            let mean: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
            let cov = random_psd(n, &mut rng);
            let instance = inst(distances, mean, cov);
            let scenario = scen(1.5, rng.gen_range(1.0..14.0), 0.05);
            let tasks: Vec<(usize, usize)> =
                (0..n).filter(|_| rng.gen_bool(0.6)).map(|i| (i, 0)).collect();
            let bound = robust_completion_bound(&instance, &scenario, &tasks);
            let margin = bound - scenario.period_length;
            if margin.abs() > 1e-9 {
                assert_eq!(
                    bound <= scenario.period_length,
                    cantelli_feasible(&instance, &scenario, &tasks, 0.0)
                );
            }
        }
    }

    #[test]
    fn default_tau_max_is_three_sigma_above_mean() {
        let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
        let instance = inst(vec![vec![1.0], vec![1.0]], vec![1.0, 2.0], cov);
        // max(1 + 3*2, 2 + 3*1) = 7.
        assert_relative_eq!(default_tau_max(&instance), 7.0);
    }

    #[test]
    fn psd_flag_tracks_the_quadratic_sign() {
        // Near-zero linear term: Q ≈ risk_ratio · AᵀΣA, PSD.
        let instance = inst(vec![vec![1.0]], vec![0.0], DMatrix::identity(1, 1));
        let scenario = scen(1e9, 5.0, 0.05);
        assert!(build_ccro(&instance, &scenario).psd);
        // Large travel times make the rank-one -ccᵀ term dominate somewhere.
        let instance = inst(
            vec![vec![50.0, 60.0]],
            vec![0.1],
            DMatrix::identity(1, 1) * 0.01,
        );
        let scenario = scen(1.0, 5.0, 0.4);
        assert!(!build_ccro(&instance, &scenario).psd);
    }

    #[test]
    fn satisfied_rejects_broken_linking_rows() {
        let instance = inst(vec![vec![3.0], vec![2.0]], vec![0.1, 0.1], DMatrix::identity(2, 2) * 0.01);
        let scenario = scen(2.0, 50.0, 0.05);
        let ccro = build_ccro(&instance, &scenario);
        // Proper point: both fires served, designated is fire 0 (farther).
        assert!(ccro.satisfied(&[1.0, 1.0], &[1.0, 0.0], 3.0, 1e-9));
        // m on the nearer task: theta rows cannot hold for any theta.
        assert!(!ccro.satisfied(&[1.0, 1.0], &[0.0, 1.0], 3.0, 1e-9));
        assert!(!ccro.satisfied(&[1.0, 1.0], &[0.0, 1.0], 2.0, 1e-9));
        // No designated pair while tasks exist.
        assert!(!ccro.satisfied(&[1.0, 0.0], &[0.0, 0.0], 3.0, 1e-9));
        // m without x.
        assert!(!ccro.satisfied(&[0.0, 1.0], &[1.0, 0.0], 2.0, 1e-9));
        // Fractional x.
        assert!(!ccro.satisfied(&[0.5, 0.0], &[0.0, 0.0], 3.0, 1e-9));
    }

    proptest! {
        /// With entrywise non-negative covariance (true for the kernel
        /// and diagonal models), adding a task never repairs an
        /// infeasible robust workload, and the worst-case check is
        /// monotone unconditionally.
        #[test]
        fn feasibility_is_antitone_in_tasks(
            seed in 0u64..500,
            period in 1.0f64..10.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(2..=4usize);
            let distances: Vec<Vec<f64>> =
                (0..n).map(|_| vec![rng.gen_range(0.5..4.0)]).collect();
            let mean: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.5)).collect();
            // Entrywise non-negative PSD matrix: diag + rank-one of a
            // non-negative vector.
            let v = DVector::from_fn(n, |_, _| rng.gen_range(0.0..1.0));
            let cov = &v * v.transpose() + DMatrix::identity(n, n) * rng.gen_range(0.01..0.5);
            let instance = inst(distances, mean, cov);
            let scenario = scen(1.0, period, 0.05);

            let full: Vec<(usize, usize)> = (0..n).map(|i| (i, 0)).collect();
            for len in 1..n {
                let smaller = &full[..len];
                let larger = &full[..len + 1];
                if !cantelli_feasible(&instance, &scenario, smaller, 1e-9) {
                    prop_assert!(!cantelli_feasible(&instance, &scenario, larger, 1e-9));
                }
                let tau = default_tau_max(&instance);
                if !plain_time_feasible(&instance, &scenario, smaller, tau, 1e-9) {
                    prop_assert!(!plain_time_feasible(&instance, &scenario, larger, tau, 1e-9));
                }
            }
        }
    }
}
