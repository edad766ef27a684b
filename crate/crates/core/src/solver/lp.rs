//! A small dense-tableau simplex solver.
//!
//! Minimizes `c·v` over `v >= 0` subject to a list of `<=` / `>=` / `=`
//! rows. Two-phase method: phase one minimizes the sum of artificial
//! variables to find a basic feasible solution, phase two optimizes the
//! real objective.
//!
//! Dispatch LPs are massively degenerate (many ties at zero), so the
//! pivot machinery layers three defenses:
//!
//! * pricing is Dantzig's rule while the objective keeps moving and
//!   falls back to Bland's lowest-index rule after a run of degenerate
//!   pivots, which rules out cycling on a plateau;
//! * the ratio test is a two-pass Harris test that, among rows tied for
//!   the minimum ratio within a feasibility tolerance, prefers the
//!   largest pivot element, and an entering column whose best available
//!   pivot is still tiny is set aside when a better column exists;
//! * the tableau is periodically rebuilt from the untouched constraint
//!   data by refactoring the current basis (an LU solve), which wipes
//!   out accumulated elimination roundoff. Optimality is only declared
//!   after such a rebuild confirms no reduced cost is negative.
//!
//! The relaxations solved during branch-and-cut are a few hundred rows
//! and columns at most, so a dense tableau is simpler and fast enough;
//! no sparsity tricks are needed.

use super::SolverError;
use nalgebra::DMatrix;

/// Row sense of a linear constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

/// One linear constraint `coeffs · v (<=|>=|=) rhs`.
#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A linear program in `min c·v, v >= 0` form.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub n_vars: usize,
    /// Minimized objective coefficients, one per variable.
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        LinearProgram {
            n_vars,
            objective: vec![0.0; n_vars],
            constraints: Vec::new(),
        }
    }

    /// Adds a row given as sparse `(var, coeff)` terms.
    pub fn push_row(&mut self, terms: &[(usize, f64)], relation: Relation, rhs: f64) {
        let mut coeffs = vec![0.0; self.n_vars];
        for &(var, coeff) in terms {
            debug_assert!(var < self.n_vars);
            coeffs[var] += coeff;
        }
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of an LP solve. `values` and `objective` are meaningful only
/// when `status` is `Optimal`.
#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub values: Vec<f64>,
}

const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
/// Pivot magnitude below which an entering column is set aside in favor
/// of a better-conditioned one (when one exists).
const MIN_PIVOT: f64 = 1e-6;
/// Entering candidates examined per iteration before settling for the
/// best pivot seen so far.
const ENTER_SCAN: usize = 8;
/// Degenerate pivots tolerated before pricing switches to Bland's rule.
const STALL_LIMIT: usize = 40;
/// Pivots between rebuilds of the tableau from the pristine rows.
const REFRESH_EVERY: usize = 512;

struct Tableau {
    /// `rows x (n_cols + 1)`; the last column is the right-hand side.
    rows: Vec<Vec<f64>>,
    /// The standardized rows exactly as built, before any pivoting;
    /// kept parallel to `rows` so the working copy can be recomputed
    /// from the current basis alone.
    base: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_cols: usize,
    /// Reduced-cost row, last entry is minus the objective value.
    obj: Vec<f64>,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        let c = self.n_cols;
        self.rows[r][c]
    }

    /// Rebuilds the reduced-cost row for a cost vector over all columns.
    fn price(&mut self, cost: &[f64]) {
        let c = self.n_cols;
        self.obj = cost.to_vec();
        self.obj.push(0.0);
        for r in 0..self.rows.len() {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for j in 0..=c {
                    self.obj[j] -= cb * self.rows[r][j];
                }
            }
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        // Entries this far below the working scale are roundoff debris;
        // snapping them to zero keeps eliminations from breeding spurious
        // reduced costs over long runs.
        const SNAP: f64 = 1e-11;
        let c = self.n_cols;
        let p = self.rows[row][col];
        for j in 0..=c {
            self.rows[row][j] /= p;
        }
        self.rows[row][col] = 1.0;
        for r in 0..self.rows.len() {
            if r != row {
                let f = self.rows[r][col];
                if f != 0.0 {
                    for j in 0..=c {
                        let v = self.rows[r][j] - f * self.rows[row][j];
                        self.rows[r][j] = if v.abs() < SNAP { 0.0 } else { v };
                    }
                    self.rows[r][col] = 0.0;
                }
            }
        }
        let f = self.obj[col];
        if f != 0.0 {
            for j in 0..=c {
                let v = self.obj[j] - f * self.rows[row][j];
                self.obj[j] = if v.abs() < SNAP { 0.0 } else { v };
            }
            self.obj[col] = 0.0;
        }
        // A basic solution keeps rhs >= 0; hairline negatives left by the
        // Harris window are roundoff and get clamped before they can feed
        // later ratio tests.
        for r in 0..self.rows.len() {
            if self.rows[r][c] < 0.0 && self.rows[r][c] > -FEAS_TOL {
                self.rows[r][c] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Recomputes the working tableau from the pristine rows and the
    /// current basis: factors the basis matrix and solves for every
    /// column, wiping out roundoff accumulated over past eliminations.
    /// Returns false (leaving the working copy untouched) if the basis
    /// matrix is too ill-conditioned to refactor.
    fn refresh(&mut self, cost: &[f64]) -> bool {
        let m = self.rows.len();
        if m == 0 {
            self.price(cost);
            return true;
        }
        let nc = self.n_cols;
        let b = DMatrix::from_fn(m, m, |r, k| self.base[r][self.basis[k]]);
        let a = DMatrix::from_fn(m, nc + 1, |r, j| self.base[r][j]);
        let Some(x) = b.lu().solve(&a) else {
            return false;
        };
        // The columns of the basis itself must come back as the identity;
        // anything else means the factorization was numerically unsound.
        for (k, &col) in self.basis.iter().enumerate() {
            for r in 0..m {
                let want = if r == k { 1.0 } else { 0.0 };
                if (x[(r, col)] - want).abs() > 1e-6 {
                    return false;
                }
            }
        }
        for r in 0..m {
            for j in 0..=nc {
                self.rows[r][j] = x[(r, j)];
            }
        }
        self.price(cost);
        true
    }

    /// Two-pass Harris ratio test for an entering column. The first pass
    /// finds the minimum ratio with a small feasibility slack; the second
    /// picks, among rows inside that window, the largest pivot element
    /// (or the lowest basis index under Bland pricing). Returns the
    /// leaving row and its pivot magnitude, or None when no row blocks
    /// the column (an unbounded ray).
    fn ratio_test(&self, col: usize, bland: bool) -> Option<(usize, f64)> {
        let mut limit = f64::INFINITY;
        for r in 0..self.rows.len() {
            let a = self.rows[r][col];
            if a > PIVOT_TOL {
                limit = limit.min((self.rhs(r).max(0.0) + FEAS_TOL) / a);
            }
        }
        if limit.is_infinite() {
            return None;
        }
        let mut pick: Option<(usize, f64)> = None;
        for r in 0..self.rows.len() {
            let a = self.rows[r][col];
            if a > PIVOT_TOL && self.rhs(r).max(0.0) / a <= limit {
                pick = match pick {
                    None => Some((r, a)),
                    Some((br, ba)) => {
                        let better = if bland {
                            self.basis[r] < self.basis[br]
                        } else {
                            a > ba
                        };
                        if better { Some((r, a)) } else { Some((br, ba)) }
                    }
                };
            }
        }
        pick
    }

    /// Runs simplex iterations for the cost vector `cost` (which must
    /// already be priced into the objective row). `allowed` limits which
    /// columns may enter.
    fn iterate(
        &mut self,
        cost: &[f64],
        allowed: &dyn Fn(usize) -> bool,
        max_iters: usize,
    ) -> Result<LpStatus, SolverError> {
        let mut stalled = 0usize;
        let mut since_refresh = 0usize;
        let mut last_obj = self.rhs_obj();
        for _ in 0..max_iters {
            if since_refresh >= REFRESH_EVERY && self.refresh(cost) {
                since_refresh = 0;
                last_obj = self.rhs_obj();
            }
            let bland = stalled >= STALL_LIMIT;
            let negative = |t: &Self| -> Vec<usize> {
                (0..t.n_cols)
                    .filter(|&j| allowed(j) && t.obj[j] < -PIVOT_TOL)
                    .collect()
            };
            let mut candidates = negative(self);
            if candidates.is_empty() {
                // Never declare optimality off a drifted objective row:
                // rebuild from pristine data and look again.
                if since_refresh > 0 && self.refresh(cost) {
                    since_refresh = 0;
                    last_obj = self.rhs_obj();
                    candidates = negative(self);
                }
                if candidates.is_empty() {
                    return Ok(LpStatus::Optimal);
                }
            }
            if bland {
                candidates.sort_unstable();
            } else {
                candidates.sort_unstable_by(|&a, &b| self.obj[a].total_cmp(&self.obj[b]));
            }
            // Take the first candidate whose pivot element is sound; if
            // none of the leading candidates offers one, settle for the
            // largest pivot seen.
            let mut chosen: Option<(usize, usize, f64)> = None;
            for &col in candidates.iter().take(ENTER_SCAN) {
                match self.ratio_test(col, bland) {
                    None => return Ok(LpStatus::Unbounded),
                    Some((row, piv)) => {
                        if piv >= MIN_PIVOT {
                            chosen = Some((col, row, piv));
                            break;
                        }
                        if chosen.is_none_or(|(.., best)| piv > best) {
                            chosen = Some((col, row, piv));
                        }
                    }
                }
            }
            let (col, row, _) = chosen.expect("candidate list is non-empty");
            self.pivot(row, col);
            since_refresh += 1;
            let obj = self.rhs_obj();
            if obj < last_obj - PIVOT_TOL {
                last_obj = obj;
                stalled = 0;
            } else {
                stalled += 1;
            }
        }
        Err(SolverError::SimplexStall)
    }

    /// Current objective value (the tableau keeps `-z` in the objective
    /// row's RHS entry).
    fn rhs_obj(&self) -> f64 {
        -self.obj[self.n_cols]
    }
}

/// Solves the LP. Errors only on an iteration-limit stall, which no
/// well-posed input of the sizes used here should reach.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, SolverError> {
    let t0 = std::time::Instant::now();
    let out = solve_lp_inner(lp);
    if std::env::var_os("PYRO_SOLVER_DEBUG").is_some() && t0.elapsed().as_millis() > 500 {
        eprintln!(
            "[lp] m {} n {} took {:?} status {:?}",
            lp.constraints.len(), lp.n_vars, t0.elapsed(),
            out.as_ref().map(|s| s.status)
        );
    }
    out
}

fn solve_lp_inner(lp: &LinearProgram) -> Result<LpSolution, SolverError> {
    let n = lp.n_vars;
    let m = lp.constraints.len();

    // Column layout: structural | slack+surplus | artificial.
    let n_extra = lp
        .constraints
        .iter()
        .filter(|c| c.relation != Relation::Eq)
        .count();
    let mut n_art = 0;
    let slack_base = n;
    let art_base = n + n_extra;

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut extra_used = 0;
    let mut art_cols: Vec<usize> = Vec::new();

    // Total columns are known up front so rows can be built in one pass.
    let n_art_total = lp
        .constraints
        .iter()
        .filter(|c| {
            let flip = c.rhs < 0.0;
            let rel = effective_relation(c.relation, flip);
            rel != Relation::Le
        })
        .count();
    let n_cols = n + n_extra + n_art_total;

    for c in &lp.constraints {
        let flip = c.rhs < 0.0;
        let sign = if flip { -1.0 } else { 1.0 };
        let rel = effective_relation(c.relation, flip);
        let mut row = vec![0.0; n_cols + 1];
        for (j, &a) in c.coeffs.iter().enumerate() {
            row[j] = sign * a;
        }
        row[n_cols] = sign * c.rhs;
        match rel {
            Relation::Le => {
                let s = slack_base + extra_used;
                extra_used += 1;
                row[s] = 1.0;
                basis.push(s);
            }
            Relation::Ge => {
                let s = slack_base + extra_used;
                extra_used += 1;
                row[s] = -1.0;
                let a = art_base + n_art;
                n_art += 1;
                row[a] = 1.0;
                art_cols.push(a);
                basis.push(a);
            }
            Relation::Eq => {
                let a = art_base + n_art;
                n_art += 1;
                row[a] = 1.0;
                art_cols.push(a);
                basis.push(a);
            }
        }
        rows.push(row);
    }
    debug_assert_eq!(n_art, n_art_total);

    let mut tab = Tableau {
        base: rows.clone(),
        rows,
        basis,
        n_cols,
        obj: Vec::new(),
    };
    let is_artificial = |j: usize| j >= art_base;
    let max_iters = 200_000 + 200 * (m + n_cols);

    // Phase one: drive the artificial variables to zero.
    if n_art > 0 {
        let mut cost = vec![0.0; n_cols];
        for &a in &art_cols {
            cost[a] = 1.0;
        }
        tab.price(&cost);
        let status = tab.iterate(&cost, &|_| true, max_iters)?;
        debug_assert_ne!(status, LpStatus::Unbounded, "phase one is bounded below by zero");
        let phase1 = -tab.obj[n_cols];
        if phase1 > FEAS_TOL {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                objective: 0.0,
                values: vec![0.0; n],
            });
        }
        // Remove artificials still sitting in the basis at level zero:
        // pivot them out where possible, drop redundant rows otherwise.
        // Decisions here trust the entries, so take them from a fresh
        // rebuild and pivot on the largest eligible element.
        tab.refresh(&cost);
        let mut r = 0;
        while r < tab.rows.len() {
            if is_artificial(tab.basis[r]) {
                let col = (0..art_base)
                    .filter(|&j| tab.rows[r][j].abs() > 1e-7)
                    .max_by(|&a, &b| tab.rows[r][a].abs().total_cmp(&tab.rows[r][b].abs()));
                match col {
                    Some(col) => tab.pivot(r, col),
                    None => {
                        tab.rows.swap_remove(r);
                        tab.base.swap_remove(r);
                        tab.basis.swap_remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
    }

    // Phase two: the real objective, artificial columns barred.
    let mut cost = vec![0.0; n_cols];
    cost[..n].copy_from_slice(&lp.objective);
    tab.price(&cost);
    let status = tab.iterate(&cost, &|j| !is_artificial(j), max_iters)?;
    if status == LpStatus::Unbounded {
        return Ok(LpSolution {
            status,
            objective: f64::NEG_INFINITY,
            values: vec![0.0; n],
        });
    }

    let mut values = vec![0.0; n];
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < n {
            values[b] = tab.rhs(r);
        }
    }
    let objective = lp
        .objective
        .iter()
        .zip(&values)
        .map(|(c, v)| c * v)
        .sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective,
        values,
    })
}

fn effective_relation(rel: Relation, flipped: bool) -> Relation {
    if !flipped {
        return rel;
    }
    match rel {
        Relation::Le => Relation::Ge,
        Relation::Ge => Relation::Le,
        Relation::Eq => Relation::Eq,
    }
}
