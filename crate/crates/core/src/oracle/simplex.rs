//! A small dense two-phase simplex solver with Bland's anti-cycling rule.
//!
//! Built for desk-scale ground-truth work (a few hundred variables at most):
//! correctness and verifiability over speed. The returned solution is
//! re-checked for feasibility against the original problem, and optimality is
//! certified by termination with nonnegative reduced costs.

use ndarray::Array1;

use crate::error::{Result, VerifierError};

/// `minimize objective · x` subject to inequality rows `a · x ≤ rhs`,
/// equality rows `a · x = rhs`, and per-variable interval bounds (entries may
/// be ±∞).
#[derive(Debug, Clone)]
pub struct LPProblem {
    pub objective: Array1<f64>,
    pub ineq: Vec<(Array1<f64>, f64)>,
    pub eq: Vec<(Array1<f64>, f64)>,
    pub var_bounds: Vec<(f64, f64)>,
}

impl LPProblem {
    /// A problem with free variables and no rows yet.
    pub fn new(num_vars: usize) -> Self {
        Self {
            objective: Array1::zeros(num_vars),
            ineq: Vec::new(),
            eq: Vec::new(),
            var_bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if n == 0 {
            return Err(VerifierError::Lp("zero-variable problem".into()));
        }
        if self.var_bounds.len() != n {
            return Err(VerifierError::Lp("bound arity mismatch".into()));
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(VerifierError::Lp("non-finite objective".into()));
        }
        for (a, r) in self.ineq.iter().chain(&self.eq) {
            if a.len() != n {
                return Err(VerifierError::Lp("row arity mismatch".into()));
            }
            if a.iter().any(|v| !v.is_finite()) || !r.is_finite() {
                return Err(VerifierError::Lp("non-finite row".into()));
            }
        }
        for &(lo, hi) in &self.var_bounds {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(VerifierError::Lp(format!("bad variable bounds [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal objective value (meaningless when infeasible).
    pub value: f64,
    /// Optimal point in the original variable space.
    pub x: Array1<f64>,
}

const PIVOT_TOL: f64 = 1e-10;
const COST_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-8;
const MAX_PIVOTS: usize = 1_000_000;

/// How each original variable maps to the nonnegative standard-form columns.
enum VarMap {
    /// x = offset + x'_col
    Shift { col: usize, offset: f64 },
    /// x = offset − x'_col (used when only an upper bound exists)
    NegShift { col: usize, offset: f64 },
    /// x = x'_pos − x'_neg (free variable)
    Split { pos: usize, neg: usize },
}

pub fn simplex_solve(lp: &LPProblem) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.num_vars();

    // --- Standard-form conversion: all variables become nonnegative. ---
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0usize;
    // extra rows x'_col ≤ hi − lo for doubly-bounded variables
    let mut extra_ineq: Vec<(usize, f64)> = Vec::new();
    for &(lo, hi) in &lp.var_bounds {
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => {
                maps.push(VarMap::Shift {
                    col: ncols,
                    offset: lo,
                });
                extra_ineq.push((ncols, hi - lo));
                ncols += 1;
            }
            (true, false) => {
                maps.push(VarMap::Shift {
                    col: ncols,
                    offset: lo,
                });
                ncols += 1;
            }
            (false, true) => {
                maps.push(VarMap::NegShift {
                    col: ncols,
                    offset: hi,
                });
                ncols += 1;
            }
            (false, false) => {
                maps.push(VarMap::Split {
                    pos: ncols,
                    neg: ncols + 1,
                });
                ncols += 2;
            }
        }
    }

    let translate_row = |a: &Array1<f64>, rhs: f64| -> (Vec<f64>, f64) {
        let mut row = vec![0.0; ncols];
        let mut r = rhs;
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            match maps[i] {
                VarMap::Shift { col, offset } => {
                    row[col] += ai;
                    r -= ai * offset;
                }
                VarMap::NegShift { col, offset } => {
                    row[col] -= ai;
                    r -= ai * offset;
                }
                VarMap::Split { pos, neg } => {
                    row[pos] += ai;
                    row[neg] -= ai;
                }
            }
        }
        (row, r)
    };

    // Assemble rows: inequalities first (each gets a slack), then equalities.
    let num_ineq = lp.ineq.len() + extra_ineq.len();
    let num_rows = num_ineq + lp.eq.len();
    let total_cols = ncols + num_ineq; // + artificials appended below
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(num_rows);
    for (a, rhs) in &lp.ineq {
        let (mut row, r) = translate_row(a, *rhs);
        row.resize(total_cols, 0.0);
        let k = rows.len();
        row[ncols + k] = 1.0; // slack
        rows.push((row, r));
    }
    for &(col, ub) in &extra_ineq {
        let mut row = vec![0.0; total_cols];
        row[col] = 1.0;
        let k = rows.len();
        row[ncols + k] = 1.0; // slack
        rows.push((row, ub));
    }
    for (a, rhs) in &lp.eq {
        let (mut row, r) = translate_row(a, *rhs);
        row.resize(total_cols, 0.0);
        rows.push((row, r));
    }

    // Normalize to nonnegative right-hand sides and pick the initial basis:
    // a +1 slack where available, an artificial column otherwise.
    let mut tableau: Vec<Vec<f64>> = Vec::with_capacity(num_rows);
    let mut rhs_col: Vec<f64> = Vec::with_capacity(num_rows);
    let mut basis: Vec<usize> = Vec::with_capacity(num_rows);
    let mut artificial_cols: Vec<usize> = Vec::new();
    let mut pending_artificial: Vec<usize> = Vec::new(); // row indices
    for (idx, (mut row, mut r)) in rows.into_iter().enumerate() {
        if r < 0.0 {
            for v in &mut row {
                *v = -*v;
            }
            r = -r;
        }
        let slack = if idx < num_ineq { Some(ncols + idx) } else { None };
        match slack {
            Some(s) if row[s] > 0.5 => basis.push(s),
            _ => {
                // artificial column index assigned after we know the final width
                basis.push(usize::MAX);
                pending_artificial.push(idx);
            }
        }
        tableau.push(row);
        rhs_col.push(r);
    }
    let width = total_cols + pending_artificial.len();
    for row in &mut tableau {
        row.resize(width, 0.0);
    }
    for (k, &ri) in pending_artificial.iter().enumerate() {
        let col = total_cols + k;
        tableau[ri][col] = 1.0;
        basis[ri] = col;
        artificial_cols.push(col);
    }

    let mut t = Tableau {
        rows: tableau,
        rhs: rhs_col,
        basis,
        width,
    };

    // --- Phase 1: minimize the artificial sum. ---
    if !artificial_cols.is_empty() {
        let mut cost = vec![0.0; width];
        for &c in &artificial_cols {
            cost[c] = 1.0;
        }
        t.run(&cost, &|_| true)?;
        let infeasibility: f64 = t
            .basis
            .iter()
            .zip(&t.rhs)
            .filter(|(b, _)| **b >= total_cols)
            .map(|(_, r)| r)
            .sum();
        if infeasibility > PHASE1_TOL {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                value: f64::NAN,
                x: Array1::zeros(n),
            });
        }
        // Drive remaining artificials out of the basis; rows that cannot
        // pivot are redundant combinations of other rows and are dropped.
        let mut r = 0;
        while r < t.rows.len() {
            if t.basis[r] >= total_cols {
                let pivot_col = (0..total_cols).find(|&j| t.rows[r][j].abs() > PIVOT_TOL);
                match pivot_col {
                    Some(j) => t.pivot(r, j),
                    None => {
                        t.rows.remove(r);
                        t.rhs.remove(r);
                        t.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
    }

    // --- Phase 2: minimize the real objective; artificials barred. ---
    let mut cost = vec![0.0; width];
    for (i, &ci) in lp.objective.iter().enumerate() {
        if ci == 0.0 {
            continue;
        }
        match maps[i] {
            VarMap::Shift { col, .. } => cost[col] += ci,
            VarMap::NegShift { col, .. } => cost[col] -= ci,
            VarMap::Split { pos, neg } => {
                cost[pos] += ci;
                cost[neg] -= ci;
            }
        }
    }
    t.run(&cost, &|j| j < total_cols)?;

    // --- Recover x, re-check it, and evaluate the objective exactly. ---
    let mut xprime = vec![0.0; width];
    for (r, &b) in t.basis.iter().enumerate() {
        xprime[b] = t.rhs[r];
    }
    let mut x = Array1::zeros(n);
    for (i, m) in maps.iter().enumerate() {
        x[i] = match *m {
            VarMap::Shift { col, offset } => offset + xprime[col],
            VarMap::NegShift { col, offset } => offset - xprime[col],
            VarMap::Split { pos, neg } => xprime[pos] - xprime[neg],
        };
    }
    check_feasible(lp, &x)?;
    let value = lp.objective.dot(&x);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        value,
        x,
    })
}

/// Feasibility re-check of a claimed solution, tolerance 1e-9 (scaled by the
/// row's right-hand side so large, well-conditioned rows aren't punished).
fn check_feasible(lp: &LPProblem, x: &Array1<f64>) -> Result<()> {
    let tol = |r: f64| 1e-9 * (1.0 + r.abs());
    for (i, &(lo, hi)) in lp.var_bounds.iter().enumerate() {
        if x[i] < lo - tol(lo) || x[i] > hi + tol(hi) {
            return Err(VerifierError::Lp(format!(
                "solution violates bounds of variable {i}: {} ∉ [{lo}, {hi}]",
                x[i]
            )));
        }
    }
    for (k, (a, r)) in lp.ineq.iter().enumerate() {
        let v = a.dot(x);
        if v > r + tol(*r) {
            return Err(VerifierError::Lp(format!(
                "solution violates inequality {k}: {v} > {r}"
            )));
        }
    }
    for (k, (a, r)) in lp.eq.iter().enumerate() {
        let v = a.dot(x);
        if (v - r).abs() > tol(*r) {
            return Err(VerifierError::Lp(format!(
                "solution violates equality {k}: {v} ≠ {r}"
            )));
        }
    }
    Ok(())
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        debug_assert!(p.abs() > 0.0);
        let inv = 1.0 / p;
        for v in &mut self.rows[r] {
            *v *= inv;
        }
        self.rhs[r] *= inv;
        // exact unit pivot column keeps later index tests clean
        self.rows[r][c] = 1.0;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r];
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][c];
            if f == 0.0 {
                continue;
            }
            for (v, pv) in self.rows[i].iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.rows[i][c] = 0.0;
            self.rhs[i] -= f * pivot_rhs;
        }
        self.basis[r] = c;
    }

    /// Bland-rule simplex iterations for the given cost vector, restricted to
    /// columns passing `allowed`. Terminates at optimality (all reduced costs
    /// ≥ −tol) or fails loudly on unboundedness / the pivot cap.
    fn run(&mut self, cost: &[f64], allowed: &dyn Fn(usize) -> bool) -> Result<()> {
        for _ in 0..MAX_PIVOTS {
            // reduced costs: c_j − c_B · (tableau column j)
            let entering = (0..self.width)
                .filter(|&j| allowed(j) && !self.basis.contains(&j))
                .find(|&j| {
                    let mut red = cost[j];
                    for (i, row) in self.rows.iter().enumerate() {
                        let cb = cost[self.basis[i]];
                        if cb != 0.0 {
                            red -= cb * row[j];
                        }
                    }
                    red < -COST_TOL
                });
            let Some(col) = entering else {
                return Ok(());
            };
            // ratio test; Bland tie-break on the smallest basic index
            let mut best: Option<(f64, usize, usize)> = None; // (ratio, basis var, row)
            for i in 0..self.rows.len() {
                let a = self.rows[i][col];
                if a > PIVOT_TOL {
                    let ratio = self.rhs[i] / a;
                    let key = (ratio, self.basis[i]);
                    if best.is_none_or(|(br, bb, _)| key < (br, bb)) {
                        best = Some((ratio, self.basis[i], i));
                    }
                }
            }
            let Some((_, _, row)) = best else {
                return Err(VerifierError::Lp(
                    "unbounded objective in simplex (malformed encoding)".into(),
                ));
            };
            self.pivot(row, col);
        }
        Err(VerifierError::Lp(format!(
            "pivot cap of {MAX_PIVOTS} exceeded"
        )))
    }
}
