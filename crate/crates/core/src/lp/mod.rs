//! Linear programs in equality form with variable bounds, and the simplex
//! kernel used for master problems, scenario subproblems and the extensive
//! form.
//!
//! Every row is an equality. Inequality rows are added through
//! [`LinearProgram::add_row`], which appends a dedicated slack column with
//! bounds `[0, +inf)`; the solver uses these slack columns as the initial
//! basis where they exist.

mod simplex;

use thiserror::Error;

pub use simplex::{
    FEASIBILITY_TOL, OPTIMALITY_TOL, PIVOT_TOL, DEGENERATE_PIVOTS_BEFORE_BLAND, REFACTOR_INTERVAL,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("iteration limit of {0} simplex pivots reached")]
    IterationLimit(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("solution status is {0:?}, expected Optimal")]
    NotOptimal(LpStatus),
}

/// Sense of a constraint row before it is turned into an equality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Eq,
    /// `a'x <= b`, stored as `a'x + s = b`.
    Le,
    /// `a'x >= b`, stored as `a'x - s = b`.
    Ge,
}

/// `min c'x  s.t.  A x = b,  l <= x <= u`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    slack: Vec<Option<usize>>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a column and returns its index.
    pub fn add_variable(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.cost.len() - 1
    }

    /// Adds `n` nonnegative columns sharing no structure, returning the index
    /// of the first.
    pub fn add_nonnegative(&mut self, costs: &[f64]) -> usize {
        let first = self.cost.len();
        for &c in costs {
            self.add_variable(c, 0.0, f64::INFINITY);
        }
        first
    }

    /// Adds a constraint row. Zero coefficients are dropped and repeated
    /// column indices are summed.
    ///
    /// Panics if an entry references a column that does not exist.
    pub fn add_row(&mut self, entries: &[(usize, f64)], relation: Relation, rhs: f64) -> usize {
        let row = self.rows.len();
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len() + 1);
        for &(j, a) in entries {
            assert!(j < self.cost.len(), "row entry references unknown column {j}");
            if a == 0.0 {
                continue;
            }
            match merged.iter_mut().find(|(k, _)| *k == j) {
                Some(e) => e.1 += a,
                None => merged.push((j, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        let slack = match relation {
            Relation::Eq => None,
            Relation::Le | Relation::Ge => {
                let s = self.add_variable(0.0, 0.0, f64::INFINITY);
                let sign = if relation == Relation::Le { 1.0 } else { -1.0 };
                merged.push((s, sign));
                Some(s)
            }
        };
        merged.sort_by_key(|&(j, _)| j);
        self.rows.push(merged);
        self.rhs.push(rhs);
        self.slack.push(slack);
        row
    }

    pub fn set_cost(&mut self, j: usize, cost: f64) {
        self.cost[j] = cost;
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Sparse entries of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// Slack column attached to row `i`, if it was added as an inequality.
    pub fn slack_of_row(&self, i: usize) -> Option<usize> {
        self.slack[i]
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn row_activity(&self, i: usize, x: &[f64]) -> f64 {
        self.rows[i].iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Dense copy of the constraint matrix, row-major.
    pub fn dense_matrix(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| {
                let mut dense = vec![0.0; self.num_vars()];
                for &(j, a) in r {
                    dense[j] = a;
                }
                dense
            })
            .collect()
    }

    pub fn check(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Malformed("bound vectors do not match column count".into()));
        }
        if self.rhs.len() != self.rows.len() {
            return Err(LpError::Malformed("rhs length does not match row count".into()));
        }
        for (j, &c) in self.cost.iter().enumerate() {
            if !c.is_finite() {
                return Err(LpError::Malformed(format!("cost of column {j} is {c}")));
            }
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY || l > u {
                return Err(LpError::Malformed(format!("column {j} has bounds [{l}, {u}]")));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !self.rhs[i].is_finite() {
                return Err(LpError::Malformed(format!("rhs of row {i} is {}", self.rhs[i])));
            }
            if let Some(&(j, a)) = row.iter().find(|(j, a)| *j >= n || !a.is_finite()) {
                return Err(LpError::Malformed(format!("row {i} has entry ({j}, {a})")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal values for every column, slacks included. For `Infeasible` and
    /// `Unbounded` this is the last iterate.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Equality-row multipliers `y = c_B' B^-1`, present iff optimal. For a
    /// problem with all variables nonnegative and nonbasic at zero,
    /// `y'b` equals the optimal objective.
    pub duals: Option<Vec<f64>>,
    /// Row multipliers `s` with `s'b > max { s'Ax : l <= x <= u }`, present
    /// iff infeasible.
    pub farkas: Option<Vec<f64>>,
}

/// Solves the program with the two-phase bounded revised simplex method.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.check()?;
    simplex::Simplex::new(lp).solve()
}

/// Residuals of the optimality conditions for a candidate solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.complementarity)
    }
}

/// Reduced costs `c - A'y` for the given row multipliers.
pub fn reduced_costs(lp: &LinearProgram, y: &[f64]) -> Vec<f64> {
    let mut d = lp.cost.clone();
    for (i, row) in lp.rows.iter().enumerate() {
        for &(j, a) in row {
            d[j] -= a * y[i];
        }
    }
    d
}

/// Checks primal feasibility, dual sign feasibility and complementary
/// slackness of an optimal solution.
pub fn verify_kkt(lp: &LinearProgram, sol: &LpSolution) -> Result<KktReport, LpError> {
    let y = match (&sol.status, &sol.duals) {
        (LpStatus::Optimal, Some(y)) => y,
        (status, _) => return Err(LpError::NotOptimal(*status)),
    };
    if sol.x.len() != lp.num_vars() || y.len() != lp.num_rows() {
        return Err(LpError::Malformed("solution dimensions do not match program".into()));
    }
    let x = &sol.x;
    let mut primal: f64 = 0.0;
    for i in 0..lp.num_rows() {
        primal = primal.max((lp.row_activity(i, x) - lp.rhs[i]).abs());
    }
    for j in 0..lp.num_vars() {
        primal = primal.max(lp.lower[j] - x[j]).max(x[j] - lp.upper[j]);
    }

    let d = reduced_costs(lp, y);
    let mut dual: f64 = 0.0;
    let mut comp: f64 = 0.0;
    for j in 0..lp.num_vars() {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        let viol = match (l.is_finite(), u.is_finite()) {
            (false, false) => d[j].abs(),
            (true, false) => (-d[j]).max(0.0),
            (false, true) => d[j].max(0.0),
            (true, true) => 0.0,
        };
        dual = dual.max(viol);
        if d[j] > 0.0 && l.is_finite() {
            comp = comp.max(d[j] * (x[j] - l).abs());
        } else if d[j] < 0.0 && u.is_finite() {
            comp = comp.max(-d[j] * (u - x[j]).abs());
        }
    }
    Ok(KktReport { primal, dual, complementarity: comp })
}

/// Value of the Lagrangian dual bound `y'b + sum_j min_{l<=x<=u} d_j x_j`.
///
/// Returns `-inf` when some reduced cost points toward an infinite bound.
pub fn dual_bound(lp: &LinearProgram, y: &[f64]) -> f64 {
    let d = reduced_costs(lp, y);
    let mut value: f64 = y.iter().zip(&lp.rhs).map(|(a, b)| a * b).sum();
    for (j, &dj) in d.iter().enumerate() {
        if dj > 0.0 {
            value += dj * lp.lower[j];
        } else if dj < 0.0 {
            value += dj * lp.upper[j];
        }
    }
    value
}

/// Margin by which row multipliers `s` certify infeasibility:
/// `s'b - max { s'Ax : l <= x <= u }`. Positive means the certificate is valid.
pub fn farkas_margin(lp: &LinearProgram, s: &[f64]) -> f64 {
    let mut sa = vec![0.0; lp.num_vars()];
    for (i, row) in lp.rows.iter().enumerate() {
        for &(j, a) in row {
            sa[j] += s[i] * a;
        }
    }
    let mut best = 0.0;
    for (j, &v) in sa.iter().enumerate() {
        if v > 0.0 {
            best += v * lp.upper[j];
        } else if v < 0.0 {
            best += v * lp.lower[j];
        }
    }
    let sb: f64 = s.iter().zip(&lp.rhs).map(|(a, b)| a * b).sum();
    sb - best
}
