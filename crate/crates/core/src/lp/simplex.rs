use super::{LinearProgram, LpError, LpSolution, LpStatus};

/// Largest bound violation of a basic variable treated as feasible.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Smallest reduced-cost magnitude that qualifies a column for entry.
pub const OPTIMALITY_TOL: f64 = 1e-9;
/// Smallest pivot element accepted in the ratio test.
pub const PIVOT_TOL: f64 = 1e-11;
/// Consecutive degenerate pivots after which Bland's rule takes over.
pub const DEGENERATE_PIVOTS_BEFORE_BLAND: usize = 50;
/// Pivots between refactorizations of the basis inverse.
pub const REFACTOR_INTERVAL: usize = 100;

const NOT_BASIC: usize = usize::MAX;
const DEGENERATE_STEP: f64 = 1e-12;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

enum StepResult {
    Moved,
    Unbounded,
}

/// Dense explicit-inverse revised simplex over the columns of `lp` plus one
/// fixed artificial column per row that has no slack.
pub(super) struct Simplex<'a> {
    lp: &'a LinearProgram,
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    head: Vec<usize>,
    pos: Vec<usize>,
    x: Vec<f64>,
    /// Row-major `m x m` basis inverse.
    binv: Vec<f64>,
    since_refactor: usize,
    degenerate_streak: usize,
    bland: bool,
    pivots: usize,
    pivot_cap: usize,
}

impl<'a> Simplex<'a> {
    pub(super) fn new(lp: &'a LinearProgram) -> Self {
        let m = lp.num_rows();
        let n = lp.num_vars();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, a) in row {
                cols[j].push((i, a));
            }
        }
        let mut cost = lp.cost.clone();
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        let mut head = vec![NOT_BASIC; m];
        for i in 0..m {
            // A slack is usable as a starting basic column only when it is a
            // singleton column in its own row.
            if let Some(s) = lp.slack[i] {
                if cols[s].len() == 1 {
                    head[i] = s;
                    continue;
                }
            }
            let a = cols.len();
            cols.push(vec![(i, 1.0)]);
            cost.push(0.0);
            lower.push(0.0);
            upper.push(0.0);
            head[i] = a;
        }
        let total = cols.len();
        let mut pos = vec![NOT_BASIC; total];
        for (i, &j) in head.iter().enumerate() {
            pos[j] = i;
        }
        let x = (0..total)
            .map(|j| {
                if lower[j].is_finite() {
                    lower[j]
                } else if upper[j].is_finite() {
                    upper[j]
                } else {
                    0.0
                }
            })
            .collect();
        Self {
            lp,
            m,
            cols,
            cost,
            lower,
            upper,
            head,
            pos,
            x,
            binv: Vec::new(),
            since_refactor: 0,
            degenerate_streak: 0,
            bland: false,
            pivots: 0,
            pivot_cap: 10_000 + 50 * (m + total),
        }
    }

    pub(super) fn solve(mut self) -> Result<LpSolution, LpError> {
        self.refactor()?;
        // A final refactorization can expose drift; a few restarts from the
        // current basis clean it up.
        for _ in 0..4 {
            if let Some(farkas) = self.phase_one()? {
                return Ok(self.finish(LpStatus::Infeasible, None, Some(farkas)));
            }
            match self.phase_two()? {
                StepResult::Unbounded => return Ok(self.finish(LpStatus::Unbounded, None, None)),
                StepResult::Moved => {}
            }
            self.refactor()?;
            if self.max_basic_infeasibility() <= FEASIBILITY_TOL * 10.0 {
                break;
            }
        }
        let y = self.btran(&self.basic_costs(Phase::Two));
        Ok(self.finish(LpStatus::Optimal, Some(y), None))
    }

    fn finish(&self, status: LpStatus, duals: Option<Vec<f64>>, farkas: Option<Vec<f64>>) -> LpSolution {
        let n = self.lp.num_vars();
        let x = self.x[..n].to_vec();
        let objective = self.lp.objective_value(&x);
        LpSolution { status, x, objective, duals, farkas }
    }

    /// Returns a Farkas certificate if the program is infeasible.
    fn phase_one(&mut self) -> Result<Option<Vec<f64>>, LpError> {
        self.bland = false;
        self.degenerate_streak = 0;
        loop {
            let c1 = self.basic_costs(Phase::One);
            if c1.iter().all(|&c| c == 0.0) {
                return Ok(None);
            }
            let y = self.btran(&c1);
            match self.price(&y, Phase::One) {
                None => return Ok(Some(y)),
                Some((q, dir)) => {
                    self.step(q, dir, Phase::One)?;
                }
            }
        }
    }

    fn phase_two(&mut self) -> Result<StepResult, LpError> {
        self.bland = false;
        self.degenerate_streak = 0;
        loop {
            let y = self.btran(&self.basic_costs(Phase::Two));
            match self.price(&y, Phase::Two) {
                None => return Ok(StepResult::Moved),
                Some((q, dir)) => {
                    if let StepResult::Unbounded = self.step(q, dir, Phase::Two)? {
                        return Ok(StepResult::Unbounded);
                    }
                }
            }
        }
    }

    fn basic_costs(&self, phase: Phase) -> Vec<f64> {
        self.head
            .iter()
            .map(|&j| match phase {
                Phase::Two => self.cost[j],
                Phase::One => {
                    if self.x[j] < self.lower[j] - FEASIBILITY_TOL {
                        -1.0
                    } else if self.x[j] > self.upper[j] + FEASIBILITY_TOL {
                        1.0
                    } else {
                        0.0
                    }
                }
            })
            .collect()
    }

    fn max_basic_infeasibility(&self) -> f64 {
        self.head
            .iter()
            .map(|&j| (self.lower[j] - self.x[j]).max(self.x[j] - self.upper[j]).max(0.0))
            .fold(0.0, f64::max)
    }

    /// `y' = c_B' B^-1`.
    fn btran(&self, cb: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &c) in cb.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let row = &self.binv[i * m..(i + 1) * m];
            for (yk, &b) in y.iter_mut().zip(row) {
                *yk += c * b;
            }
        }
        y
    }

    /// `B^-1 a_q`.
    fn ftran(&self, q: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for (i, ai) in alpha.iter_mut().enumerate() {
            let row = &self.binv[i * m..(i + 1) * m];
            *ai = self.cols[q].iter().map(|&(k, a)| row[k] * a).sum();
        }
        alpha
    }

    /// Chooses an entering column and its direction of motion (+1 increase,
    /// -1 decrease).
    fn price(&self, y: &[f64], phase: Phase) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.cols.len() {
            if self.pos[j] != NOT_BASIC || self.lower[j] == self.upper[j] {
                continue;
            }
            let c = if phase == Phase::Two { self.cost[j] } else { 0.0 };
            let d = c - self.cols[j].iter().map(|&(i, a)| y[i] * a).sum::<f64>();
            let at_lower = self.lower[j].is_finite() && self.x[j] <= self.lower[j];
            let at_upper = self.upper[j].is_finite() && self.x[j] >= self.upper[j];
            let dir = if d < -OPTIMALITY_TOL && !at_upper {
                1.0
            } else if d > OPTIMALITY_TOL && !at_lower {
                -1.0
            } else {
                continue;
            };
            if self.bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, _, score)| d.abs() > score) {
                best = Some((j, dir, d.abs()));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// Step length limit imposed by basic row `i` moving at `rate` per unit
    /// step, together with the bound it stops at. `slack` relaxes the bound
    /// for the Harris pass.
    fn row_limit(&self, i: usize, rate: f64, phase: Phase, slack: f64) -> Option<(f64, f64)> {
        let j = self.head[i];
        let (l, u, v) = (self.lower[j], self.upper[j], self.x[j]);
        if phase == Phase::One && v < l - FEASIBILITY_TOL {
            return (rate > 0.0).then(|| ((l - v) / rate, l));
        }
        if phase == Phase::One && v > u + FEASIBILITY_TOL {
            return (rate < 0.0).then(|| ((u - v) / rate, u));
        }
        if rate < 0.0 {
            l.is_finite().then(|| (((v - l) + slack) / -rate, l))
        } else {
            u.is_finite().then(|| (((u - v) + slack) / rate, u))
        }
    }

    fn step(&mut self, q: usize, dir: f64, phase: Phase) -> Result<StepResult, LpError> {
        self.pivots += 1;
        if self.pivots > self.pivot_cap {
            return Err(LpError::IterationLimit(self.pivot_cap));
        }
        let alpha = self.ftran(q);
        let flip = self.upper[q] - self.lower[q];

        let mut leave: Option<(usize, f64, f64)> = None; // (row, step, bound)
        if self.bland {
            for (i, &a) in alpha.iter().enumerate() {
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                if let Some((t, bound)) = self.row_limit(i, -dir * a, phase, 0.0) {
                    let t = t.max(0.0);
                    let better = match leave {
                        None => true,
                        Some((r, tb, _)) => {
                            t < tb - DEGENERATE_STEP
                                || (t <= tb + DEGENERATE_STEP && self.head[i] < self.head[r])
                        }
                    };
                    if better {
                        leave = Some((i, t, bound));
                    }
                }
            }
        } else {
            let mut bound_t = f64::INFINITY;
            for (i, &a) in alpha.iter().enumerate() {
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                if let Some((t, _)) = self.row_limit(i, -dir * a, phase, FEASIBILITY_TOL) {
                    bound_t = bound_t.min(t);
                }
            }
            if bound_t.is_finite() {
                let mut best_pivot = 0.0;
                for (i, &a) in alpha.iter().enumerate() {
                    if a.abs() <= PIVOT_TOL {
                        continue;
                    }
                    if let Some((t, bound)) = self.row_limit(i, -dir * a, phase, 0.0) {
                        if t <= bound_t && a.abs() > best_pivot {
                            best_pivot = a.abs();
                            leave = Some((i, t.max(0.0), bound));
                        }
                    }
                }
            }
        }

        let (t, pivot_row) = match leave {
            Some((r, t, bound)) if t < flip => (t, Some((r, bound))),
            _ if flip.is_finite() => (flip, None),
            _ => return Ok(StepResult::Unbounded),
        };

        if t <= DEGENERATE_STEP {
            self.degenerate_streak += 1;
            if self.degenerate_streak >= DEGENERATE_PIVOTS_BEFORE_BLAND {
                self.bland = true;
            }
        } else {
            self.degenerate_streak = 0;
        }

        self.x[q] += dir * t;
        for (i, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                self.x[self.head[i]] -= dir * t * a;
            }
        }
        match pivot_row {
            None => {
                // Bound flip: snap to the opposite bound exactly.
                self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
            }
            Some((r, bound)) => {
                let leaving = self.head[r];
                self.x[leaving] = bound;
                self.pivot(r, q, &alpha);
                self.since_refactor += 1;
                if self.since_refactor >= REFACTOR_INTERVAL {
                    self.refactor()?;
                }
            }
        }
        Ok(StepResult::Moved)
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64]) {
        let m = self.m;
        let inv_pivot = 1.0 / alpha[r];
        for v in &mut self.binv[r * m..(r + 1) * m] {
            *v *= inv_pivot;
        }
        let pivot_row = self.binv[r * m..(r + 1) * m].to_vec();
        for (i, &a) in alpha.iter().enumerate() {
            if i == r || a == 0.0 {
                continue;
            }
            let row = &mut self.binv[i * m..(i + 1) * m];
            for (v, &p) in row.iter_mut().zip(&pivot_row) {
                *v -= a * p;
            }
        }
        let leaving = self.head[r];
        self.pos[leaving] = NOT_BASIC;
        self.head[r] = q;
        self.pos[q] = r;
    }

    /// Recomputes the basis inverse by Gauss-Jordan elimination and the basic
    /// values from the nonbasic ones.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (k, &j) in self.head.iter().enumerate() {
            for &(i, v) in &self.cols[j] {
                a[i * m + k] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let p = (c..m)
                .max_by(|&r1, &r2| a[r1 * m + c].abs().total_cmp(&a[r2 * m + c].abs()).then(r2.cmp(&r1)))
                .unwrap();
            let pv = a[p * m + c];
            if pv.abs() < 1e-13 {
                return Err(LpError::Numerical(format!("singular basis at column {c}")));
            }
            if p != c {
                for k in 0..m {
                    a.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let s = 1.0 / pv;
            for k in c..m {
                a[c * m + k] *= s;
            }
            for k in 0..m {
                inv[c * m + k] *= s;
            }
            let prow: Vec<f64> = a[c * m + c..(c + 1) * m].to_vec();
            let pinv: Vec<f64> = inv[c * m..(c + 1) * m].to_vec();
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = a[r * m + c];
                if f == 0.0 {
                    continue;
                }
                for (v, &p) in a[r * m + c..(r + 1) * m].iter_mut().zip(&prow) {
                    *v -= f * p;
                }
                for (v, &p) in inv[r * m..(r + 1) * m].iter_mut().zip(&pinv) {
                    *v -= f * p;
                }
            }
        }
        // Column k of B is head[k], so row k of the inverse belongs to basic
        // position k.
        self.binv = inv;
        self.since_refactor = 0;

        let mut r = self.lp.rhs.clone();
        for j in 0..self.cols.len() {
            if self.pos[j] != NOT_BASIC || self.x[j] == 0.0 {
                continue;
            }
            for &(i, v) in &self.cols[j] {
                r[i] -= v * self.x[j];
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            self.x[self.head[i]] = row.iter().zip(&r).map(|(b, v)| b * v).sum();
        }
        Ok(())
    }
}
