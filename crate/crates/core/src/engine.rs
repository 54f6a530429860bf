//! The L-shaped iteration with configurable cut aggregation.
//!
//! The master keeps one free theta column per unit (scenario, or granule
//! under granulated aggregation):
//!
//! ```text
//! min  c'x + sum_{covered u} theta_u
//! s.t. A x = b
//!      g_a . x + sum_{u in S_a} theta_u >= q_a      optimality rows
//!      d_f . x >= e_f                              feasibility rows
//!      x >= 0
//! ```
//!
//! A theta column enters the objective once some cut covers it; until every
//! column is covered there is no finite lower bound.

use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::{apply_scheme, granulate, AggregationError, AggregationScheme};
use crate::cuts::{make_feasibility_cut, make_optimality_cut, CutError, OptimalityCut, VIOLATION_TOL};
use crate::lp::{solve_lp, LinearProgram, LpError, LpStatus, Relation};
use crate::problem::{dot, validate_problem, TwoStageProblem};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid problem: {}", .0.join("; "))]
    InvalidProblem(Vec<String>),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Scheme(#[from] AggregationError),
    #[error(transparent)]
    Cut(#[from] CutError),
    #[error("LP failure: {0}")]
    Lp(#[from] LpError),
    #[error("master problem is unbounded at iteration {0}")]
    UnboundedMaster(usize),
    #[error("subproblem {scenario} is unbounded")]
    UnboundedSubproblem { scenario: usize },
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("baseline run did not converge")]
    NotConverged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub rel_tol: f64,
    /// Relative violation threshold for adding a cut.
    pub violation_tol: f64,
    pub max_iterations: usize,
    pub workers: usize,
    pub scheme: AggregationScheme,
    /// Keep every added optimality cut in the report.
    pub record_cuts: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-2,
            violation_tol: VIOLATION_TOL,
            max_iterations: 5000,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            scheme: AggregationScheme::MultiCut,
            record_cuts: false,
        }
    }
}

impl EngineConfig {
    pub fn with_scheme(scheme: AggregationScheme) -> Self {
        Self { scheme, ..Self::default() }
    }

    fn validate(&self) -> Result<(), EngineError> {
        if !(self.rel_tol > 0.0) {
            return Err(EngineError::InvalidConfig(format!("rel_tol = {} must be positive", self.rel_tol)));
        }
        if !(self.violation_tol >= 0.0) {
            return Err(EngineError::InvalidConfig(format!("violation_tol = {} must be nonnegative", self.violation_tol)));
        }
        if self.workers == 0 {
            return Err(EngineError::InvalidConfig("workers must be at least 1".into()));
        }
        self.scheme.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    IterationLimit,
    MasterInfeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub x: Vec<f64>,
    /// `c'x_k + sum theta`, absent while some theta is uncovered.
    pub lower: Option<f64>,
    /// `c'x_k + Q(x_k)`, absent when some scenario was infeasible.
    pub upper: Option<f64>,
    pub cuts_added: usize,
    /// Unit cuts and aggregates dropped as already satisfied.
    pub cuts_skipped: usize,
    pub feasibility_cuts: usize,
    /// Member sets of the optimality rows added, in master theta indices.
    pub partition_used: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `N_I`.
    pub iterations: usize,
    /// `N_C`: optimality rows in the master at termination.
    pub cuts: usize,
    /// `N_T`.
    pub time_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub scheme: String,
    pub x_star: Option<Vec<f64>>,
    pub objective: Option<f64>,
    pub history: Vec<IterationRecord>,
    pub metrics: Metrics,
    /// Optimality cuts added, with members as scenario indices; empty
    /// unless recording was requested.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cuts: Vec<OptimalityCut>,
}

impl SolveReport {
    pub fn final_gap(&self) -> Option<f64> {
        let upper = self.objective?;
        let lower = self.history.iter().rev().find_map(|r| r.lower)?;
        Some((upper - lower) / upper.abs().max(1.0))
    }
}

/// Outcome of one scenario subproblem.
#[derive(Debug, Clone, PartialEq)]
pub enum SubproblemResult {
    /// Unweighted `Q_s(x)` with equality duals satisfying
    /// `lambda'(h - T x) = Q_s(x)`.
    Optimal { value: f64, lambda: Vec<f64> },
    /// Ray with `sigma'W <= 0` and `sigma'(h - T x) > 0`.
    Infeasible { sigma: Vec<f64> },
}

/// `min q_s'y  s.t.  W y = h_s - T_s x,  y >= 0`.
pub fn solve_subproblem(p: &TwoStageProblem, s: usize, x: &[f64]) -> Result<SubproblemResult, EngineError> {
    let sc = &p.scenarios[s];
    let tx = sc.t.mul_vec(x);
    let mut lp = LinearProgram::new();
    lp.add_nonnegative(&sc.q);
    for i in 0..p.q_rows() {
        let entries: Vec<(usize, f64)> = p.recourse.row(i).iter().copied().enumerate().collect();
        lp.add_row(&entries, Relation::Eq, sc.h[i] - tx[i]);
    }
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(SubproblemResult::Optimal {
            value: sol.objective,
            lambda: sol.duals.expect("optimal solution carries duals"),
        }),
        LpStatus::Infeasible => Ok(SubproblemResult::Infeasible { sigma: sol.farkas.expect("infeasible solution carries a certificate") }),
        LpStatus::Unbounded => Err(EngineError::UnboundedSubproblem { scenario: s }),
    }
}

/// `c'x + sum_s pi_s Q_s(x)`, or `None` if some scenario is infeasible.
pub fn evaluate_objective(p: &TwoStageProblem, x: &[f64]) -> Result<Option<f64>, EngineError> {
    let mut total = dot(&p.first.c, x);
    for (s, sc) in p.scenarios.iter().enumerate() {
        match solve_subproblem(p, s, x)? {
            SubproblemResult::Optimal { value, .. } => total += sc.probability * value,
            SubproblemResult::Infeasible { .. } => return Ok(None),
        }
    }
    Ok(Some(total))
}

struct Master {
    lp: LinearProgram,
    n: usize,
    covered: Vec<bool>,
    uncovered: usize,
    optimality_rows: usize,
}

impl Master {
    fn new(p: &TwoStageProblem, units: usize) -> Self {
        let mut lp = LinearProgram::new();
        lp.add_nonnegative(&p.first.c);
        for _ in 0..units {
            lp.add_variable(0.0, f64::NEG_INFINITY, f64::INFINITY);
        }
        for i in 0..p.first.p() {
            let entries: Vec<(usize, f64)> = p.first.a.row(i).iter().copied().enumerate().collect();
            lp.add_row(&entries, Relation::Eq, p.first.b[i]);
        }
        Self { lp, n: p.n(), covered: vec![false; units], uncovered: units, optimality_rows: 0 }
    }

    fn add_optimality(&mut self, cut: &OptimalityCut) {
        let mut entries: Vec<(usize, f64)> = cut.grad.iter().copied().enumerate().collect();
        for &u in &cut.members {
            entries.push((self.n + u, 1.0));
            if !self.covered[u] {
                self.covered[u] = true;
                self.uncovered -= 1;
                self.lp.set_cost(self.n + u, 1.0);
            }
        }
        self.lp.add_row(&entries, Relation::Ge, cut.offset);
        self.optimality_rows += 1;
    }

    fn add_feasibility(&mut self, grad: &[f64], offset: f64) {
        let entries: Vec<(usize, f64)> = grad.iter().copied().enumerate().collect();
        self.lp.add_row(&entries, Relation::Ge, offset);
    }
}

fn is_violated(cut: &OptimalityCut, x: &[f64], theta: &[f64], tol: f64) -> Result<bool, CutError> {
    Ok(cut.violation(x, theta)? > tol * (1.0 + cut.offset.abs()))
}

/// Member sets in scenario indices for a cut over units.
fn to_scenarios(cut: &OptimalityCut, scheme: &AggregationScheme, n: usize) -> OptimalityCut {
    let mut c = cut.clone();
    if let AggregationScheme::Granulated { t0, .. } = scheme {
        c.members = cut.members.iter().flat_map(|&g| g * t0..((g + 1) * t0).min(n)).collect();
    }
    c
}

pub fn solve_lshaped(p: &TwoStageProblem, cfg: &EngineConfig) -> Result<SolveReport, EngineError> {
    let start = Instant::now();
    let violations = validate_problem(p);
    if !violations.is_empty() {
        return Err(EngineError::InvalidProblem(violations));
    }
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| EngineError::Pool(e.to_string()))?;
    let n_scen = p.num_scenarios();
    let units = cfg.scheme.theta_count(n_scen);
    let unit_scheme = cfg.scheme.unit_scheme();
    let mut master = Master::new(p, units);
    let mut history = Vec::new();
    let mut recorded = Vec::new();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut status = SolveStatus::IterationLimit;

    for k in 1..=cfg.max_iterations {
        let sol = solve_lp(&master.lp)?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                status = SolveStatus::MasterInfeasible;
                break;
            }
            LpStatus::Unbounded => return Err(EngineError::UnboundedMaster(k)),
        }
        let x = sol.x[..p.n()].to_vec();
        let theta = &sol.x[p.n()..];
        let lower = (master.uncovered == 0).then_some(sol.objective);

        let results: Vec<Result<SubproblemResult, EngineError>> =
            pool.install(|| (0..n_scen).into_par_iter().map(|s| solve_subproblem(p, s, &x)).collect());
        let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;

        let mut record = IterationRecord {
            k,
            x: x.clone(),
            lower,
            upper: None,
            cuts_added: 0,
            cuts_skipped: 0,
            feasibility_cuts: 0,
            partition_used: Vec::new(),
        };

        if results.iter().any(|r| matches!(r, SubproblemResult::Infeasible { .. })) {
            for (s, r) in results.iter().enumerate() {
                if let SubproblemResult::Infeasible { sigma } = r {
                    let f = make_feasibility_cut(s, sigma, &p.scenarios[s], &p.recourse)?;
                    master.add_feasibility(&f.grad, f.offset);
                    record.feasibility_cuts += 1;
                }
            }
            log::debug!("iteration {k}: {} feasibility cuts", record.feasibility_cuts);
            history.push(record);
            continue;
        }

        let mut upper = dot(&p.first.c, &x);
        let mut singles = Vec::with_capacity(n_scen);
        for (s, r) in results.iter().enumerate() {
            let SubproblemResult::Optimal { value, lambda } = r else { unreachable!() };
            upper += p.scenarios[s].probability * value;
            singles.push(make_optimality_cut(s, lambda, &p.scenarios[s], k)?);
        }
        record.upper = Some(upper);
        if best.as_ref().is_none_or(|(b, _)| upper < *b) {
            best = Some((upper, x.clone()));
        }

        let unit_cuts = match &cfg.scheme {
            AggregationScheme::Granulated { t0, .. } => granulate(&singles, *t0)?,
            _ => singles,
        };
        let needed = |c: &OptimalityCut| -> Result<bool, CutError> {
            Ok(c.members.iter().any(|&u| !master.covered[u]) || is_violated(c, &x, theta, cfg.violation_tol)?)
        };
        let mut survivors = Vec::with_capacity(unit_cuts.len());
        for c in unit_cuts {
            if needed(&c)? {
                survivors.push(c);
            } else {
                record.cuts_skipped += 1;
            }
        }
        let aggregates = apply_scheme(unit_scheme, &survivors, units)?;
        let mut keep = Vec::with_capacity(aggregates.len());
        for c in aggregates {
            if needed(&c)? {
                keep.push(c);
            } else {
                record.cuts_skipped += 1;
            }
        }
        for c in &keep {
            master.add_optimality(c);
            record.partition_used.push(c.members.iter().copied().collect());
            if cfg.record_cuts {
                recorded.push(to_scenarios(c, &cfg.scheme, n_scen));
            }
        }
        record.cuts_added = keep.len();
        let upper_best = best.as_ref().map(|b| b.0).expect("set above");
        let converged = match lower {
            Some(l) => (upper_best - l) / upper_best.abs().max(1.0) <= cfg.rel_tol,
            None => false,
        } || record.cuts_added == 0;
        log::debug!(
            "iteration {k}: lower {:?} upper {upper} best {upper_best} added {} skipped {}",
            lower,
            record.cuts_added,
            record.cuts_skipped
        );
        history.push(record);
        if converged {
            status = SolveStatus::Converged;
            break;
        }
    }

    let (objective, x_star) = match (&status, best) {
        (SolveStatus::MasterInfeasible, _) | (_, None) => (None, None),
        (_, Some((v, x))) => (Some(v), Some(x)),
    };
    let metrics = Metrics {
        iterations: history.len(),
        cuts: master.optimality_rows,
        time_seconds: start.elapsed().as_secs_f64(),
    };
    log::info!("{} after {} iterations, {} cuts", cfg.scheme, metrics.iterations, metrics.cuts);
    Ok(SolveReport {
        status,
        scheme: cfg.scheme.to_string(),
        x_star,
        objective,
        history,
        metrics,
        cuts: recorded,
    })
}

/// Relative complexities against the multi-cut and single-cut baselines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeComplexities {
    pub rel_cut: f64,
    pub rel_iter: f64,
    pub rel_time: f64,
}

pub fn compute_relative_complexities(run: &Metrics, multi: &Metrics, single: &Metrics) -> RelativeComplexities {
    RelativeComplexities {
        rel_cut: run.cuts as f64 / multi.cuts as f64,
        rel_iter: run.iterations as f64 / single.iterations as f64,
        rel_time: run.time_seconds / single.time_seconds,
    }
}

/// [`compute_relative_complexities`] on reports, requiring convergence.
pub fn relative_to_baselines(run: &SolveReport, multi: &SolveReport, single: &SolveReport) -> Result<RelativeComplexities, EngineError> {
    if [run, multi, single].iter().any(|r| r.status != SolveStatus::Converged) {
        return Err(EngineError::NotConverged);
    }
    Ok(compute_relative_complexities(&run.metrics, &multi.metrics, &single.metrics))
}

/// Scenario index sets covered by each unit index.
pub fn unit_members(scheme: &AggregationScheme, n: usize) -> Vec<BTreeSet<usize>> {
    (0..scheme.theta_count(n))
        .map(|u| to_scenarios(&OptimalityCut::singleton(u, vec![], 0.0, 0), scheme, n).members)
        .collect()
}
