//! Data model for two-stage stochastic linear programs
//!
//! ```text
//! min  c'x + sum_s pi_s q_s'y_s
//! s.t. A x = b
//!      T_s x + W y_s = h_s     s = 1..N
//!      x >= 0, y_s >= 0
//! ```
//!
//! together with discrete stochastic templates, scenario enumeration and
//! sampling, and the extensive form used as a correctness oracle.

use rand::{RngCore, SeedableRng};
use rand_xorshift::XorShiftRng;
use thiserror::Error;

use crate::lp::{LinearProgram, Relation};

/// Tolerance on the total scenario probability.
pub const PROBABILITY_TOL: f64 = 1e-9;
/// Default cap on the number of enumerated scenarios.
pub const DEFAULT_SCENARIO_CAP: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("invalid problem: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("scenario cross product has {size} elements, above the cap of {cap}")]
    TooManyScenarios { size: u128, cap: usize },
    #[error("sample size must be at least 1")]
    EmptySample,
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Builds a matrix from rows. `cols` is used when `rows` is empty and
    /// checked otherwise.
    pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> Result<Self, String> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(format!("row {i} has {} entries, expected {cols}", r.len()));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// `M v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `u' M`.
    pub fn left_mul(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &ui) in u.iter().enumerate() {
            if ui == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += ui * a;
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstStage {
    pub c: Vec<f64>,
    /// `p x n`.
    pub a: Matrix,
    pub b: Vec<f64>,
}

impl FirstStage {
    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn p(&self) -> usize {
        self.b.len()
    }
}

/// Second-stage data shared by a scenario and a template's nominal values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioData {
    pub q: Vec<f64>,
    pub t: Matrix,
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub probability: f64,
    pub q: Vec<f64>,
    /// Technology matrix, `rows(W) x n`.
    pub t: Matrix,
    pub h: Vec<f64>,
}

impl Scenario {
    pub fn from_data(probability: f64, data: ScenarioData) -> Self {
        Self { probability, q: data.q, t: data.t, h: data.h }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageProblem {
    pub name: String,
    pub first: FirstStage,
    /// Fixed recourse matrix `W`.
    pub recourse: Matrix,
    pub scenarios: Vec<Scenario>,
}

impl TwoStageProblem {
    pub fn n(&self) -> usize {
        self.first.n()
    }

    /// Number of second-stage variables.
    pub fn m(&self) -> usize {
        self.recourse.cols()
    }

    /// Number of second-stage rows.
    pub fn q_rows(&self) -> usize {
        self.recourse.rows()
    }

    pub fn num_scenarios(&self) -> usize {
        self.scenarios.len()
    }

    pub fn validate(&self) -> Vec<String> {
        validate_problem(self)
    }

    /// `c'x + sum_s pi_s q_s'y_s` evaluated directly from the data.
    pub fn objective_at(&self, x: &[f64], ys: &[Vec<f64>]) -> f64 {
        dot(&self.first.c, x)
            + self
                .scenarios
                .iter()
                .zip(ys)
                .map(|(s, y)| s.probability * dot(&s.q, y))
                .sum::<f64>()
    }
}

fn first_stage_violations(first: &FirstStage, out: &mut Vec<String>) {
    let n = first.n();
    if first.a.rows() != first.p() {
        out.push(format!("A has {} rows, expected {} (length of b)", first.a.rows(), first.p()));
    }
    if first.a.cols() != n {
        out.push(format!("A has {} columns, expected {n}", first.a.cols()));
    }
    if !first.c.iter().all(|v| v.is_finite()) || !first.b.iter().all(|v| v.is_finite()) || !first.a.is_finite() {
        out.push("first stage has non-finite entries".to_string());
    }
}

fn scenario_data_violations(label: &str, q: &[f64], t: &Matrix, h: &[f64], n: usize, w: &Matrix, out: &mut Vec<String>) {
    if q.len() != w.cols() {
        out.push(format!("{label} q has {} entries, expected {}", q.len(), w.cols()));
    }
    if t.cols() != n {
        out.push(format!("T[{label}] has {} columns, expected {n}", t.cols()));
    }
    if t.rows() != w.rows() {
        out.push(format!("T[{label}] has {} rows, expected {}", t.rows(), w.rows()));
    }
    if h.len() != w.rows() {
        out.push(format!("{label} h has {} entries, expected {}", h.len(), w.rows()));
    }
    if !q.iter().chain(h).all(|v| v.is_finite()) || !t.is_finite() {
        out.push(format!("{label} has non-finite entries"));
    }
}

/// Every dimension and probability violation; empty iff the problem is valid.
pub fn validate_problem(p: &TwoStageProblem) -> Vec<String> {
    let mut out = Vec::new();
    first_stage_violations(&p.first, &mut out);
    if !p.recourse.is_finite() {
        out.push("W has non-finite entries".to_string());
    }
    if p.scenarios.is_empty() {
        out.push("N >= 1 required".to_string());
    }
    let n = p.n();
    for (s, sc) in p.scenarios.iter().enumerate() {
        if !(sc.probability > 0.0 && sc.probability <= 1.0) {
            out.push(format!("scenario {s} has probability {}", sc.probability));
        }
        scenario_data_violations(&s.to_string(), &sc.q, &sc.t, &sc.h, n, &p.recourse, &mut out);
    }
    if !p.scenarios.is_empty() {
        let total: f64 = p.scenarios.iter().map(|s| s.probability).sum();
        if (total - 1.0).abs() > PROBABILITY_TOL {
            out.push(format!("probabilities sum to {total}"));
        }
    }
    out
}

/// Rescales scenario probabilities to sum to exactly one when they are
/// within [`PROBABILITY_TOL`]; leaves them untouched otherwise.
pub fn normalize_probabilities(p: &mut TwoStageProblem) -> bool {
    let total: f64 = p.scenarios.iter().map(|s| s.probability).sum();
    if (total - 1.0).abs() > PROBABILITY_TOL {
        return false;
    }
    if total != 1.0 {
        for s in &mut p.scenarios {
            s.probability /= total;
        }
    }
    true
}

/// One-based-agnostic coordinate a random entry overrides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RandomTarget {
    /// `h[row]`.
    Rhs { row: usize },
    /// `q[col]`.
    Cost { col: usize },
    /// `T[row, col]`.
    Technology { row: usize, col: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub value: f64,
    pub probability: f64,
}

/// A discrete random variable replacing one coordinate of the nominal data.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomEntry {
    pub target: RandomTarget,
    pub outcomes: Vec<Outcome>,
}

/// Deterministic skeleton plus independent discrete random entries.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticTemplate {
    pub name: String,
    pub first: FirstStage,
    pub recourse: Matrix,
    pub nominal: ScenarioData,
    pub random: Vec<RandomEntry>,
}

impl StochasticTemplate {
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        first_stage_violations(&self.first, &mut out);
        scenario_data_violations("nominal", &self.nominal.q, &self.nominal.t, &self.nominal.h, self.first.n(), &self.recourse, &mut out);
        let (rows, cols) = (self.recourse.rows(), self.recourse.cols());
        let n = self.first.n();
        for (k, e) in self.random.iter().enumerate() {
            let in_range = match e.target {
                RandomTarget::Rhs { row } => row < rows,
                RandomTarget::Cost { col } => col < cols,
                RandomTarget::Technology { row, col } => row < rows && col < n,
            };
            if !in_range {
                out.push(format!("random entry {k} targets {:?}, out of range", e.target));
            }
            if e.outcomes.is_empty() {
                out.push(format!("random entry {k} has no outcomes"));
            }
            let total: f64 = e.outcomes.iter().map(|o| o.probability).sum();
            if (total - 1.0).abs() > PROBABILITY_TOL {
                out.push(format!("random entry {k} probabilities sum to {total}"));
            }
            if e.outcomes.iter().any(|o| !o.value.is_finite() || !(o.probability > 0.0)) {
                out.push(format!("random entry {k} has an invalid outcome"));
            }
        }
        out
    }

    fn realize(&self, choice: impl Fn(usize) -> usize) -> ScenarioData {
        let mut data = self.nominal.clone();
        for (k, e) in self.random.iter().enumerate() {
            let v = e.outcomes[choice(k)].value;
            match e.target {
                RandomTarget::Rhs { row } => data.h[row] = v,
                RandomTarget::Cost { col } => data.q[col] = v,
                RandomTarget::Technology { row, col } => data.t.set(row, col, v),
            }
        }
        data
    }
}

/// Product of outcome counts, saturating instead of overflowing.
pub fn scenario_count(t: &StochasticTemplate) -> u128 {
    t.random
        .iter()
        .fold(1u128, |acc, e| acc.saturating_mul(e.outcomes.len() as u128))
}

/// Full cross product of the independent outcomes, ordered
/// lexicographically with the first random entry most significant.
pub fn enumerate_scenarios(t: &StochasticTemplate, cap: usize) -> Result<TwoStageProblem, ProblemError> {
    let violations = t.validate();
    if !violations.is_empty() {
        return Err(ProblemError::Invalid(violations));
    }
    let size = scenario_count(t);
    if size > cap as u128 {
        return Err(ProblemError::TooManyScenarios { size, cap });
    }
    let counts: Vec<usize> = t.random.iter().map(|e| e.outcomes.len()).collect();
    let mut idx = vec![0usize; counts.len()];
    let mut scenarios = Vec::with_capacity(size as usize);
    loop {
        let probability = t
            .random
            .iter()
            .zip(&idx)
            .map(|(e, &k)| e.outcomes[k].probability)
            .product();
        scenarios.push(Scenario::from_data(probability, t.realize(|k| idx[k])));
        // Odometer increment, last entry fastest.
        let mut pos = counts.len();
        loop {
            if pos == 0 {
                let mut p = TwoStageProblem {
                    name: t.name.clone(),
                    first: t.first.clone(),
                    recourse: t.recourse.clone(),
                    scenarios,
                };
                normalize_probabilities(&mut p);
                return Ok(p);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < counts[pos] {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Uniform draw in `[0, 1)` from the top 53 bits of the generator output.
pub(crate) fn unit_f64(rng: &mut XorShiftRng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Inverse-CDF draw from a discrete distribution.
fn draw(outcomes: &[Outcome], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, o) in outcomes.iter().enumerate() {
        acc += o.probability;
        if u < acc {
            return k;
        }
    }
    outcomes.len() - 1
}

/// Sample average approximation with `count` independent scenarios of
/// weight `1/count`.
///
/// The generator is xorshift128 (`rand_xorshift::XorShiftRng`) seeded through
/// `SeedableRng::seed_from_u64`. Scenarios are drawn in order; within a
/// scenario each random entry consumes one `u = (next_u64 >> 11) * 2^-53`
/// and picks the first outcome whose cumulative probability exceeds `u`.
pub fn sample_instance(t: &StochasticTemplate, count: usize, seed: u64) -> Result<TwoStageProblem, ProblemError> {
    if count == 0 {
        return Err(ProblemError::EmptySample);
    }
    let violations = t.validate();
    if !violations.is_empty() {
        return Err(ProblemError::Invalid(violations));
    }
    let mut rng = XorShiftRng::seed_from_u64(seed);
    let weight = 1.0 / count as f64;
    let scenarios = (0..count)
        .map(|_| {
            let picks: Vec<usize> = t.random.iter().map(|e| draw(&e.outcomes, unit_f64(&mut rng))).collect();
            Scenario::from_data(weight, t.realize(|k| picks[k]))
        })
        .collect();
    let mut p = TwoStageProblem {
        name: t.name.clone(),
        first: t.first.clone(),
        recourse: t.recourse.clone(),
        scenarios,
    };
    normalize_probabilities(&mut p);
    Ok(p)
}

/// Column layout of the extensive form: `x` first, then each `y_s` in
/// scenario order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtensiveLayout {
    pub n: usize,
    pub m: usize,
}

impl ExtensiveLayout {
    pub fn y_offset(&self, s: usize) -> usize {
        self.n + s * self.m
    }
}

/// Deterministic equivalent of the two-stage program as one LP.
pub fn build_extensive_form(p: &TwoStageProblem) -> Result<LinearProgram, ProblemError> {
    let violations = validate_problem(p);
    if !violations.is_empty() {
        return Err(ProblemError::Invalid(violations));
    }
    let (n, m) = (p.n(), p.m());
    let mut lp = LinearProgram::new();
    lp.add_nonnegative(&p.first.c);
    for sc in &p.scenarios {
        let costs: Vec<f64> = sc.q.iter().map(|q| sc.probability * q).collect();
        lp.add_nonnegative(&costs);
    }
    for i in 0..p.first.p() {
        let entries: Vec<(usize, f64)> = p.first.a.row(i).iter().copied().enumerate().collect();
        lp.add_row(&entries, Relation::Eq, p.first.b[i]);
    }
    let layout = ExtensiveLayout { n, m };
    for (s, sc) in p.scenarios.iter().enumerate() {
        let off = layout.y_offset(s);
        for i in 0..p.q_rows() {
            let mut entries: Vec<(usize, f64)> = sc.t.row(i).iter().copied().enumerate().collect();
            entries.extend(p.recourse.row(i).iter().enumerate().map(|(j, &w)| (off + j, w)));
            lp.add_row(&entries, Relation::Eq, sc.h[i]);
        }
    }
    Ok(lp)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub use crate::generate::p1;

    pub fn p1_template() -> StochasticTemplate {
        let p = p1();
        StochasticTemplate {
            name: "p1".into(),
            first: p.first,
            recourse: p.recourse,
            nominal: ScenarioData { q: vec![1.0, 0.0], t: Matrix::from_rows(&[vec![1.0]], 1).unwrap(), h: vec![2.0] },
            random: vec![RandomEntry {
                target: RandomTarget::Rhs { row: 0 },
                outcomes: vec![Outcome { value: 2.0, probability: 0.5 }, Outcome { value: 4.0, probability: 0.5 }],
            }],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::lp::{solve_lp, LpStatus};

    fn entry(target: RandomTarget, outcomes: &[(f64, f64)]) -> RandomEntry {
        RandomEntry {
            target,
            outcomes: outcomes.iter().map(|&(value, probability)| Outcome { value, probability }).collect(),
        }
    }

    #[test]
    fn well_formed_single_scenario() {
        let mut p = p1();
        p.scenarios.truncate(1);
        p.scenarios[0].probability = 1.0;
        assert!(validate_problem(&p).is_empty());
    }

    #[test]
    fn probability_sum_violation() {
        let mut p = p1();
        p.scenarios[0].probability = 0.5;
        p.scenarios[1].probability = 0.4;
        assert_eq!(validate_problem(&p), vec!["probabilities sum to 0.9".to_string()]);
    }

    #[test]
    fn technology_column_mismatch() {
        let mut p = p1();
        p.scenarios[0].t = Matrix::from_rows(&[vec![1.0, 0.0]], 2).unwrap();
        assert_eq!(validate_problem(&p), vec!["T[0] has 2 columns, expected 1".to_string()]);
    }

    #[test]
    fn normalization_only_within_tolerance() {
        let mut p = p1();
        p.scenarios[0].probability = 0.5 + 4e-10;
        assert!(normalize_probabilities(&mut p));
        let total: f64 = p.scenarios.iter().map(|s| s.probability).sum();
        assert!((total - 1.0).abs() < 1e-15);
        p.scenarios[0].probability = 0.6;
        assert!(!normalize_probabilities(&mut p));
        assert_eq!(p.scenarios[0].probability, 0.6);
    }

    #[test]
    fn p1_extensive_form_shape_and_optimum() {
        let lp = build_extensive_form(&p1()).unwrap();
        assert_eq!(lp.num_vars(), 1 + 2 * 2);
        assert_eq!(lp.num_rows(), 2);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn extensive_objective_matches_direct_evaluation() {
        let p = p1();
        let lp = build_extensive_form(&p).unwrap();
        let x = vec![1.5];
        let ys = vec![vec![0.5, 0.0], vec![2.5, 0.0]];
        let flat: Vec<f64> = x.iter().chain(ys.iter().flatten()).copied().collect();
        assert!((lp.objective_value(&flat) - p.objective_at(&x, &ys)).abs() <= 1e-12);
    }

    #[test]
    fn single_scenario_extensive_form_is_merged_lp() {
        let mut p = p1();
        p.scenarios.truncate(1);
        p.scenarios[0].probability = 1.0;
        let lp = build_extensive_form(&p).unwrap();
        assert_eq!(lp.cost(), &[1.0, 1.0, 0.0]);
        assert_eq!(lp.dense_matrix(), vec![vec![1.0, 1.0, -1.0]]);
        assert_eq!(lp.rhs(), &[2.0]);
    }

    #[test]
    fn extensive_form_rejects_invalid() {
        let mut p = p1();
        p.scenarios.clear();
        assert!(matches!(build_extensive_form(&p), Err(ProblemError::Invalid(_))));
    }

    #[test]
    fn cross_product_of_two_entries() {
        let mut t = p1_template();
        t.recourse = Matrix::from_rows(&[vec![1.0, -1.0], vec![0.0, 1.0]], 2).unwrap();
        t.nominal.t = Matrix::from_rows(&[vec![1.0], vec![0.0]], 1).unwrap();
        t.nominal.h = vec![2.0, 1.0];
        t.random = vec![
            entry(RandomTarget::Rhs { row: 0 }, &[(1.0, 0.5), (2.0, 0.5)]),
            entry(RandomTarget::Rhs { row: 1 }, &[(1.0, 0.2), (2.0, 0.3), (3.0, 0.5)]),
        ];
        let p = enumerate_scenarios(&t, DEFAULT_SCENARIO_CAP).unwrap();
        assert_eq!(p.num_scenarios(), 6);
        let total: f64 = p.scenarios.iter().map(|s| s.probability).sum();
        assert!((total - 1.0).abs() < 1e-9);
        // First entry most significant.
        assert_eq!(p.scenarios[0].h, vec![1.0, 1.0]);
        assert_eq!(p.scenarios[1].h, vec![1.0, 2.0]);
        assert_eq!(p.scenarios[3].h, vec![2.0, 1.0]);
        assert!(validate_problem(&p).is_empty());
    }

    #[test]
    fn no_random_entries_gives_nominal() {
        let mut t = p1_template();
        t.random.clear();
        let p = enumerate_scenarios(&t, DEFAULT_SCENARIO_CAP).unwrap();
        assert_eq!(p.num_scenarios(), 1);
        assert_eq!(p.scenarios[0].probability, 1.0);
        assert_eq!(p.scenarios[0].h, t.nominal.h);
    }

    #[test]
    fn single_entry_probabilities() {
        let mut t = p1_template();
        t.random = vec![entry(RandomTarget::Rhs { row: 0 }, &[(1.0, 0.3), (2.0, 0.7)])];
        let p = enumerate_scenarios(&t, DEFAULT_SCENARIO_CAP).unwrap();
        let probs: Vec<f64> = p.scenarios.iter().map(|s| s.probability).collect();
        assert_eq!(probs, vec![0.3, 0.7]);
    }

    #[test]
    fn cap_exceeded_names_size() {
        let mut t = p1_template();
        t.random = (0..3).map(|_| entry(RandomTarget::Rhs { row: 0 }, &[(1.0, 0.5), (2.0, 0.5)])).collect();
        let err = enumerate_scenarios(&t, 7).unwrap_err();
        assert_eq!(err, ProblemError::TooManyScenarios { size: 8, cap: 7 });
        assert!(err.to_string().contains('8'));
    }

    #[test]
    fn p1_template_enumerates_to_p1() {
        assert_eq!(enumerate_scenarios(&p1_template(), 10).unwrap(), p1());
    }

    #[test]
    fn sampling_weights_and_determinism() {
        let t = p1_template();
        let a = sample_instance(&t, 5, 42).unwrap();
        assert_eq!(a.num_scenarios(), 5);
        assert!(a.scenarios.iter().all(|s| s.probability == 0.2));
        assert_eq!(a, sample_instance(&t, 5, 42).unwrap());
        assert!(validate_problem(&a).is_empty());
    }

    #[test]
    fn degenerate_distribution_samples_identical() {
        let mut t = p1_template();
        t.random = vec![entry(RandomTarget::Technology { row: 0, col: 0 }, &[(3.0, 1.0)])];
        let p = sample_instance(&t, 3, 1).unwrap();
        assert!(p.scenarios.iter().all(|s| s == &p.scenarios[0]));
        assert_eq!(p.scenarios[0].t.get(0, 0), 3.0);
    }

    #[test]
    fn sampling_zero_count_rejected() {
        assert_eq!(sample_instance(&p1_template(), 0, 1), Err(ProblemError::EmptySample));
    }
}
