//! Seeded random instances with complete recourse, and small fixtures.

use rand::{Rng, SeedableRng};
use rand_xorshift::XorShiftRng;

use crate::problem::{FirstStage, Matrix, Scenario, TwoStageProblem};

/// Shape of a generated instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorConfig {
    /// First-stage decision count, excluding the budget slack.
    pub n: usize,
    /// Second-stage rows.
    pub rows: usize,
    /// Extra recourse columns beyond the shortage and surplus pair per row.
    pub extra: usize,
    /// Scenario count.
    pub scenarios: usize,
    /// Adds `sum x + slack = budget` to the first stage. Without it the
    /// master is unbounded until enough cuts accumulate.
    pub budget: bool,
}

impl GeneratorConfig {
    pub fn new(n: usize, rows: usize, scenarios: usize) -> Self {
        Self { n, rows, extra: 0, scenarios, budget: true }
    }
}

/// Draws a two-stage problem
///
/// ```text
/// W = [G  I  -I],  q >= 0,  c > 0
/// ```
///
/// so every `x` has a feasible and bounded recourse.
pub fn random_problem(cfg: &GeneratorConfig, seed: u64) -> TwoStageProblem {
    assert!(cfg.n >= 1 && cfg.rows >= 1 && cfg.scenarios >= 1, "empty generator shape");
    let mut rng = XorShiftRng::seed_from_u64(seed);
    let n = cfg.n + usize::from(cfg.budget);
    let mut c: Vec<f64> = (0..cfg.n).map(|_| rng.random_range(0.5..2.0)).collect();
    let (a, b) = if cfg.budget {
        c.push(0.0);
        let a = Matrix::from_rows(&[vec![1.0; n]], n).unwrap();
        (a, vec![rng.random_range(2.0..8.0)])
    } else {
        (Matrix::zeros(0, n), vec![])
    };
    let m = cfg.extra + 2 * cfg.rows;
    let mut w = Matrix::zeros(cfg.rows, m);
    for i in 0..cfg.rows {
        for j in 0..cfg.extra {
            w.set(i, j, rng.random_range(-1.0..2.0));
        }
        w.set(i, cfg.extra + i, 1.0);
        w.set(i, cfg.extra + cfg.rows + i, -1.0);
    }
    let base_t: Vec<Vec<f64>> = (0..cfg.rows)
        .map(|_| {
            (0..n)
                .map(|j| if j < cfg.n { rng.random_range(0.2..2.0) } else { 0.0 })
                .collect()
        })
        .collect();
    let pi = 1.0 / cfg.scenarios as f64;
    let scenarios = (0..cfg.scenarios)
        .map(|_| {
            let mut q = Vec::with_capacity(m);
            q.extend((0..cfg.extra).map(|_| rng.random_range(0.5..3.0)));
            q.extend((0..cfg.rows).map(|_| rng.random_range(2.0..6.0)));
            q.extend((0..cfg.rows).map(|_| rng.random_range(0.0..1.0)));
            let t_rows: Vec<Vec<f64>> = base_t
                .iter()
                .map(|r| {
                    r.iter()
                        .enumerate()
                        .map(|(j, v)| if j < cfg.n { v * rng.random_range(0.7..1.3) } else { 0.0 })
                        .collect()
                })
                .collect();
            let h = (0..cfg.rows).map(|_| rng.random_range(1.0..10.0)).collect();
            Scenario { probability: pi, q, t: Matrix::from_rows(&t_rows, n).unwrap(), h }
        })
        .collect();
    TwoStageProblem {
        name: format!("random-{seed}"),
        first: FirstStage { c, a, b },
        recourse: w,
        scenarios,
    }
}

/// Configuration drawn for the `index`-th instance of a seeded suite:
/// at most four first-stage columns (budget slack included) and at most
/// four recourse columns.
pub fn suite_config(index: usize, scenarios: usize, seed: u64) -> GeneratorConfig {
    let mut rng = XorShiftRng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let rows = rng.random_range(1..=2);
    let extra = if rows == 1 { rng.random_range(0..=2) } else { 0 };
    let n = rng.random_range(1..=3);
    GeneratorConfig { n, rows, extra, scenarios, budget: true }
}

/// `min x + E[y]` with `y - u = h - x`, `h` in `{2, 4}` at equal weight.
/// The optimal value is 3 and is attained for every `x` in `[0, 2]`.
pub fn p1() -> TwoStageProblem {
    let scenario = |h: f64| Scenario {
        probability: 0.5,
        q: vec![1.0, 0.0],
        t: Matrix::from_rows(&[vec![1.0]], 1).unwrap(),
        h: vec![h],
    };
    TwoStageProblem {
        name: "p1".into(),
        first: FirstStage { c: vec![1.0], a: Matrix::zeros(0, 1), b: vec![] },
        recourse: Matrix::from_rows(&[vec![1.0, -1.0]], 2).unwrap(),
        scenarios: vec![scenario(2.0), scenario(4.0)],
    }
}

/// Single scenario `y = 2 - x` with no surplus column, and a first stage
/// forcing `x = 3`. Recourse is infeasible at every admissible `x`.
pub fn infeasible_recourse() -> TwoStageProblem {
    TwoStageProblem {
        name: "no-surplus".into(),
        first: FirstStage {
            c: vec![1.0],
            a: Matrix::from_rows(&[vec![1.0]], 1).unwrap(),
            b: vec![3.0],
        },
        recourse: Matrix::from_rows(&[vec![1.0]], 1).unwrap(),
        scenarios: vec![Scenario {
            probability: 1.0,
            q: vec![1.0],
            t: Matrix::from_rows(&[vec![1.0]], 1).unwrap(),
            h: vec![2.0],
        }],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{solve_lp, LpStatus};
    use crate::problem::{build_extensive_form, validate_problem};

    #[test]
    fn generated_instances_are_valid_and_solvable() {
        for index in 0..20 {
            let cfg = suite_config(index, 5, 11);
            assert!(cfg.n + usize::from(cfg.budget) <= 4);
            assert!(cfg.extra + 2 * cfg.rows <= 4);
            let p = random_problem(&cfg, index as u64);
            assert!(validate_problem(&p).is_empty());
            let sol = solve_lp(&build_extensive_form(&p).unwrap()).unwrap();
            assert_eq!(sol.status, LpStatus::Optimal);
        }
    }

    #[test]
    fn generation_is_seeded() {
        let cfg = GeneratorConfig::new(2, 2, 4);
        assert_eq!(random_problem(&cfg, 5), random_problem(&cfg, 5));
        assert_ne!(random_problem(&cfg, 5), random_problem(&cfg, 6));
    }

    #[test]
    fn p1_is_valid() {
        assert!(validate_problem(&p1()).is_empty());
        assert!(validate_problem(&infeasible_recourse()).is_empty());
    }
}
