//! Cross-checks the simplex kernel against brute-force vertex enumeration on
//! small random programs.

use lshaped::lp::{dual_bound, farkas_margin, solve_lp, verify_kkt, LinearProgram, LpStatus, Relation};
use rand::{Rng, SeedableRng};
use rand_xorshift::XorShiftRng;

const INF: f64 = f64::INFINITY;

struct Dense {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Dense {
    fn to_lp(&self) -> LinearProgram {
        let mut lp = LinearProgram::new();
        for j in 0..self.c.len() {
            lp.add_variable(self.c[j], self.lo[j], self.hi[j]);
        }
        for (row, &rhs) in self.a.iter().zip(&self.b) {
            let entries: Vec<(usize, f64)> = row.iter().copied().enumerate().collect();
            lp.add_row(&entries, Relation::Eq, rhs);
        }
        lp
    }
}

/// Solves a square system by Gaussian elimination with partial pivoting.
fn solve_square(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let n = r.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[p][c].abs() < 1e-10 {
            return None;
        }
        m.swap(p, c);
        r.swap(p, c);
        for i in c + 1..n {
            let f = m[i][c] / m[c][c];
            for k in c..n {
                m[i][k] -= f * m[c][k];
            }
            r[i] -= f * r[c];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
        x[i] = (r[i] - s) / m[i][i];
    }
    Some(x)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in start..n {
            cur.push(j);
            rec(j + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Minimum objective over all basic feasible solutions; `None` if no basic
/// solution is feasible.
fn vertex_enumeration(p: &Dense) -> Option<f64> {
    let n = p.c.len();
    let m = p.b.len();
    let mut best: Option<f64> = None;
    for basis in combinations(n, m) {
        let nonbasic: Vec<usize> = (0..n).filter(|j| !basis.contains(j)).collect();
        let choices: Vec<Vec<f64>> = nonbasic
            .iter()
            .map(|&j| [p.lo[j], p.hi[j]].into_iter().filter(|v| v.is_finite()).collect())
            .collect();
        let total: usize = choices.iter().map(|c| c.len()).product();
        for code in 0..total {
            let mut x = vec![0.0; n];
            let mut rest = code;
            for (k, &j) in nonbasic.iter().enumerate() {
                x[j] = choices[k][rest % choices[k].len()];
                rest /= choices[k].len();
            }
            let r: Vec<f64> = (0..m)
                .map(|i| p.b[i] - nonbasic.iter().map(|&j| p.a[i][j] * x[j]).sum::<f64>())
                .collect();
            let bm: Vec<Vec<f64>> = (0..m).map(|i| basis.iter().map(|&j| p.a[i][j]).collect()).collect();
            let Some(xb) = solve_square(bm, r) else { continue };
            for (k, &j) in basis.iter().enumerate() {
                x[j] = xb[k];
            }
            if (0..n).all(|j| x[j] >= p.lo[j] - 1e-9 && x[j] <= p.hi[j] + 1e-9) {
                let obj: f64 = (0..n).map(|j| p.c[j] * x[j]).sum();
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
    }
    best
}

fn random_feasible(rng: &mut XorShiftRng) -> Dense {
    let n = rng.random_range(2..=10);
    let m = rng.random_range(1..=(n - 1).min(8));
    let boxed = rng.random_bool(0.5);
    let lo: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.3) { -1.0 } else { 0.0 }).collect();
    let hi: Vec<f64> = (0..n)
        .map(|_| if boxed || rng.random_bool(0.5) { rng.random_range(1.0..5.0) } else { INF })
        .collect();
    let c: Vec<f64> = (0..n)
        .map(|j| if hi[j].is_finite() { rng.random_range(-3.0..3.0) } else { rng.random_range(0.0..3.0) })
        .collect();
    let a: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    let x0: Vec<f64> = (0..n)
        .map(|j| rng.random_range(lo[j]..if hi[j].is_finite() { hi[j] } else { 4.0 }))
        .collect();
    let b = a.iter().map(|row| row.iter().zip(&x0).map(|(p, q)| p * q).sum()).collect();
    Dense { a, b, c, lo, hi }
}

#[test]
fn matches_vertex_enumeration_on_random_programs() {
    let mut rng = XorShiftRng::seed_from_u64(20240611);
    for case in 0..100 {
        let p = random_feasible(&mut rng);
        let lp = p.to_lp();
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal, "case {case}");
        let oracle = vertex_enumeration(&p).expect("feasible by construction");
        assert!(
            (sol.objective - oracle).abs() <= 1e-7 * (1.0 + oracle.abs()),
            "case {case}: simplex {} vs oracle {oracle}",
            sol.objective
        );
        let kkt = verify_kkt(&lp, &sol).unwrap();
        assert!(kkt.max() <= 1e-8, "case {case}: {kkt:?}");
        let y = sol.duals.as_ref().unwrap();
        assert!(dual_bound(&lp, y) <= sol.objective + 1e-8, "case {case}: weak duality");
    }
}

#[test]
fn infeasible_programs_carry_valid_certificates() {
    let mut rng = XorShiftRng::seed_from_u64(7);
    for case in 0..50 {
        let n = rng.random_range(2..=6);
        let m = rng.random_range(1..=4);
        let mut a: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        // First row has positive coefficients and a rhs beyond the box.
        a[0] = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let hi = vec![1.0; n];
        let mut b: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        b[0] = a[0].iter().sum::<f64>() + rng.random_range(0.1..2.0);
        let p = Dense { a, b, c: vec![1.0; n], lo: vec![0.0; n], hi };
        let lp = p.to_lp();
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible, "case {case}");
        assert!(vertex_enumeration(&p).is_none());
        let s = sol.farkas.unwrap();
        assert!(farkas_margin(&lp, &s) > 1e-9, "case {case}");
    }
}

#[test]
fn repeated_solves_are_bitwise_identical() {
    let mut rng = XorShiftRng::seed_from_u64(99);
    for _ in 0..20 {
        let lp = random_feasible(&mut rng).to_lp();
        let a = solve_lp(&lp).unwrap();
        let b = solve_lp(&lp).unwrap();
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert!(a.x.iter().zip(&b.x).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}
