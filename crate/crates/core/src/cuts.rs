//! Optimality and feasibility cuts, their aggregation, and cut distances.
//!
//! An optimality cut with members `S` stands for the master row
//!
//! ```text
//! grad . x + sum_{s in S} theta_s >= offset
//! ```
//!
//! and a feasibility cut for `grad . x >= offset`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::{dot, Scenario};

/// Relative violation threshold: a cut is violated when
/// `violation > VIOLATION_TOL * (1 + |offset|)`.
pub const VIOLATION_TOL: f64 = 1e-6;
/// Slack allowed on `sigma' W <= 0` for a feasibility certificate.
pub const CERTIFICATE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CutError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("certificate fails sigma'W <= 0 at column {column} ({value})")]
    BadCertificate { column: usize, value: f64 },
    #[error("cut members overlap at scenario {0}")]
    Overlap(usize),
    #[error("no cuts to aggregate")]
    Empty,
    #[error("theta missing for scenario {0}")]
    MissingTheta(usize),
    #[error("{0:?} distance undefined for a zero gradient")]
    ZeroGradient(DistanceMeasure),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityCut {
    pub grad: Vec<f64>,
    pub offset: f64,
    /// Scenario (or granule) indices, ascending.
    pub members: BTreeSet<usize>,
    pub iteration: usize,
}

impl OptimalityCut {
    pub fn singleton(member: usize, grad: Vec<f64>, offset: f64, iteration: usize) -> Self {
        Self { grad, offset, members: BTreeSet::from([member]), iteration }
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    /// `offset - grad . x - sum_{s in members} theta[s]`.
    pub fn violation(&self, x: &[f64], theta: &[f64]) -> Result<f64, CutError> {
        violation(self, x, theta)
    }

    pub fn is_violated(&self, x: &[f64], theta: &[f64]) -> Result<bool, CutError> {
        Ok(self.violation(x, theta)? > VIOLATION_TOL * (1.0 + self.offset.abs()))
    }

    fn grad_is_zero(&self) -> bool {
        self.grad.iter().all(|&g| g == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityCut {
    pub grad: Vec<f64>,
    pub offset: f64,
    pub scenario: usize,
}

impl FeasibilityCut {
    /// `offset - grad . x`; positive means `x` is cut off.
    pub fn violation(&self, x: &[f64]) -> f64 {
        self.offset - dot(&self.grad, x)
    }
}

/// `grad = pi_s lambda' T_s`, `offset = pi_s lambda' h_s`.
pub fn make_optimality_cut(s: usize, lambda: &[f64], scen: &Scenario, iteration: usize) -> Result<OptimalityCut, CutError> {
    if lambda.len() != scen.h.len() {
        return Err(CutError::Dimension(format!("lambda has {} entries, expected {}", lambda.len(), scen.h.len())));
    }
    let grad = scen.t.left_mul(lambda).into_iter().map(|g| scen.probability * g).collect();
    let offset = scen.probability * dot(lambda, &scen.h);
    Ok(OptimalityCut::singleton(s, grad, offset, iteration))
}

/// `sigma' T_s x >= sigma' h_s` from a ray with `sigma' W <= 0`.
pub fn make_feasibility_cut(s: usize, sigma: &[f64], scen: &Scenario, w: &crate::problem::Matrix) -> Result<FeasibilityCut, CutError> {
    if sigma.len() != scen.h.len() || w.rows() != sigma.len() {
        return Err(CutError::Dimension(format!("sigma has {} entries, expected {}", sigma.len(), scen.h.len())));
    }
    let scale = sigma.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    for (column, value) in w.left_mul(sigma).into_iter().enumerate() {
        if value > CERTIFICATE_TOL * scale {
            return Err(CutError::BadCertificate { column, value });
        }
    }
    Ok(FeasibilityCut { grad: scen.t.left_mul(sigma), offset: dot(sigma, &scen.h), scenario: s })
}

/// Sums cuts with pairwise disjoint members. Inputs are accumulated in
/// ascending order of their smallest member so the result does not depend
/// on the order of `cuts`.
pub fn aggregate(cuts: &[OptimalityCut]) -> Result<OptimalityCut, CutError> {
    let first = cuts.first().ok_or(CutError::Empty)?;
    if cuts.len() == 1 {
        return Ok(first.clone());
    }
    let n = first.grad.len();
    let mut order: Vec<&OptimalityCut> = cuts.iter().collect();
    order.sort_by_key(|c| c.members.first().copied());
    let mut members = BTreeSet::new();
    let mut grad = vec![0.0; n];
    let mut offset = 0.0;
    let mut iteration = 0;
    for c in order {
        if c.grad.len() != n {
            return Err(CutError::Dimension(format!("gradient of length {}, expected {n}", c.grad.len())));
        }
        for &s in &c.members {
            if !members.insert(s) {
                return Err(CutError::Overlap(s));
            }
        }
        for (g, v) in grad.iter_mut().zip(&c.grad) {
            *g += v;
        }
        offset += c.offset;
        iteration = iteration.max(c.iteration);
    }
    Ok(OptimalityCut { grad, offset, members, iteration })
}

pub fn violation(cut: &OptimalityCut, x: &[f64], theta: &[f64]) -> Result<f64, CutError> {
    if x.len() != cut.grad.len() {
        return Err(CutError::Dimension(format!("x has {} entries, expected {}", x.len(), cut.grad.len())));
    }
    let mut sum = 0.0;
    for &s in &cut.members {
        sum += theta.get(s).ok_or(CutError::MissingTheta(s))?;
    }
    Ok(cut.offset - dot(&cut.grad, x) - sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMeasure {
    Absolute,
    Angular,
    Spatioangular,
}

impl fmt::Display for DistanceMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Absolute => "absolute",
            Self::Angular => "angular",
            Self::Spatioangular => "spatioangular",
        })
    }
}

impl std::str::FromStr for DistanceMeasure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "absolute" => Ok(Self::Absolute),
            "angular" => Ok(Self::Angular),
            "spatioangular" => Ok(Self::Spatioangular),
            other => Err(format!("unknown distance measure '{other}'")),
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn absolute(ci: &OptimalityCut, cj: &OptimalityCut) -> f64 {
    let (ki, kj) = (ci.size() as f64, cj.size() as f64);
    let stack = |c: &OptimalityCut, k: f64| -> Vec<f64> { c.grad.iter().chain([&c.offset]).map(|v| v / k).collect() };
    let (a, b) = (stack(ci, ki), stack(cj, kj));
    let denom = norm(&a).max(norm(&b));
    if denom == 0.0 {
        return 0.0;
    }
    let diff: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p - q).collect();
    norm(&diff) / denom
}

fn angular(gi: &[f64], gj: &[f64]) -> f64 {
    if gi == gj {
        return 0.0;
    }
    let cos = dot(gi, gj).abs() / (norm(gi) * norm(gj));
    (1.0 - cos).max(0.0)
}

/// Distance between two cuts; fails under the angle-based measures when a
/// gradient is zero.
pub fn distance(ci: &OptimalityCut, cj: &OptimalityCut, measure: DistanceMeasure) -> Result<f64, CutError> {
    if ci.grad.len() != cj.grad.len() {
        return Err(CutError::Dimension("gradients differ in length".into()));
    }
    match measure {
        DistanceMeasure::Absolute => Ok(absolute(ci, cj)),
        DistanceMeasure::Angular | DistanceMeasure::Spatioangular => {
            if ci.grad_is_zero() || cj.grad_is_zero() {
                return Err(CutError::ZeroGradient(measure));
            }
            let mut d = angular(&ci.grad, &cj.grad);
            if measure == DistanceMeasure::Spatioangular {
                let qi = ci.offset / ci.size() as f64;
                let qj = cj.offset / cj.size() as f64;
                let denom = qi.abs().max(qj.abs());
                if denom > 0.0 {
                    d += (qi - qj).abs() / denom;
                }
            }
            Ok(d)
        }
    }
}

/// [`distance`] that falls back to [`DistanceMeasure::Absolute`] when either
/// gradient is zero.
pub fn distance_or_absolute(ci: &OptimalityCut, cj: &OptimalityCut, measure: DistanceMeasure) -> f64 {
    match distance(ci, cj, measure) {
        Ok(d) => d,
        Err(_) => absolute(ci, cj),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::p1;
    use crate::problem::Matrix;
    use proptest::prelude::*;

    fn cut(member: usize, grad: &[f64], offset: f64) -> OptimalityCut {
        OptimalityCut::singleton(member, grad.to_vec(), offset, 0)
    }

    #[test]
    fn p1_scenario_cut_at_zero() {
        let p = p1();
        let c = make_optimality_cut(0, &[1.0], &p.scenarios[0], 1).unwrap();
        assert_eq!(c.grad, vec![0.5]);
        assert_eq!(c.offset, 1.0);
        assert_eq!(c.members, BTreeSet::from([0]));
    }

    #[test]
    fn zero_dual_gives_zero_cut() {
        let c = make_optimality_cut(0, &[0.0], &p1().scenarios[1], 1).unwrap();
        assert_eq!(c.grad, vec![0.0]);
        assert_eq!(c.offset, 0.0);
    }

    #[test]
    fn cut_is_linear_in_probability() {
        let mut s = p1().scenarios[1].clone();
        let a = make_optimality_cut(1, &[0.7], &s, 1).unwrap();
        s.probability *= 2.0;
        let b = make_optimality_cut(1, &[0.7], &s, 1).unwrap();
        assert_eq!(b.grad[0], 2.0 * a.grad[0]);
        assert_eq!(b.offset, 2.0 * a.offset);
    }

    #[test]
    fn dual_length_checked() {
        assert!(matches!(make_optimality_cut(0, &[1.0, 2.0], &p1().scenarios[0], 1), Err(CutError::Dimension(_))));
    }

    fn no_surplus() -> (Scenario, Matrix) {
        let s = Scenario { probability: 1.0, q: vec![1.0], t: Matrix::from_rows(&[vec![1.0]], 1).unwrap(), h: vec![2.0] };
        (s, Matrix::from_rows(&[vec![1.0]], 1).unwrap())
    }

    #[test]
    fn feasibility_cut_by_hand() {
        let (s, w) = no_surplus();
        let f = make_feasibility_cut(0, &[-1.0], &s, &w).unwrap();
        // -x >= -2
        assert_eq!(f.grad, vec![-1.0]);
        assert_eq!(f.offset, -2.0);
        assert!(f.violation(&[3.0]) > 0.0);
        assert!(f.violation(&[2.0]) <= 0.0);
        assert!(f.violation(&[0.5]) <= 0.0);
    }

    #[test]
    fn feasibility_cut_scaling_keeps_halfspace() {
        let (s, w) = no_surplus();
        let a = make_feasibility_cut(0, &[-1.0], &s, &w).unwrap();
        let b = make_feasibility_cut(0, &[-2.0], &s, &w).unwrap();
        assert_eq!(b.grad[0], 2.0 * a.grad[0]);
        assert_eq!(b.offset, 2.0 * a.offset);
    }

    #[test]
    fn bad_certificate_rejected() {
        let (s, w) = no_surplus();
        assert!(matches!(make_feasibility_cut(0, &[1.0], &s, &w), Err(CutError::BadCertificate { .. })));
    }

    #[test]
    fn aggregate_sums() {
        let a = aggregate(&[cut(1, &[0.5], 1.0), cut(2, &[0.25], 0.5)]).unwrap();
        assert_eq!(a.grad, vec![0.75]);
        assert_eq!(a.offset, 1.5);
        assert_eq!(a.members, BTreeSet::from([1, 2]));
    }

    #[test]
    fn aggregate_singleton_identity() {
        let c = cut(3, &[0.1, -2.0], 4.0);
        assert_eq!(aggregate(std::slice::from_ref(&c)).unwrap(), c);
    }

    #[test]
    fn p1_single_cut_at_zero() {
        let p = p1();
        let cuts: Vec<_> = (0..2).map(|s| make_optimality_cut(s, &[1.0], &p.scenarios[s], 1).unwrap()).collect();
        let a = aggregate(&cuts).unwrap();
        assert_eq!(a.grad, vec![1.0]);
        assert_eq!(a.offset, 3.0);
        assert_eq!(a.violation(&[0.0], &[1.5, 1.5]).unwrap(), 0.0);
    }

    #[test]
    fn aggregate_rejects_overlap() {
        let r = aggregate(&[cut(1, &[0.5], 1.0), cut(1, &[0.25], 0.5)]);
        assert_eq!(r, Err(CutError::Overlap(1)));
        assert_eq!(aggregate(&[]), Err(CutError::Empty));
    }

    #[test]
    fn violation_arithmetic() {
        let c = cut(0, &[0.5], 1.0);
        assert_eq!(c.violation(&[0.0], &[-10.0]).unwrap(), 11.0);
        assert_eq!(c.violation(&[2.0], &[0.0]).unwrap(), 0.0);
        assert!(!c.is_violated(&[2.0], &[0.0]).unwrap());
        assert!(c.is_violated(&[0.0], &[-10.0]).unwrap());
        assert_eq!(c.violation(&[0.0], &[]), Err(CutError::MissingTheta(0)));
    }

    #[test]
    fn distance_table() {
        let a = cut(0, &[1.0, 0.0], 1.0);
        let b = cut(1, &[0.0, 1.0], 1.0);
        let d = distance(&a, &b, DistanceMeasure::Angular).unwrap();
        assert!((d - 1.0).abs() <= 1e-12);
        let c = cut(1, &[1.0, 1.0], 1.0);
        let d = distance(&c, &a, DistanceMeasure::Angular).unwrap();
        assert!((d - (1.0 - 1.0 / 2f64.sqrt())).abs() <= 1e-12);
        let e = cut(1, &[1.0, 0.0], 2.0);
        let d = distance(&a, &e, DistanceMeasure::Spatioangular).unwrap();
        assert!((d - 0.5).abs() <= 1e-12);
        for m in [DistanceMeasure::Absolute, DistanceMeasure::Angular, DistanceMeasure::Spatioangular] {
            assert_eq!(distance(&a, &a, m).unwrap(), 0.0);
        }
    }

    #[test]
    fn zero_gradient_angular_rejected_with_fallback() {
        let z = cut(0, &[0.0, 0.0], 1.0);
        let a = cut(1, &[1.0, 0.0], 3.0);
        assert!(matches!(distance(&z, &a, DistanceMeasure::Angular), Err(CutError::ZeroGradient(_))));
        let d = distance_or_absolute(&z, &a, DistanceMeasure::Angular);
        assert_eq!(d, distance(&z, &a, DistanceMeasure::Absolute).unwrap());
        assert_eq!(distance(&cut(0, &[0.0], 0.0), &cut(1, &[0.0], 0.0), DistanceMeasure::Absolute).unwrap(), 0.0);
    }

    #[test]
    fn measure_names_round_trip() {
        for m in [DistanceMeasure::Absolute, DistanceMeasure::Angular, DistanceMeasure::Spatioangular] {
            assert_eq!(m.to_string().parse::<DistanceMeasure>().unwrap(), m);
        }
        assert!("euclid".parse::<DistanceMeasure>().is_err());
    }

    fn arb_grad() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 3).prop_filter("nonzero", |g| g.iter().any(|v| v.abs() > 1e-3))
    }

    proptest! {
        #[test]
        fn angular_ignores_positive_scaling(g in arb_grad(), q in -5.0f64..5.0, alpha in 0.01f64..100.0) {
            let a = cut(0, &g, q);
            let scaled: Vec<f64> = g.iter().map(|v| v * alpha).collect();
            let b = cut(1, &scaled, q * alpha);
            prop_assert!(distance(&a, &b, DistanceMeasure::Angular).unwrap() <= 1e-12);
        }

        #[test]
        fn duplicate_aggregate_is_at_zero_distance(g in arb_grad(), q in -5.0f64..5.0, k in 1usize..6) {
            let copies: Vec<_> = (0..k).map(|s| cut(s, &g, q)).collect();
            let agg = aggregate(&copies).unwrap();
            let single = cut(100, &g, q);
            for m in [DistanceMeasure::Absolute, DistanceMeasure::Spatioangular] {
                prop_assert!(distance(&agg, &single, m).unwrap() <= 1e-12);
            }
        }

        #[test]
        fn aggregation_is_associative(gs in prop::collection::vec(arb_grad(), 2..8), split in 1usize..7) {
            let cuts: Vec<_> = gs.iter().enumerate().map(|(s, g)| cut(s, g, s as f64)).collect();
            let split = split.min(cuts.len() - 1);
            let nested = aggregate(&[aggregate(&cuts[..split]).unwrap(), aggregate(&cuts[split..]).unwrap()]).unwrap();
            let flat = aggregate(&cuts).unwrap();
            prop_assert_eq!(nested.members, flat.members);
            for (a, b) in nested.grad.iter().zip(&flat.grad) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn distances_are_nonnegative(g1 in arb_grad(), g2 in arb_grad(), q1 in -5.0f64..5.0, q2 in -5.0f64..5.0) {
            let (a, b) = (cut(0, &g1, q1), cut(1, &g2, q2));
            for m in [DistanceMeasure::Absolute, DistanceMeasure::Angular, DistanceMeasure::Spatioangular] {
                prop_assert!(distance(&a, &b, m).unwrap() >= 0.0);
            }
        }
    }
}
