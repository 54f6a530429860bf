//! K-medoids over cuts: alternating (Voronoi) iteration followed by
//! single-swap refinement.

use rand::{Rng, SeedableRng};
use rand_xorshift::XorShiftRng;

use super::AggregationError;
use crate::cuts::{distance_or_absolute, DistanceMeasure, OptimalityCut};

/// Upper limit on alternating sweeps and on swap passes.
pub const MAX_SWEEPS: usize = 100;
const IMPROVEMENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Cluster position (index into `medoids`) per point.
    pub assignment: Vec<usize>,
    /// Point indices, ascending.
    pub medoids: Vec<usize>,
    pub cost: f64,
    pub sweeps: usize,
}

impl Clustering {
    /// Point indices per cluster, in medoid order.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.medoids.len()];
        for (p, &c) in self.assignment.iter().enumerate() {
            out[c].push(p);
        }
        out
    }
}

/// Pairwise distances; the angle-based measures fall back to the absolute
/// distance for zero gradients.
pub fn distance_matrix(points: &[OptimalityCut], measure: DistanceMeasure) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = distance_or_absolute(&points[i], &points[j], measure);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

/// Nearest medoid per point, ties to the lowest medoid position; a medoid
/// is always its own cluster.
fn assign(d: &[Vec<f64>], medoids: &[usize]) -> (Vec<usize>, f64) {
    let mut cost = 0.0;
    let assignment = (0..d.len())
        .map(|p| {
            if let Some(pos) = medoids.iter().position(|&m| m == p) {
                return pos;
            }
            let mut best = 0;
            for (pos, &m) in medoids.iter().enumerate().skip(1) {
                if d[p][m] < d[p][medoids[best]] {
                    best = pos;
                }
            }
            cost += d[p][medoids[best]];
            best
        })
        .collect();
    (assignment, cost)
}

pub fn assignment_cost(d: &[Vec<f64>], medoids: &[usize]) -> f64 {
    let mut sorted = medoids.to_vec();
    sorted.sort_unstable();
    assign(d, &sorted).1
}

/// Picks among `candidates` the ones with optimal score, breaking exact ties
/// with the generator.
fn pick(candidates: impl Iterator<Item = (usize, f64)>, maximize: bool, rng: &mut XorShiftRng) -> usize {
    let mut best: Vec<usize> = Vec::new();
    let mut best_score = if maximize { f64::NEG_INFINITY } else { f64::INFINITY };
    for (i, s) in candidates {
        let better = if maximize { s > best_score } else { s < best_score };
        if better {
            best_score = s;
            best.clear();
            best.push(i);
        } else if s == best_score {
            best.push(i);
        }
    }
    if best.len() == 1 {
        best[0]
    } else {
        best[rng.random_range(0..best.len())]
    }
}

fn initial_medoids(d: &[Vec<f64>], k: usize, rng: &mut XorShiftRng) -> Vec<usize> {
    let n = d.len();
    let first = pick((0..n).map(|i| (i, d[i].iter().sum())), false, rng);
    let mut medoids = vec![first];
    let mut nearest: Vec<f64> = d[first].clone();
    while medoids.len() < k {
        let next = pick((0..n).filter(|i| !medoids.contains(i)).map(|i| (i, nearest[i])), true, rng);
        medoids.push(next);
        for i in 0..n {
            nearest[i] = nearest[i].min(d[next][i]);
        }
    }
    medoids.sort_unstable();
    medoids
}

/// Clusters from a precomputed distance matrix.
pub fn kmedoids_from_matrix(d: &[Vec<f64>], k: usize, seed: u64) -> Result<Clustering, AggregationError> {
    let n = d.len();
    if k == 0 || k > n {
        return Err(AggregationError::InvalidParameter(format!("k = {k} with {n} points")));
    }
    let mut rng = XorShiftRng::seed_from_u64(seed);
    let mut medoids = initial_medoids(d, k, &mut rng);
    let (mut assignment, mut cost) = assign(d, &medoids);
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut next = medoids.clone();
        for (pos, slot) in next.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&p| assignment[p] == pos).collect();
            let within = |c: usize| members.iter().map(|&p| d[p][c]).sum::<f64>();
            let mut best = *slot;
            let mut best_cost = within(best);
            for &c in &members {
                let v = within(c);
                if v < best_cost - IMPROVEMENT_TOL {
                    best = c;
                    best_cost = v;
                }
            }
            *slot = best;
        }
        next.sort_unstable();
        let (a, c) = assign(d, &next);
        if next == medoids || c > cost - IMPROVEMENT_TOL {
            break;
        }
        medoids = next;
        assignment = a;
        cost = c;
    }
    // Swap refinement: accept the best improving (medoid, non-medoid) swap
    // until none improves.
    for _ in 0..MAX_SWEEPS * n.max(1) {
        let mut best: Option<(Vec<usize>, f64)> = None;
        for pos in 0..k {
            for cand in (0..n).filter(|c| !medoids.contains(c)) {
                let mut trial = medoids.clone();
                trial[pos] = cand;
                trial.sort_unstable();
                let c = assign(d, &trial).1;
                if c < best.as_ref().map_or(cost, |b| b.1) - IMPROVEMENT_TOL {
                    best = Some((trial, c));
                }
            }
        }
        let Some((trial, c)) = best else { break };
        medoids = trial;
        cost = c;
        sweeps += 1;
    }
    let (assignment, cost) = assign(d, &medoids);
    Ok(Clustering { assignment, medoids, cost, sweeps })
}

pub fn kmedoids_cluster(points: &[OptimalityCut], k: usize, measure: DistanceMeasure, seed: u64) -> Result<Clustering, AggregationError> {
    kmedoids_from_matrix(&distance_matrix(points, measure), k, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(grads: &[&[f64]]) -> Vec<OptimalityCut> {
        grads.iter().enumerate().map(|(s, g)| OptimalityCut::singleton(s, g.to_vec(), 1.0, 0)).collect()
    }

    /// Exhaustive minimum over all medoid sets of size k.
    fn brute_force(d: &[Vec<f64>], k: usize) -> f64 {
        let n = d.len();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize == k {
                let medoids: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
                best = best.min(assignment_cost(d, &medoids));
            }
        }
        best
    }

    #[test]
    fn three_cut_angular_example() {
        let p = pts(&[&[1.0, 0.0], &[1.0, 0.01], &[0.0, 1.0]]);
        let c = kmedoids_cluster(&p, 2, DistanceMeasure::Angular, 0).unwrap();
        assert_eq!(c.clusters(), vec![vec![0, 1], vec![2]]);
        let d = distance_matrix(&p, DistanceMeasure::Angular);
        assert!((c.cost - brute_force(&d, 2)).abs() <= 1e-15);
    }

    #[test]
    fn k_equals_points_is_zero_cost() {
        let p = pts(&[&[1.0, 0.0], &[1.0, 2.0], &[0.0, 1.0], &[3.0, 1.0]]);
        let c = kmedoids_cluster(&p, 4, DistanceMeasure::Angular, 3).unwrap();
        assert_eq!(c.medoids, vec![0, 1, 2, 3]);
        assert_eq!(c.cost, 0.0);
    }

    #[test]
    fn single_medoid_minimizes_total_distance() {
        let p = pts(&[&[1.0, 0.0], &[1.0, 0.3], &[1.0, 0.6], &[0.2, 1.0], &[1.0, 1.0]]);
        let d = distance_matrix(&p, DistanceMeasure::Angular);
        let c = kmedoids_from_matrix(&d, 1, 0).unwrap();
        let expected = (0..5)
            .min_by(|&a, &b| d[a].iter().sum::<f64>().total_cmp(&d[b].iter().sum::<f64>()))
            .unwrap();
        assert_eq!(c.medoids, vec![expected]);
    }

    #[test]
    fn duplicates_share_a_cluster() {
        let p = pts(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0]]);
        let c = kmedoids_cluster(&p, 2, DistanceMeasure::Angular, 9).unwrap();
        assert_eq!(c.assignment[0], c.assignment[2]);
        assert_ne!(c.assignment[0], c.assignment[1]);
    }

    #[test]
    fn k_out_of_range() {
        let p = pts(&[&[1.0]]);
        assert!(kmedoids_cluster(&p, 2, DistanceMeasure::Angular, 0).is_err());
        assert!(kmedoids_cluster(&p, 0, DistanceMeasure::Angular, 0).is_err());
    }

    proptest! {
        #[test]
        fn swap_local_optimality(
            raw in prop::collection::vec(prop::collection::vec(0.1f64..5.0, 2), 2..9),
            k in 1usize..5,
            seed in 0u64..1000,
        ) {
            let grads: Vec<&[f64]> = raw.iter().map(|v| v.as_slice()).collect();
            let p = pts(&grads);
            let k = k.min(p.len());
            let d = distance_matrix(&p, DistanceMeasure::Angular);
            let c = kmedoids_from_matrix(&d, k, seed).unwrap();
            for pos in 0..k {
                for cand in (0..p.len()).filter(|x| !c.medoids.contains(x)) {
                    let mut trial = c.medoids.clone();
                    trial[pos] = cand;
                    prop_assert!(c.cost <= assignment_cost(&d, &trial) + 1e-12);
                }
            }
            prop_assert_eq!(c, kmedoids_from_matrix(&d, k, seed).unwrap());
        }
    }
}
