//! Partitioning schemes and cut-aggregation strategies.
//!
//! Strategies operate on "units": the master's theta indices. A unit is a
//! scenario, except under granulated aggregation where it is a granule of
//! `T0` consecutive scenarios.

pub mod kmedoids;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::cuts::{aggregate, distance_or_absolute, CutError, DistanceMeasure, OptimalityCut};
pub use kmedoids::{kmedoids_cluster, Clustering};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AggregationError {
    #[error("invalid scheme parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot parse scheme '{input}': {reason}")]
    Parse { input: String, reason: String },
    #[error(transparent)]
    Cut(#[from] CutError),
}

/// Disjoint covering family of index sets over `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitioningScheme {
    pub parts: Vec<BTreeSet<usize>>,
    pub n: usize,
}

impl PartitioningScheme {
    pub fn new(parts: Vec<BTreeSet<usize>>, n: usize) -> Self {
        Self { parts, n }
    }

    pub fn from_cuts(cuts: &[OptimalityCut], n: usize) -> Self {
        Self { parts: cuts.iter().map(|c| c.members.clone()).collect(), n }
    }
}

/// Violations of disjointness, coverage, range and nonemptiness.
pub fn validate_partitioning(s: &PartitioningScheme) -> Vec<String> {
    let mut out = Vec::new();
    let mut seen = vec![false; s.n];
    for (a, part) in s.parts.iter().enumerate() {
        if part.is_empty() {
            out.push(format!("part {a} is empty"));
        }
        for &i in part {
            if i >= s.n {
                out.push(format!("index {i} out of range"));
            } else if seen[i] {
                out.push(format!("overlap at {i}"));
            } else {
                seen[i] = true;
            }
        }
    }
    let missing: Vec<String> = (0..s.n).filter(|&i| !seen[i]).map(|i| i.to_string()).collect();
    if !missing.is_empty() {
        out.push(format!("uncovered: {}", missing.join(", ")));
    }
    out
}

/// Aggregation size and level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchemeStats {
    pub a: usize,
    pub a_l: usize,
}

pub fn scheme_stats(s: &PartitioningScheme) -> SchemeStats {
    SchemeStats { a: s.parts.len(), a_l: s.parts.iter().map(BTreeSet::len).max().unwrap_or(0) }
}

/// `ceil(n / t)` contiguous blocks of size `t`, the last possibly shorter.
pub fn uniform_partition(n: usize, t: usize) -> Result<PartitioningScheme, AggregationError> {
    if t == 0 || t > n {
        return Err(AggregationError::InvalidParameter(format!("T = {t} outside 1..={n}")));
    }
    let parts = (0..n).step_by(t).map(|lo| (lo..(lo + t).min(n)).collect()).collect();
    Ok(PartitioningScheme { parts, n })
}

#[derive(Debug, Clone, PartialEq)]
pub enum DynamicRule {
    SelectUniform { t: usize },
    SelectClosest { a: usize, tau: f64, measure: DistanceMeasure },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClusterRule {
    Kmedoids { k: usize, measure: DistanceMeasure, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum AggregationScheme {
    MultiCut,
    SingleCut,
    Partial { t: usize },
    Dynamic(DynamicRule),
    Cluster(ClusterRule),
    Granulated { t0: usize, inner: Box<AggregationScheme> },
}

impl AggregationScheme {
    pub fn validate(&self) -> Result<(), AggregationError> {
        let bad = |m: String| Err(AggregationError::InvalidParameter(m));
        match self {
            Self::MultiCut | Self::SingleCut => Ok(()),
            Self::Partial { t } | Self::Dynamic(DynamicRule::SelectUniform { t }) if *t == 0 => bad("T must be at least 1".into()),
            Self::Partial { .. } | Self::Dynamic(DynamicRule::SelectUniform { .. }) => Ok(()),
            Self::Dynamic(DynamicRule::SelectClosest { a, tau, measure }) => {
                if *a == 0 {
                    bad("A must be at least 1".into())
                } else if !(*tau >= 0.0) || (*measure == DistanceMeasure::Angular && *tau > 1.0) {
                    bad(format!("tau = {tau} out of range for {measure}"))
                } else {
                    Ok(())
                }
            }
            Self::Cluster(ClusterRule::Kmedoids { k, .. }) if *k == 0 => bad("k must be at least 1".into()),
            Self::Cluster(_) => Ok(()),
            Self::Granulated { t0, inner } => {
                if *t0 == 0 {
                    bad("T0 must be at least 1".into())
                } else if matches!(**inner, Self::Granulated { .. }) {
                    bad("granulated inner scheme cannot be granulated".into())
                } else {
                    inner.validate()
                }
            }
        }
    }

    /// Number of master theta columns for `n` scenarios.
    pub fn theta_count(&self, n: usize) -> usize {
        match self {
            Self::Granulated { t0, .. } => n.div_ceil(*t0),
            _ => n,
        }
    }

    /// Scheme applied to unit-level cuts.
    pub fn unit_scheme(&self) -> &AggregationScheme {
        match self {
            Self::Granulated { inner, .. } => inner,
            other => other,
        }
    }
}

/// Sums scenario cuts into granule cuts whose single member is the granule
/// index `s / t0`.
pub fn granulate(cuts: &[OptimalityCut], t0: usize) -> Result<Vec<OptimalityCut>, AggregationError> {
    let mut groups: Vec<(usize, Vec<OptimalityCut>)> = Vec::new();
    for c in cuts {
        let s = *c.members.first().ok_or(CutError::Empty)?;
        let g = s / t0;
        if c.members.iter().any(|&m| m / t0 != g) {
            return Err(AggregationError::InvalidParameter(format!("cut spans granules at {s}")));
        }
        match groups.last_mut() {
            Some((last, list)) if *last == g => list.push(c.clone()),
            _ => groups.push((g, vec![c.clone()])),
        }
    }
    groups.sort_by_key(|(g, _)| *g);
    groups
        .into_iter()
        .map(|(g, list)| {
            let mut agg = aggregate(&list)?;
            agg.members = BTreeSet::from([g]);
            Ok(agg)
        })
        .collect()
}

fn sorted_output(mut out: Vec<OptimalityCut>) -> Vec<OptimalityCut> {
    out.sort_by_key(|c| c.members.first().copied());
    out
}

fn group_by<F: Fn(usize, &OptimalityCut) -> usize>(cuts: &[OptimalityCut], key: F) -> Result<Vec<OptimalityCut>, AggregationError> {
    let mut groups: std::collections::BTreeMap<usize, Vec<OptimalityCut>> = Default::default();
    for (i, c) in cuts.iter().enumerate() {
        groups.entry(key(i, c)).or_default().push(c.clone());
    }
    Ok(sorted_output(groups.values().map(|g| aggregate(g)).collect::<Result<_, _>>()?))
}

/// Aggregates of `t` consecutive unit indices. Blocks with skipped cuts
/// just hold fewer members, so block identity is stable across iterations.
fn select_uniform(cuts: &[OptimalityCut], t: usize) -> Result<Vec<OptimalityCut>, AggregationError> {
    group_by(cuts, |_, c| c.members.first().copied().unwrap_or(0) / t)
}

/// Streams cuts into `a` slots: a cut joins the closest open slot within
/// `tau`, else the first empty slot, else the closest open slot. A slot is
/// flushed as soon as it holds `ceil(n_units / a)` members.
fn select_closest(cuts: &[OptimalityCut], n_units: usize, a: usize, tau: f64, measure: DistanceMeasure) -> Result<Vec<OptimalityCut>, AggregationError> {
    let capacity = n_units.div_ceil(a).max(1);
    let mut slots: Vec<Option<OptimalityCut>> = vec![None; a];
    let mut out = Vec::new();
    for c in cuts {
        let mut closest: Option<(usize, f64)> = None;
        for (i, slot) in slots.iter().enumerate() {
            if let Some(agg) = slot {
                let d = distance_or_absolute(c, agg, measure);
                if closest.is_none_or(|(_, b)| d < b) {
                    closest = Some((i, d));
                }
            }
        }
        let target = match closest {
            Some((i, d)) if d <= tau => i,
            _ => match slots.iter().position(Option::is_none) {
                Some(empty) => empty,
                None => closest.expect("all slots occupied").0,
            },
        };
        let merged = match slots[target].take() {
            Some(agg) => aggregate(&[agg, c.clone()])?,
            None => c.clone(),
        };
        if merged.size() >= capacity {
            out.push(merged);
        } else {
            slots[target] = Some(merged);
        }
    }
    out.extend(slots.into_iter().flatten());
    Ok(sorted_output(out))
}

fn cluster(cuts: &[OptimalityCut], k: usize, measure: DistanceMeasure, seed: u64) -> Result<Vec<OptimalityCut>, AggregationError> {
    let c = kmedoids_cluster(cuts, k.min(cuts.len()), measure, seed)?;
    group_by(cuts, |i, _| c.assignment[i])
}

/// Aggregates one iteration's cuts. Inputs have singleton members over
/// `0..n_units`, ascending; outputs partition the input members and are
/// ordered by smallest member. Granulated schemes expect scenario-level
/// cuts and return granule-level cuts.
pub fn apply_scheme(scheme: &AggregationScheme, cuts: &[OptimalityCut], n_units: usize) -> Result<Vec<OptimalityCut>, AggregationError> {
    scheme.validate()?;
    if cuts.is_empty() {
        return Ok(Vec::new());
    }
    match scheme {
        AggregationScheme::MultiCut => Ok(cuts.to_vec()),
        AggregationScheme::SingleCut => Ok(vec![aggregate(cuts)?]),
        AggregationScheme::Partial { t } => group_by(cuts, |_, c| c.members.first().copied().unwrap_or(0) / t),
        AggregationScheme::Dynamic(DynamicRule::SelectUniform { t }) => select_uniform(cuts, *t),
        AggregationScheme::Dynamic(DynamicRule::SelectClosest { a, tau, measure }) => select_closest(cuts, n_units, *a, *tau, *measure),
        AggregationScheme::Cluster(ClusterRule::Kmedoids { k, measure, seed }) => cluster(cuts, *k, *measure, *seed),
        AggregationScheme::Granulated { t0, inner } => {
            let granules = granulate(cuts, *t0)?;
            apply_scheme(inner, &granules, n_units.div_ceil(*t0))
        }
    }
}

impl fmt::Display for AggregationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MultiCut => write!(f, "multi"),
            Self::SingleCut => write!(f, "single"),
            Self::Partial { t } => write!(f, "partial:T={t}"),
            Self::Dynamic(DynamicRule::SelectUniform { t }) => write!(f, "uniform:T={t}"),
            Self::Dynamic(DynamicRule::SelectClosest { a, tau, measure }) => write!(f, "closest:A={a},tau={tau},measure={measure}"),
            Self::Cluster(ClusterRule::Kmedoids { k, measure, seed }) => write!(f, "kmedoids:k={k},measure={measure},seed={seed}"),
            Self::Granulated { t0, inner } => write!(f, "granulated:T0={t0},inner={inner}"),
        }
    }
}

fn parse_params(input: &str, body: &str, allowed: &[&str]) -> Result<Vec<(String, String)>, AggregationError> {
    let err = |reason: String| AggregationError::Parse { input: input.to_string(), reason };
    let mut out = Vec::new();
    for item in body.split(',').filter(|s| !s.is_empty()) {
        let (k, v) = item.split_once('=').ok_or_else(|| err(format!("expected key=value, got '{item}'")))?;
        if !allowed.contains(&k) {
            return Err(err(format!("unknown parameter '{k}'")));
        }
        if out.iter().any(|(seen, _): &(String, String)| seen == k) {
            return Err(err(format!("duplicate parameter '{k}'")));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

fn lookup<T: FromStr>(input: &str, params: &[(String, String)], key: &str, default: Option<T>) -> Result<T, AggregationError> {
    let err = |reason: String| AggregationError::Parse { input: input.to_string(), reason };
    match params.iter().find(|(k, _)| k == key) {
        Some((_, v)) => v.parse().map_err(|_| err(format!("invalid value '{v}' for {key}"))),
        None => default.ok_or_else(|| err(format!("missing parameter {key}"))),
    }
}

impl FromStr for AggregationScheme {
    type Err = AggregationError;

    fn from_str(input: &str) -> Result<Self, AggregationError> {
        let input = input.trim();
        let (name, body) = input.split_once(':').unwrap_or((input, ""));
        let scheme = match name {
            "multi" | "single" if !body.is_empty() => {
                return Err(AggregationError::Parse { input: input.into(), reason: format!("{name} takes no parameters") })
            }
            "multi" => Self::MultiCut,
            "single" => Self::SingleCut,
            "partial" | "uniform" => {
                let p = parse_params(input, body, &["T"])?;
                let t = lookup(input, &p, "T", None)?;
                if name == "partial" {
                    Self::Partial { t }
                } else {
                    Self::Dynamic(DynamicRule::SelectUniform { t })
                }
            }
            "closest" => {
                let p = parse_params(input, body, &["A", "tau", "measure"])?;
                Self::Dynamic(DynamicRule::SelectClosest {
                    a: lookup(input, &p, "A", None)?,
                    tau: lookup(input, &p, "tau", None)?,
                    measure: lookup(input, &p, "measure", Some(DistanceMeasure::Angular))?,
                })
            }
            "kmedoids" => {
                let p = parse_params(input, body, &["k", "measure", "seed"])?;
                Self::Cluster(ClusterRule::Kmedoids {
                    k: lookup(input, &p, "k", None)?,
                    measure: lookup(input, &p, "measure", Some(DistanceMeasure::Angular))?,
                    seed: lookup(input, &p, "seed", Some(0))?,
                })
            }
            "granulated" => {
                let (head, inner) = body.split_once("inner=").ok_or_else(|| AggregationError::Parse {
                    input: input.into(),
                    reason: "missing parameter inner".into(),
                })?;
                let p = parse_params(input, head, &["T0"])?;
                Self::Granulated { t0: lookup(input, &p, "T0", None)?, inner: Box::new(inner.parse()?) }
            }
            other => {
                return Err(AggregationError::Parse { input: input.into(), reason: format!("unknown scheme '{other}'") })
            }
        };
        scheme.validate()?;
        Ok(scheme)
    }
}
