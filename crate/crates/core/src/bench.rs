//! Parameter sweeps against the multi-cut and single-cut baselines.
//!
//! CSV columns, in order:
//! `scheme,param,value,n_iterations,n_cuts,time_seconds,rel_cut,rel_iter,rel_time,status`.
//! The relative columns are empty when the swept run did not converge.

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::{AggregationError, AggregationScheme};
use crate::engine::{compute_relative_complexities, solve_lshaped, EngineConfig, EngineError, Metrics, SolveReport, SolveStatus};
use crate::problem::TwoStageProblem;

pub const CSV_HEADER: [&str; 10] =
    ["scheme", "param", "value", "n_iterations", "n_cuts", "time_seconds", "rel_cut", "rel_iter", "rel_time", "status"];

pub const DEFAULT_REPEATS: usize = 5;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid sweep '{input}': {reason}")]
    Sweep { input: String, reason: String },
    #[error("repeats must be at least 1")]
    Repeats,
    #[error(transparent)]
    Scheme(#[from] AggregationError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{0} baseline did not converge")]
    Baseline(&'static str),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scheme: String,
    pub param: String,
    pub value: String,
    pub n_iterations: usize,
    pub n_cuts: usize,
    pub time_seconds: f64,
    pub rel_cut: Option<f64>,
    pub rel_iter: Option<f64>,
    pub rel_time: Option<f64>,
    pub status: SolveStatus,
}

/// A parameter name with the values to try.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: String,
    pub values: Vec<String>,
}

impl Sweep {
    /// `T=1:32:1` (inclusive range with step), `T=1,5,10` (list) or `T=4`.
    pub fn parse(input: &str) -> Result<Self, BenchError> {
        let fail = |reason: &str| BenchError::Sweep { input: input.into(), reason: reason.into() };
        let (param, rest) = input.split_once('=').ok_or_else(|| fail("expected NAME=VALUES"))?;
        let param = param.trim();
        if param.is_empty() || !param.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(fail("invalid parameter name"));
        }
        let rest = rest.trim();
        let values = if rest.contains(':') {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(fail("range must be START:END:STEP"));
            }
            let nums: Vec<usize> = parts
                .iter()
                .map(|p| p.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|_| fail("range bounds must be nonnegative integers"))?;
            let (start, end, step) = (nums[0], nums[1], nums[2]);
            if step == 0 || start > end {
                return Err(fail("range needs START <= END and STEP >= 1"));
            }
            (start..=end).step_by(step).map(|v| v.to_string()).collect()
        } else {
            rest.split(',').map(|v| v.trim().to_string()).collect::<Vec<_>>()
        };
        if values.iter().any(|v| v.is_empty() || v.contains([',', ':', '='])) {
            return Err(fail("empty or malformed value"));
        }
        Ok(Self { param: param.to_string(), values })
    }
}

/// Adds `param=value` to the top-level parameters of a scheme string.
pub fn with_param(scheme: &str, param: &str, value: &str) -> String {
    let scheme = scheme.trim();
    match scheme.split_once(':') {
        None => format!("{scheme}:{param}={value}"),
        Some((name, body)) if body.is_empty() => format!("{name}:{param}={value}"),
        Some((name, body)) => format!("{name}:{param}={value},{body}"),
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs `cfg.scheme` `repeats` times; the counts come from the first run and
/// the time is the median wall clock.
pub fn run_repeated(p: &TwoStageProblem, cfg: &EngineConfig, repeats: usize) -> Result<(SolveReport, Metrics), BenchError> {
    if repeats == 0 {
        return Err(BenchError::Repeats);
    }
    let first = solve_lshaped(p, cfg)?;
    let mut times = vec![first.metrics.time_seconds];
    for _ in 1..repeats {
        times.push(solve_lshaped(p, cfg)?.metrics.time_seconds);
    }
    let metrics = Metrics { time_seconds: median(&times), ..first.metrics };
    Ok((first, metrics))
}

pub struct Baselines {
    pub multi: Metrics,
    pub single: Metrics,
}

/// One run each of the multi-cut and single-cut schemes.
pub fn run_baselines(p: &TwoStageProblem, cfg: &EngineConfig) -> Result<Baselines, BenchError> {
    let run = |scheme, label| -> Result<Metrics, BenchError> {
        let r = solve_lshaped(p, &EngineConfig { scheme, ..cfg.clone() })?;
        if r.status != SolveStatus::Converged {
            return Err(BenchError::Baseline(label));
        }
        Ok(r.metrics)
    };
    Ok(Baselines { multi: run(AggregationScheme::MultiCut, "multi-cut")?, single: run(AggregationScheme::SingleCut, "single-cut")? })
}

pub fn bench_row(scheme: &str, param: &str, value: &str, report: &SolveReport, metrics: &Metrics, base: &Baselines) -> BenchRow {
    let rel = (report.status == SolveStatus::Converged).then(|| compute_relative_complexities(metrics, &base.multi, &base.single));
    BenchRow {
        scheme: scheme.to_string(),
        param: param.to_string(),
        value: value.to_string(),
        n_iterations: metrics.iterations,
        n_cuts: metrics.cuts,
        time_seconds: metrics.time_seconds,
        rel_cut: rel.map(|r| r.rel_cut),
        rel_iter: rel.map(|r| r.rel_iter),
        rel_time: rel.map(|r| r.rel_time),
        status: report.status,
    }
}

/// Baselines once, then `scheme` with each sweep value. Without a sweep the
/// scheme runs once with parameter and value left empty.
pub fn run_sweep(
    p: &TwoStageProblem,
    cfg: &EngineConfig,
    scheme: &str,
    sweep: Option<&Sweep>,
    repeats: usize,
) -> Result<Vec<BenchRow>, BenchError> {
    if repeats == 0 {
        return Err(BenchError::Repeats);
    }
    let points: Vec<(String, String, String)> = match sweep {
        Some(s) => s.values.iter().map(|v| (with_param(scheme, &s.param, v), s.param.clone(), v.clone())).collect(),
        None => vec![(scheme.to_string(), String::new(), String::new())],
    };
    let schemes = points
        .iter()
        .map(|(text, _, _)| text.parse::<AggregationScheme>())
        .collect::<Result<Vec<_>, _>>()?;
    let base = run_baselines(p, cfg)?;
    let mut rows = Vec::with_capacity(points.len());
    for ((_, param, value), s) in points.iter().zip(schemes) {
        let label = s.to_string();
        log::info!("bench {label}");
        let (report, metrics) = run_repeated(p, &EngineConfig { scheme: s, ..cfg.clone() }, repeats)?;
        rows.push(bench_row(&label, param, value, &report, &metrics, &base));
    }
    Ok(rows)
}

pub fn write_csv<W: io::Write>(rows: &[BenchRow], out: W) -> Result<(), BenchError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<BenchRow>, BenchError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(BenchError::Io(io::Error::new(io::ErrorKind::InvalidData, format!("unexpected header {header:?}"))));
    }
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{random_problem, GeneratorConfig};
    use proptest::prelude::*;

    #[test]
    fn sweep_forms() {
        assert_eq!(Sweep::parse("T=1:7:3").unwrap().values, vec!["1", "4", "7"]);
        assert_eq!(Sweep::parse("tau=0.1,0.5").unwrap().values, vec!["0.1", "0.5"]);
        assert_eq!(Sweep::parse("k=3").unwrap(), Sweep { param: "k".into(), values: vec!["3".into()] });
        for bad in ["T", "=1", "T=5:1:1", "T=1:5:0", "T=1:5", "T=a:b:c", "T=1,,2"] {
            assert!(Sweep::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn param_insertion() {
        assert_eq!(with_param("partial", "T", "4"), "partial:T=4");
        assert_eq!(with_param("closest:tau=0.3", "A", "2"), "closest:A=2,tau=0.3");
        let s = with_param("granulated:inner=kmedoids:k=3", "T0", "2");
        assert_eq!(s.parse::<AggregationScheme>().unwrap().to_string(), "granulated:T0=2,inner=kmedoids:k=3,measure=angular,seed=0");
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[5.0, 9.0, 1.0, 7.0, 3.0]), 5.0);
    }

    #[test]
    fn multi_cut_target_has_unit_rel_cut() {
        let p = random_problem(&GeneratorConfig::new(2, 1, 8), 3);
        let cfg = EngineConfig { workers: 1, ..EngineConfig::default() };
        let rows = run_sweep(&p, &cfg, "multi", None, 1).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].rel_cut, Some(1.0));
    }

    #[test]
    fn sweep_rows_match_reports() {
        let p = random_problem(&GeneratorConfig::new(2, 1, 8), 5);
        let cfg = EngineConfig { workers: 1, ..EngineConfig::default() };
        let rows = run_sweep(&p, &cfg, "partial", Some(&Sweep::parse("T=1:8:7").unwrap()), 1).unwrap();
        let multi = solve_lshaped(&p, &EngineConfig { scheme: AggregationScheme::MultiCut, ..cfg.clone() }).unwrap();
        let t1 = solve_lshaped(&p, &EngineConfig { scheme: AggregationScheme::Partial { t: 1 }, ..cfg.clone() }).unwrap();
        assert_eq!(rows[0].value, "1");
        assert_eq!(rows[0].n_cuts, t1.metrics.cuts);
        let expected = t1.metrics.cuts as f64 / multi.metrics.cuts as f64;
        assert!((rows[0].rel_cut.unwrap() - expected).abs() <= 1e-9);
    }

    fn row() -> impl Strategy<Value = BenchRow> {
        let opt = || proptest::option::of(0.0f64..1e3);
        (
            "[a-z]{1,8}(:[A-Za-z]=[0-9]{1,3})?",
            "[A-Za-z]{0,3}",
            "[0-9.]{0,4}",
            0usize..10_000,
            0usize..10_000,
            0.0f64..1e3,
            opt(),
            opt(),
            opt(),
            prop_oneof![Just(SolveStatus::Converged), Just(SolveStatus::IterationLimit), Just(SolveStatus::MasterInfeasible)],
        )
            .prop_map(|(scheme, param, value, n_iterations, n_cuts, time_seconds, rel_cut, rel_iter, rel_time, status)| BenchRow {
                scheme,
                param,
                value,
                n_iterations,
                n_cuts,
                time_seconds,
                rel_cut,
                rel_iter,
                rel_time,
                status,
            })
    }

    proptest! {
        #[test]
        fn csv_round_trip(rows in proptest::collection::vec(row(), 0..6)) {
            let mut buf = Vec::new();
            write_csv(&rows, &mut buf).unwrap();
            let text = String::from_utf8(buf.clone()).unwrap();
            prop_assert!(text.starts_with("scheme,param,value,n_iterations,n_cuts,time_seconds,rel_cut,rel_iter,rel_time,status\n"));
            prop_assert_eq!(read_csv(buf.as_slice()).unwrap(), rows);
        }
    }
}
