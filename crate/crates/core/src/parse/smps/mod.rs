//! SMPS reader for two-period problems with independent discrete
//! randomness.
//!
//! The CORE file is converted to equality form with nonnegative columns:
//!
//! * `L` and `G` rows get a slack (`+s`, `-s`) in the row's period.
//! * A ranged row becomes `a'x - s = lo` plus `s + t = hi - lo`.
//! * Finite bounds other than `x >= 0` become rows in the column's period.
//!   Columns with a negative or missing lower bound are split into
//!   `x+ - x-`.
//!
//! First-period columns form `x`, second-period columns form `y`. Random
//! right-hand sides on ranged rows shift the whole range.

pub mod mps;
pub mod stoch;
pub mod time;

use std::collections::HashMap;

use mps::{Mps, RowKind};
use stoch::Distribution;
use time::{Periods, Time};

use super::{ParseDiagnostic, SourceFile};
use crate::problem::{FirstStage, Matrix, Outcome, RandomEntry, RandomTarget, ScenarioData, StochasticTemplate};

/// Tolerance on the probability sum of one distribution. Accepted
/// distributions are renormalized.
pub const PROBABILITY_SUM_TOL: f64 = 1e-6;

/// Raw contents of the three SMPS files.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SmpsTriple {
    pub core_text: String,
    pub time_text: String,
    pub stoch_text: String,
}

impl SmpsTriple {
    pub fn new(core: impl Into<String>, time: impl Into<String>, stoch: impl Into<String>) -> Self {
        Self { core_text: core.into(), time_text: time.into(), stoch_text: stoch.into() }
    }
}

/// Parses a CORE/TIME/STOCH triple. Diagnostics from all three files are
/// reported together.
pub fn parse_smps(files: &SmpsTriple) -> Result<StochasticTemplate, Vec<ParseDiagnostic>> {
    let mut diags = Vec::new();
    let m = mps::parse_mps(&files.core_text).map_err(|d| diags.extend(d)).ok();
    let t = time::parse_time(&files.time_text).map_err(|d| diags.extend(d)).ok();
    let s = stoch::parse_stoch(&files.stoch_text).map_err(|d| diags.extend(d)).ok();
    match (m, t, s) {
        (Some(m), Some(t), Some(s)) => assemble(&m, &t, &s),
        _ => Err(diags),
    }
}

/// As [`parse_smps`], rejecting input that is not UTF-8.
pub fn parse_smps_bytes(core: &[u8], time: &[u8], stoch: &[u8]) -> Result<StochasticTemplate, Vec<ParseDiagnostic>> {
    let mut diags = Vec::new();
    let mut text = |bytes: &'_ [u8], file: SourceFile| match std::str::from_utf8(bytes) {
        Ok(s) => s.to_string(),
        Err(e) => {
            let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
            diags.push(ParseDiagnostic::new(file, line, "invalid UTF-8"));
            String::new()
        }
    };
    let (c, t, s) = (text(core, SourceFile::Core), text(time, SourceFile::Time), text(stoch, SourceFile::Stoch));
    if !diags.is_empty() {
        return Err(diags);
    }
    parse_smps(&SmpsTriple { core_text: c, time_text: t, stoch_text: s })
}

struct Stages {
    rows: Vec<usize>,
    cols: Vec<usize>,
}

fn stages(m: &Mps, t: &Time, diags: &mut Vec<ParseDiagnostic>) -> Option<Stages> {
    match &t.periods {
        Periods::Explicit { rows, cols } => {
            let mut lookup = |name: &str, line: usize, map: &HashMap<String, (usize, usize)>, what: &str| match map.get(name) {
                Some(&(k, _)) => k,
                None => {
                    diags.push(ParseDiagnostic::new(SourceFile::Core, line, format!("{what} '{name}' has no period")));
                    0
                }
            };
            let r = m.rows.iter().map(|r| lookup(&r.name, r.line, rows, "row")).collect();
            let c = m.columns.iter().map(|c| lookup(&c.name, c.line, cols, "column")).collect();
            for (name, &(_, line)) in rows.iter().chain(cols.iter()) {
                if !m.row_index.contains_key(name) && !m.col_index.contains_key(name) {
                    diags.push(ParseDiagnostic::new(SourceFile::Time, line, format!("unknown name '{name}'")));
                }
            }
            Some(Stages { rows: r, cols: c })
        }
        Periods::Implicit(marks) => {
            if marks.len() != 2 {
                diags.push(ParseDiagnostic::new(SourceFile::Time, 1, "mixed implicit and explicit periods"));
                return None;
            }
            let col_at = |k: usize, diags: &mut Vec<ParseDiagnostic>| match m.col_index.get(&marks[k].0) {
                Some(&c) => Some(c),
                None => {
                    diags.push(ParseDiagnostic::new(SourceFile::Time, marks[k].2, format!("unknown column '{}'", marks[k].0)));
                    None
                }
            };
            // The objective row marks a period without constraint rows.
            let row_at = |k: usize, diags: &mut Vec<ParseDiagnostic>| {
                if marks[k].1 == m.objective {
                    return Some(None);
                }
                match m.row_index.get(&marks[k].1) {
                    Some(&r) => Some(Some(r)),
                    None => {
                        diags.push(ParseDiagnostic::new(SourceFile::Time, marks[k].2, format!("unknown row '{}'", marks[k].1)));
                        None
                    }
                }
            };
            let (c0, c1) = (col_at(0, diags)?, col_at(1, diags)?);
            let (r0, r1) = (row_at(0, diags)?, row_at(1, diags)?);
            if c0 != 0 {
                diags.push(ParseDiagnostic::new(SourceFile::Time, marks[0].2, "first period must start at the first column"));
            }
            if c1 <= c0 {
                diags.push(ParseDiagnostic::new(SourceFile::Time, marks[1].2, "second period must start after the first"));
            }
            if matches!(r0, Some(r) if r != 0) {
                diags.push(ParseDiagnostic::new(SourceFile::Time, marks[0].2, "first period must start at the first row"));
            }
            let split_row = r1.unwrap_or(m.rows.len());
            if r1.is_some() && r0.is_none() && split_row != 0 {
                diags.push(ParseDiagnostic::new(SourceFile::Time, marks[0].2, "first period has rows but starts at the objective"));
            }
            Some(Stages {
                rows: (0..m.rows.len()).map(|r| usize::from(r >= split_row)).collect(),
                cols: (0..m.columns.len()).map(|c| usize::from(c >= c1)).collect(),
            })
        }
    }
}

#[derive(Default)]
struct Standard {
    col_stage: Vec<usize>,
    cost: Vec<f64>,
    row_stage: Vec<usize>,
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
}

impl Standard {
    fn column(&mut self, stage: usize, cost: f64) -> usize {
        self.col_stage.push(stage);
        self.cost.push(cost);
        self.col_stage.len() - 1
    }

    fn row(&mut self, stage: usize, entries: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.row_stage.push(stage);
        self.rows.push(entries);
        self.rhs.push(rhs);
        self.rows.len() - 1
    }
}

/// Interval `[lo, hi]` of a ranged row.
fn range_interval(kind: RowKind, rhs: f64, r: f64) -> (f64, f64) {
    match kind {
        RowKind::E if r >= 0.0 => (rhs, rhs + r),
        RowKind::E => (rhs + r, rhs),
        RowKind::L => (rhs - r.abs(), rhs),
        RowKind::G => (rhs, rhs + r.abs()),
    }
}

fn assemble(m: &Mps, t: &Time, dists: &[Distribution]) -> Result<StochasticTemplate, Vec<ParseDiagnostic>> {
    let mut diags = Vec::new();
    let Some(st) = stages(m, t, &mut diags) else { return Err(diags) };
    if !diags.is_empty() {
        return Err(diags);
    }

    let mut sf = Standard::default();
    let rep: Vec<Vec<(usize, f64)>> = m
        .columns
        .iter()
        .zip(&st.cols)
        .map(|(c, &stage)| {
            let mut r = vec![(sf.column(stage, c.cost), 1.0)];
            if c.lower < 0.0 {
                r.push((sf.column(stage, -c.cost), -1.0));
            }
            r
        })
        .collect();

    let mut row_std = Vec::with_capacity(m.rows.len());
    let mut rhs_offset = Vec::with_capacity(m.rows.len());
    let mut entries = vec![Vec::new(); m.rows.len()];
    for &(r, c, v) in &m.entries {
        entries[r].extend(rep[c].iter().map(|&(k, sign)| (k, sign * v)));
        if st.rows[r] < st.cols[c] {
            diags.push(ParseDiagnostic::new(
                SourceFile::Core,
                m.columns[c].line,
                format!("first-period row '{}' references second-period column '{}'", m.rows[r].name, m.columns[c].name),
            ));
        }
    }
    let mut ranges = Vec::new();
    for (r, row) in m.rows.iter().enumerate() {
        let stage = st.rows[r];
        let mut e = std::mem::take(&mut entries[r]);
        let (rhs, offset) = match (row.range, row.kind) {
            (Some(range), kind) if !(kind == RowKind::E && range == 0.0) => {
                let (lo, hi) = range_interval(kind, row.rhs, range);
                let s = sf.column(stage, 0.0);
                e.push((s, -1.0));
                ranges.push((stage, s, hi - lo));
                (lo, lo - row.rhs)
            }
            (_, RowKind::E) => (row.rhs, 0.0),
            (_, RowKind::L) => {
                e.push((sf.column(stage, 0.0), 1.0));
                (row.rhs, 0.0)
            }
            (_, RowKind::G) => {
                e.push((sf.column(stage, 0.0), -1.0));
                (row.rhs, 0.0)
            }
        };
        row_std.push(sf.row(stage, e, rhs));
        rhs_offset.push(offset);
    }
    for (stage, s, width) in ranges {
        let u = sf.column(stage, 0.0);
        sf.row(stage, vec![(s, 1.0), (u, 1.0)], width);
    }
    for (c, col) in m.columns.iter().enumerate() {
        let stage = st.cols[c];
        if col.lower == col.upper {
            sf.row(stage, rep[c].clone(), col.lower);
            continue;
        }
        if col.lower.is_finite() && col.lower != 0.0 {
            let mut e = rep[c].clone();
            e.push((sf.column(stage, 0.0), -1.0));
            sf.row(stage, e, col.lower);
        }
        if col.upper.is_finite() {
            let mut e = rep[c].clone();
            e.push((sf.column(stage, 0.0), 1.0));
            sf.row(stage, e, col.upper);
        }
    }

    // Positions within x / y and within first / second-period rows.
    let position = |stages: &[usize]| {
        let mut count = [0usize; 2];
        stages
            .iter()
            .map(|&s| {
                count[s] += 1;
                count[s] - 1
            })
            .collect::<Vec<_>>()
    };
    let col_pos = position(&sf.col_stage);
    let row_pos = position(&sf.row_stage);
    let count = |stages: &[usize], k: usize| stages.iter().filter(|&&s| s == k).count();
    let (n, mm) = (count(&sf.col_stage, 0), count(&sf.col_stage, 1));
    let (p, m2) = (count(&sf.row_stage, 0), count(&sf.row_stage, 1));

    let mut a = Matrix::zeros(p, n);
    let mut tm = Matrix::zeros(m2, n);
    let mut w = Matrix::zeros(m2, mm);
    let (mut b, mut h) = (Vec::with_capacity(p), Vec::with_capacity(m2));
    for (i, row) in sf.rows.iter().enumerate() {
        let ri = row_pos[i];
        for &(k, v) in row {
            let ck = col_pos[k];
            let target = match (sf.row_stage[i], sf.col_stage[k]) {
                (0, 0) => &mut a,
                (1, 0) => &mut tm,
                (1, 1) => &mut w,
                _ => continue,
            };
            target.set(ri, ck, target.get(ri, ck) + v);
        }
        if sf.row_stage[i] == 0 {
            b.push(sf.rhs[i]);
        } else {
            h.push(sf.rhs[i]);
        }
    }
    let split_cost = |k: usize| sf.col_stage.iter().zip(&sf.cost).filter(|(s, _)| **s == k).map(|(_, c)| *c).collect::<Vec<_>>();
    let (c, q) = (split_cost(0), split_cost(1));

    let mut random = Vec::with_capacity(dists.len());
    for d in dists {
        let fail = |msg: String| ParseDiagnostic::new(SourceFile::Stoch, d.line, msg);
        if d.period != t.names[1] {
            diags.push(fail(format!("random data must belong to period '{}'", t.names[1])));
            continue;
        }
        let col = m.col_index.get(&d.column).copied();
        let target = if d.row == m.objective {
            match col {
                None => Err(format!("unknown column '{}'", d.column)),
                Some(c) if st.cols[c] == 0 => Err(format!("random first-period cost on '{}' is not supported", d.column)),
                Some(c) if rep[c].len() > 1 => Err(format!("random cost on free column '{}' is not supported", d.column)),
                Some(c) => Ok((RandomTarget::Cost { col: col_pos[rep[c][0].0] }, 0.0)),
            }
        } else {
            match (m.row_index.get(&d.row).copied(), col) {
                (None, _) => Err(format!("unknown row '{}'", d.row)),
                (Some(r), _) if st.rows[r] == 0 => Err(format!("random first-period row '{}' is not supported", d.row)),
                (Some(r), None) => Ok((RandomTarget::Rhs { row: row_pos[row_std[r]] }, rhs_offset[r])),
                (Some(_), Some(c)) if st.cols[c] == 1 => Err(format!("random recourse coefficient ('{}', '{}') is not supported", d.column, d.row)),
                (Some(_), Some(c)) if rep[c].len() > 1 => Err(format!("random coefficient on free column '{}' is not supported", d.column)),
                (Some(r), Some(c)) => Ok((RandomTarget::Technology { row: row_pos[row_std[r]], col: col_pos[rep[c][0].0] }, 0.0)),
            }
        };
        match target {
            Ok((target, shift)) => {
                let total: f64 = d.outcomes.iter().map(|o| o.1).sum();
                random.push(RandomEntry {
                    target,
                    outcomes: d.outcomes.iter().map(|&(v, pr)| Outcome { value: v + shift, probability: pr / total }).collect(),
                });
            }
            Err(msg) => diags.push(fail(msg)),
        }
    }
    if !diags.is_empty() {
        return Err(diags);
    }
    let template = StochasticTemplate {
        name: m.name.clone(),
        first: FirstStage { c, a, b },
        recourse: w,
        nominal: ScenarioData { q, t: tm, h },
        random,
    };
    let violations = template.validate();
    if violations.is_empty() {
        Ok(template)
    } else {
        Err(violations.into_iter().map(|v| ParseDiagnostic::new(SourceFile::Core, 1, v)).collect())
    }
}
