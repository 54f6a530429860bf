//! Fixed-format MPS (CORE file), tokenized on whitespace. Names may not
//! contain spaces.

use std::collections::HashMap;

use crate::parse::{ParseDiagnostic, SourceFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    E,
    L,
    G,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub kind: RowKind,
    pub rhs: f64,
    pub range: Option<f64>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub cost: f64,
    pub lower: f64,
    pub upper: f64,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mps {
    pub name: String,
    pub objective: String,
    /// Constraint rows in file order; objective rows excluded.
    pub rows: Vec<Row>,
    pub columns: Vec<Column>,
    /// `(row, column, value)`.
    pub entries: Vec<(usize, usize, f64)>,
    pub rhs_set: Option<String>,
    pub row_index: HashMap<String, usize>,
    pub col_index: HashMap<String, usize>,
    /// Extra `N` rows, ignored.
    pub free_rows: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
    End,
}

/// Lines with their one-based numbers, without comments and blanks.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end()))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('*'))
}

pub(crate) fn is_header(line: &str) -> bool {
    !line.starts_with(char::is_whitespace)
}

pub(crate) fn number(tok: &str, line: usize, file: SourceFile, diags: &mut Vec<ParseDiagnostic>) -> Option<f64> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => {
            diags.push(ParseDiagnostic::new(file, line, format!("invalid number '{tok}'")));
            None
        }
    }
}

fn diag(diags: &mut Vec<ParseDiagnostic>, line: usize, message: impl Into<String>) {
    diags.push(ParseDiagnostic::new(SourceFile::Core, line, message));
}

/// `(row, value)` pairs of a data line after `skip` leading tokens.
fn pairs<'a>(toks: &[&'a str], skip: usize, line: usize, diags: &mut Vec<ParseDiagnostic>) -> Vec<(&'a str, f64)> {
    let rest = &toks[skip.min(toks.len())..];
    if rest.is_empty() || rest.len() % 2 != 0 || rest.len() > 4 {
        diag(diags, line, "expected one or two name/value pairs");
        return Vec::new();
    }
    rest.chunks(2)
        .filter_map(|c| number(c[1], line, SourceFile::Core, diags).map(|v| (c[0], v)))
        .collect()
}

pub fn parse_mps(text: &str) -> Result<Mps, Vec<ParseDiagnostic>> {
    let mut mps = Mps::default();
    let mut diags = Vec::new();
    let mut section = Section::None;
    let mut seen_entries: HashMap<(usize, usize), usize> = HashMap::new();
    let mut objective_set = false;
    let mut seen = Vec::new();
    let mut last_line = 0;

    for (line, raw) in content_lines(text) {
        last_line = line;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if is_header(raw) {
            let next = match toks[0] {
                "NAME" => {
                    mps.name = toks.get(1).copied().unwrap_or("").to_string();
                    Section::None
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                other => {
                    diag(&mut diags, line, format!("unknown section '{other}'"));
                    return Err(diags);
                }
            };
            if next != Section::None && seen.contains(&next) {
                diag(&mut diags, line, format!("duplicate section {}", toks[0]));
            }
            seen.push(next);
            section = next;
            if section == Section::End {
                break;
            }
            continue;
        }
        match section {
            Section::None | Section::End => diag(&mut diags, line, "data line outside a section"),
            Section::Rows => {
                if toks.len() != 2 {
                    diag(&mut diags, line, "expected row type and name");
                    continue;
                }
                let name = toks[1].to_string();
                if mps.row_index.contains_key(&name) || mps.objective == name || mps.free_rows.contains(&name) {
                    diag(&mut diags, line, format!("duplicate row '{name}'"));
                    continue;
                }
                let kind = match toks[0] {
                    "N" => {
                        if objective_set {
                            mps.free_rows.push(name);
                        } else {
                            mps.objective = name;
                            objective_set = true;
                        }
                        continue;
                    }
                    "E" => RowKind::E,
                    "L" => RowKind::L,
                    "G" => RowKind::G,
                    other => {
                        diag(&mut diags, line, format!("unknown row type '{other}'"));
                        continue;
                    }
                };
                mps.row_index.insert(name.clone(), mps.rows.len());
                mps.rows.push(Row { name, kind, rhs: 0.0, range: None, line });
            }
            Section::Columns => {
                if toks.iter().any(|t| t.contains("MARKER")) {
                    diag(&mut diags, line, "integer markers are not supported");
                    continue;
                }
                if toks.len() < 3 {
                    diag(&mut diags, line, "expected column name and name/value pairs");
                    continue;
                }
                let col = match mps.col_index.get(toks[0]) {
                    Some(&c) if c + 1 == mps.columns.len() => c,
                    Some(_) => {
                        diag(&mut diags, line, format!("column '{}' is not contiguous", toks[0]));
                        continue;
                    }
                    None => {
                        mps.col_index.insert(toks[0].to_string(), mps.columns.len());
                        mps.columns.push(Column { name: toks[0].to_string(), cost: 0.0, lower: 0.0, upper: f64::INFINITY, line });
                        mps.columns.len() - 1
                    }
                };
                for (row, value) in pairs(&toks, 1, line, &mut diags) {
                    if row == mps.objective {
                        mps.columns[col].cost = value;
                    } else if mps.free_rows.iter().any(|r| r == row) {
                    } else if let Some(&r) = mps.row_index.get(row) {
                        if seen_entries.insert((r, col), line).is_some() {
                            diag(&mut diags, line, format!("duplicate entry for row '{row}'"));
                        }
                        if value != 0.0 {
                            mps.entries.push((r, col, value));
                        }
                    } else {
                        diag(&mut diags, line, format!("unknown row '{row}'"));
                    }
                }
            }
            Section::Rhs | Section::Ranges => {
                let skip = usize::from(toks.len() % 2 == 1);
                if skip == 1 {
                    let set = toks[0];
                    if section == Section::Rhs {
                        match &mps.rhs_set {
                            None => mps.rhs_set = Some(set.to_string()),
                            Some(s) if s != set => {
                                diag(&mut diags, line, format!("multiple RHS sets ('{s}' and '{set}')"));
                                continue;
                            }
                            _ => {}
                        }
                    }
                }
                for (row, value) in pairs(&toks, skip, line, &mut diags) {
                    if row == mps.objective {
                        diag(&mut diags, line, "objective constants are not supported");
                    } else if let Some(&r) = mps.row_index.get(row) {
                        if section == Section::Rhs {
                            mps.rows[r].rhs = value;
                        } else {
                            mps.rows[r].range = Some(value);
                        }
                    } else {
                        diag(&mut diags, line, format!("unknown row '{row}'"));
                    }
                }
            }
            Section::Bounds => {
                let Some(&kind) = toks.first() else { continue };
                let needs_value = !matches!(kind, "FR" | "MI" | "PL");
                let expected = if needs_value { [3, 4] } else { [2, 3] };
                if !expected.contains(&toks.len()) {
                    diag(&mut diags, line, format!("malformed {kind} bound"));
                    continue;
                }
                let name_at = if toks.len() == expected[1] { 2 } else { 1 };
                let Some(&col) = mps.col_index.get(toks[name_at]) else {
                    diag(&mut diags, line, format!("unknown column '{}'", toks[name_at]));
                    continue;
                };
                let value = if needs_value {
                    match number(toks[name_at + 1], line, SourceFile::Core, &mut diags) {
                        Some(v) => v,
                        None => continue,
                    }
                } else {
                    0.0
                };
                let c = &mut mps.columns[col];
                match kind {
                    "UP" => {
                        if value < 0.0 && c.lower == 0.0 {
                            diag(&mut diags, line, "negative upper bound with zero lower bound");
                            continue;
                        }
                        c.upper = value;
                    }
                    "LO" => c.lower = value,
                    "FX" => {
                        c.lower = value;
                        c.upper = value;
                    }
                    "FR" => {
                        c.lower = f64::NEG_INFINITY;
                        c.upper = f64::INFINITY;
                    }
                    "MI" => c.lower = f64::NEG_INFINITY,
                    "PL" => c.upper = f64::INFINITY,
                    "BV" | "LI" | "UI" | "SC" => diag(&mut diags, line, format!("integer bound type {kind} is not supported")),
                    other => diag(&mut diags, line, format!("unknown bound type '{other}'")),
                }
            }
        }
    }
    if !seen.contains(&Section::End) {
        diag(&mut diags, last_line, "missing ENDATA");
    }
    if !objective_set {
        diag(&mut diags, 1, "no objective row");
    }
    for c in &mps.columns {
        if c.lower > c.upper {
            diag(&mut diags, c.line, format!("column '{}' has empty bounds", c.name));
        }
    }
    if diags.is_empty() {
        Ok(mps)
    } else {
        Err(diags)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CORE: &str = "\
NAME          TINY
ROWS
 N  COST
 L  CAP
 G  DEM
COLUMNS
    X         COST      1.0        CAP       1.0
    X         DEM       2.0
    Y         COST      3.0        DEM       1.0
RHS
    RHS       CAP       4.0        DEM       1.0
RANGES
    RNG       CAP       2.0
BOUNDS
 UP BND       X         3.0
 FR BND       Y
ENDATA
";

    #[test]
    fn parses_sections() {
        let m = parse_mps(CORE).unwrap();
        assert_eq!(m.name, "TINY");
        assert_eq!(m.objective, "COST");
        assert_eq!(m.rows.len(), 2);
        assert_eq!(m.rows[0].kind, RowKind::L);
        assert_eq!(m.rows[0].rhs, 4.0);
        assert_eq!(m.rows[0].range, Some(2.0));
        assert_eq!(m.entries, vec![(0, 0, 1.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert_eq!(m.columns[0].upper, 3.0);
        assert_eq!(m.columns[1].lower, f64::NEG_INFINITY);
        assert_eq!(m.columns[1].cost, 3.0);
    }

    #[test]
    fn dangling_row_reference() {
        let text = CORE.replace("Y         COST      3.0        DEM", "Y         COST      3.0        NOPE");
        let err = parse_mps(&text).unwrap_err();
        assert_eq!(err[0].line, 9);
        assert!(err[0].message.contains("NOPE"));
    }

    #[test]
    fn unknown_section_and_markers() {
        let err = parse_mps(&CORE.replace("RANGES", "QSECTION")).unwrap_err();
        assert!(err[0].message.contains("unknown section"));
        let text = CORE.replace("    Y         COST", "    M  'MARKER'  'INTORG'\n    Y         COST");
        assert!(parse_mps(&text).unwrap_err()[0].message.contains("integer"));
    }

    #[test]
    fn missing_endata() {
        let err = parse_mps(&CORE.replace("ENDATA\n", "")).unwrap_err();
        assert!(err.iter().any(|d| d.message.contains("ENDATA")));
    }
}
