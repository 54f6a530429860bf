//! TIME file: implicit (period start markers) or explicit (per row and
//! column) period assignment. Exactly two periods are accepted.

use std::collections::HashMap;

use super::mps::{content_lines, is_header};
use crate::parse::{ParseDiagnostic, SourceFile};

#[derive(Debug, Clone, PartialEq)]
pub enum Periods {
    /// `(column, row, line)` marking where each period begins.
    Implicit(Vec<(String, String, usize)>),
    Explicit {
        rows: HashMap<String, (usize, usize)>,
        cols: HashMap<String, (usize, usize)>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Time {
    pub names: Vec<String>,
    pub periods: Periods,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Periods,
    Rows,
    Columns,
}

fn diag(diags: &mut Vec<ParseDiagnostic>, line: usize, message: impl Into<String>) {
    diags.push(ParseDiagnostic::new(SourceFile::Time, line, message));
}

pub fn parse_time(text: &str) -> Result<Time, Vec<ParseDiagnostic>> {
    let mut diags = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut implicit = Vec::new();
    let mut rows = HashMap::new();
    let mut cols = HashMap::new();
    let mut explicit = false;
    let mut section = Section::None;
    let mut ended = false;
    let mut last_line = 0;

    for (line, raw) in content_lines(text) {
        last_line = line;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if is_header(raw) {
            section = match toks[0] {
                "TIME" => Section::None,
                "PERIODS" => {
                    explicit = toks.get(1) == Some(&"EXPLICIT");
                    Section::Periods
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "ENDATA" => {
                    ended = true;
                    break;
                }
                other => {
                    diag(&mut diags, line, format!("unknown section '{other}'"));
                    return Err(diags);
                }
            };
            if matches!(section, Section::Rows | Section::Columns) && !explicit {
                explicit = true;
            }
            continue;
        }
        match section {
            Section::None => diag(&mut diags, line, "data line outside a section"),
            Section::Periods => match toks.len() {
                1 => names.push(toks[0].to_string()),
                3 => {
                    names.push(toks[2].to_string());
                    implicit.push((toks[0].to_string(), toks[1].to_string(), line));
                }
                _ => diag(&mut diags, line, "expected 'column row period' or a period name"),
            },
            Section::Rows | Section::Columns => {
                if toks.len() != 2 {
                    diag(&mut diags, line, "expected name and period");
                    continue;
                }
                let Some(k) = names.iter().position(|p| p == toks[1]) else {
                    diag(&mut diags, line, format!("unknown period '{}'", toks[1]));
                    continue;
                };
                let map = if section == Section::Rows { &mut rows } else { &mut cols };
                if map.insert(toks[0].to_string(), (k, line)).is_some() {
                    diag(&mut diags, line, format!("'{}' assigned twice", toks[0]));
                }
            }
        }
    }
    if !ended {
        diag(&mut diags, last_line, "missing ENDATA");
    }
    if names.len() != 2 {
        diag(&mut diags, last_line, format!("expected exactly two periods, found {}", names.len()));
    } else if names[0] == names[1] {
        diag(&mut diags, last_line, "period names must differ");
    }
    if explicit && !implicit.is_empty() {
        diag(&mut diags, implicit[0].2, "implicit period markers in an explicit TIME file");
    }
    if !diags.is_empty() {
        return Err(diags);
    }
    let periods = if explicit { Periods::Explicit { rows, cols } } else { Periods::Implicit(implicit) };
    Ok(Time { names, periods })
}
