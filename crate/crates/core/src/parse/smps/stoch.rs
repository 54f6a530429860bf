//! STOCH file, `INDEP DISCRETE` section only.

use super::mps::{content_lines, is_header, number};
use crate::parse::{ParseDiagnostic, SourceFile};

/// One independent discrete distribution: consecutive lines sharing
/// `(column, row)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub column: String,
    pub row: String,
    pub period: String,
    /// `(value, probability)`.
    pub outcomes: Vec<(f64, f64)>,
    pub line: usize,
}

fn diag(diags: &mut Vec<ParseDiagnostic>, line: usize, message: impl Into<String>) {
    diags.push(ParseDiagnostic::new(SourceFile::Stoch, line, message));
}

pub fn parse_stoch(text: &str) -> Result<Vec<Distribution>, Vec<ParseDiagnostic>> {
    let mut diags = Vec::new();
    let mut out: Vec<Distribution> = Vec::new();
    let mut in_indep = false;
    let mut ended = false;
    let mut last_line = 0;

    for (line, raw) in content_lines(text) {
        last_line = line;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if is_header(raw) {
            match toks[0] {
                "STOCH" => {}
                "INDEP" => match toks.get(1) {
                    Some(&"DISCRETE") => in_indep = true,
                    Some(other) => {
                        diag(&mut diags, line, format!("distribution '{other}' is not supported"));
                        return Err(diags);
                    }
                    None => {
                        diag(&mut diags, line, "INDEP without a distribution type");
                        return Err(diags);
                    }
                },
                "ENDATA" => {
                    ended = true;
                    break;
                }
                "BLOCKS" | "SCENARIOS" => {
                    diag(&mut diags, line, format!("{} sections are not supported", toks[0]));
                    return Err(diags);
                }
                other => {
                    diag(&mut diags, line, format!("unknown section '{other}'"));
                    return Err(diags);
                }
            }
            continue;
        }
        if !in_indep {
            diag(&mut diags, line, "data line outside INDEP");
            continue;
        }
        if toks.len() != 5 {
            diag(&mut diags, line, "expected 'column row value period probability'");
            continue;
        }
        let (Some(value), Some(prob)) = (
            number(toks[2], line, SourceFile::Stoch, &mut diags),
            number(toks[4], line, SourceFile::Stoch, &mut diags),
        ) else {
            continue;
        };
        if !(prob > 0.0 && prob <= 1.0) {
            diag(&mut diags, line, format!("probability {prob} outside (0, 1]"));
            continue;
        }
        match out.last_mut() {
            Some(d) if d.column == toks[0] && d.row == toks[1] => {
                if d.period != toks[3] {
                    diag(&mut diags, line, "period changes within a distribution");
                }
                d.outcomes.push((value, prob));
            }
            _ => {
                if let Some(d) = out.iter().find(|d| d.column == toks[0] && d.row == toks[1]) {
                    diag(&mut diags, line, format!("distribution for ({}, {}) already given at line {}", toks[0], toks[1], d.line));
                    continue;
                }
                out.push(Distribution {
                    column: toks[0].to_string(),
                    row: toks[1].to_string(),
                    period: toks[3].to_string(),
                    outcomes: vec![(value, prob)],
                    line,
                });
            }
        }
    }
    if !ended {
        diag(&mut diags, last_line, "missing ENDATA");
    }
    for d in &out {
        let total: f64 = d.outcomes.iter().map(|o| o.1).sum();
        if (total - 1.0).abs() > super::PROBABILITY_SUM_TOL {
            diag(&mut diags, d.line, format!("probabilities for ({}, {}) sum to {total}", d.column, d.row));
        }
    }
    if diags.is_empty() {
        Ok(out)
    } else {
        Err(diags)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_consecutive_lines() {
        let text = "STOCH P\nINDEP DISCRETE\n RHS D 1 S2 0.5\n RHS D 2 S2 0.5\n X D 3 S2 1.0\nENDATA\n";
        let d = parse_stoch(text).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].outcomes, vec![(1.0, 0.5), (2.0, 0.5)]);
        assert_eq!(d[1].column, "X");
    }

    #[test]
    fn bad_probability_sum_reports_first_line() {
        let text = "STOCH P\nINDEP DISCRETE\n RHS D 1 S2 0.5\n RHS D 2 S2 0.4\nENDATA\n";
        let err = parse_stoch(text).unwrap_err();
        assert_eq!(err[0].line, 3);
        assert!(err[0].message.contains("sum to 0.9"));
    }

    #[test]
    fn unsupported_sections() {
        assert!(parse_stoch("STOCH P\nBLOCKS DISCRETE\nENDATA\n").unwrap_err()[0].message.contains("BLOCKS"));
        assert!(parse_stoch("STOCH P\nINDEP NORMAL\nENDATA\n").unwrap_err()[0].message.contains("NORMAL"));
    }

    #[test]
    fn split_distribution_rejected() {
        let text = "STOCH P\nINDEP DISCRETE\n RHS D 1 S2 0.5\n X D 3 S2 1.0\n RHS D 2 S2 0.5\nENDATA\n";
        let err = parse_stoch(text).unwrap_err();
        assert!(err.iter().any(|d| d.line == 5 && d.message.contains("already given")));
    }
}
