//! Native JSON problem format, version 1.
//!
//! ```json
//! {
//!   "version": 1,
//!   "name": "p1",
//!   "first_stage": { "c": [1.0], "A": [], "b": [] },
//!   "recourse": { "W": [[1.0, -1.0]] },
//!   "scenarios": [
//!     { "pi": 0.5, "q": [1.0, 0.0], "T": [[1.0]], "h": [2.0] },
//!     { "pi": 0.5, "q": [1.0, 0.0], "T": [[1.0]], "h": [4.0] }
//!   ]
//! }
//! ```
//!
//! A template replaces `scenarios` with `nominal` (`q`, `T`, `h`) and
//! `random`, a list of `{"target": "h" | "q" | "T", "row", "col",
//! "outcomes": [[value, probability], ...]}`. `h` entries use `row`, `q`
//! entries use `col`, `T` entries use both. Indices are zero-based.
//! `recourse.m` gives the column count of `W` and may be omitted unless `W`
//! has no rows.

use serde::{Deserialize, Serialize};

use super::{ParseDiagnostic, SourceFile};
use crate::problem::{
    normalize_probabilities, validate_problem, FirstStage, Matrix, Outcome, RandomEntry, RandomTarget, Scenario, ScenarioData,
    StochasticTemplate, TwoStageProblem,
};

pub const NATIVE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum NativeDocument {
    Problem(TwoStageProblem),
    Template(StochasticTemplate),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFirstStage {
    c: Vec<f64>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecourse {
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
    /// Column count; needed only when `W` has no rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    pi: f64,
    q: Vec<f64>,
    #[serde(rename = "T")]
    t: Vec<Vec<f64>>,
    h: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNominal {
    q: Vec<f64>,
    #[serde(rename = "T")]
    t: Vec<Vec<f64>>,
    h: Vec<f64>,
}

#[derive(Serialize, Deserialize, Clone, Copy, PartialEq, Eq)]
enum RawTarget {
    #[serde(rename = "h")]
    H,
    #[serde(rename = "q")]
    Q,
    #[serde(rename = "T")]
    T,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRandom {
    target: RawTarget,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    row: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    col: Option<usize>,
    outcomes: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    version: u32,
    #[serde(default)]
    name: String,
    first_stage: RawFirstStage,
    recourse: RawRecourse,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scenarios: Option<Vec<RawScenario>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nominal: Option<RawNominal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    random: Option<Vec<RawRandom>>,
}

fn diag(line: usize, message: impl Into<String>) -> ParseDiagnostic {
    ParseDiagnostic::new(SourceFile::Native, line, message)
}

fn matrix(path: &str, rows: &[Vec<f64>], cols: usize) -> Result<Matrix, ParseDiagnostic> {
    Matrix::from_rows(rows, cols).map_err(|e| diag(1, format!("{path}: {e}")))
}

/// Line of the first occurrence of `"key"`, for semantic diagnostics.
fn line_of(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map_or(1, |i| i + 1)
}

pub fn parse_native(text: &str) -> Result<NativeDocument, Vec<ParseDiagnostic>> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawDocument = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        vec![diag(inner.line(), format!("at {path}: {inner}"))]
    })?;
    if raw.version != NATIVE_VERSION {
        return Err(vec![diag(line_of(text, "version"), format!("$.version: unsupported version {}", raw.version))]);
    }
    let n = raw.first_stage.c.len();
    let first = FirstStage {
        a: matrix("$.first_stage.A", &raw.first_stage.a, n).map_err(|d| vec![d])?,
        c: raw.first_stage.c,
        b: raw.first_stage.b,
    };
    let m = match (raw.recourse.m, raw.recourse.w.first()) {
        (Some(m), _) => m,
        (None, Some(row)) => row.len(),
        (None, None) => return Err(vec![diag(line_of(text, "W"), "$.recourse.m: required when W has no rows")]),
    };
    let recourse = matrix("$.recourse.W", &raw.recourse.w, m).map_err(|d| vec![d])?;
    match (raw.scenarios, raw.nominal, raw.random) {
        (Some(_), _, Some(_)) | (Some(_), Some(_), _) => {
            Err(vec![diag(line_of(text, "scenarios"), "$: \"scenarios\" and \"nominal\"/\"random\" are mutually exclusive")])
        }
        (Some(raw_scenarios), None, None) => {
            let line = line_of(text, "scenarios");
            if raw_scenarios.is_empty() {
                return Err(vec![diag(line, "$.scenarios: N >= 1 required")]);
            }
            let scenarios = raw_scenarios
                .into_iter()
                .enumerate()
                .map(|(s, r)| {
                    Ok(Scenario { probability: r.pi, t: matrix(&format!("$.scenarios[{s}].T"), &r.t, n)?, q: r.q, h: r.h })
                })
                .collect::<Result<Vec<_>, ParseDiagnostic>>()
                .map_err(|d| vec![d])?;
            let mut p = TwoStageProblem { name: raw.name, first, recourse, scenarios };
            normalize_probabilities(&mut p);
            let violations = validate_problem(&p);
            if violations.is_empty() {
                Ok(NativeDocument::Problem(p))
            } else {
                Err(violations.into_iter().map(|v| diag(line, format!("$: {v}"))).collect())
            }
        }
        (None, Some(nominal), random) => {
            let line = line_of(text, "nominal");
            let nominal = ScenarioData { t: matrix("$.nominal.T", &nominal.t, n).map_err(|d| vec![d])?, q: nominal.q, h: nominal.h };
            let mut entries = Vec::new();
            let mut errors = Vec::new();
            for (k, r) in random.unwrap_or_default().into_iter().enumerate() {
                let target = match (r.target, r.row, r.col) {
                    (RawTarget::H, Some(row), None) => RandomTarget::Rhs { row },
                    (RawTarget::Q, None, Some(col)) => RandomTarget::Cost { col },
                    (RawTarget::T, Some(row), Some(col)) => RandomTarget::Technology { row, col },
                    _ => {
                        errors.push(diag(line_of(text, "random"), format!("$.random[{k}]: h needs row, q needs col, T needs row and col")));
                        continue;
                    }
                };
                let outcomes = r.outcomes.into_iter().map(|(value, probability)| Outcome { value, probability }).collect();
                entries.push(RandomEntry { target, outcomes });
            }
            if !errors.is_empty() {
                return Err(errors);
            }
            let t = StochasticTemplate { name: raw.name, first, recourse, nominal, random: entries };
            let violations = t.validate();
            if violations.is_empty() {
                Ok(NativeDocument::Template(t))
            } else {
                Err(violations.into_iter().map(|v| diag(line, format!("$: {v}"))).collect())
            }
        }
        (None, None, Some(_)) => Err(vec![diag(line_of(text, "random"), "$: \"random\" requires \"nominal\"")]),
        (None, None, None) => Err(vec![diag(1, "$: expected \"scenarios\" or \"nominal\"")]),
    }
}

fn raw_head(name: &str, first: &FirstStage, recourse: &Matrix) -> RawDocument {
    RawDocument {
        version: NATIVE_VERSION,
        name: name.to_string(),
        first_stage: RawFirstStage { c: first.c.clone(), a: first.a.to_rows(), b: first.b.clone() },
        recourse: RawRecourse { w: recourse.to_rows(), m: Some(recourse.cols()) },
        scenarios: None,
        nominal: None,
        random: None,
    }
}

pub fn write_native(doc: &NativeDocument) -> String {
    let raw = match doc {
        NativeDocument::Problem(p) => RawDocument {
            scenarios: Some(
                p.scenarios
                    .iter()
                    .map(|s| RawScenario { pi: s.probability, q: s.q.clone(), t: s.t.to_rows(), h: s.h.clone() })
                    .collect(),
            ),
            ..raw_head(&p.name, &p.first, &p.recourse)
        },
        NativeDocument::Template(t) => RawDocument {
            nominal: Some(RawNominal { q: t.nominal.q.clone(), t: t.nominal.t.to_rows(), h: t.nominal.h.clone() }),
            random: Some(
                t.random
                    .iter()
                    .map(|e| {
                        let (target, row, col) = match e.target {
                            RandomTarget::Rhs { row } => (RawTarget::H, Some(row), None),
                            RandomTarget::Cost { col } => (RawTarget::Q, None, Some(col)),
                            RandomTarget::Technology { row, col } => (RawTarget::T, Some(row), Some(col)),
                        };
                        RawRandom { target, row, col, outcomes: e.outcomes.iter().map(|o| (o.value, o.probability)).collect() }
                    })
                    .collect(),
            ),
            ..raw_head(&t.name, &t.first, &t.recourse)
        },
    };
    serde_json::to_string_pretty(&raw).expect("finite problem data serializes")
}

pub fn write_problem(p: &TwoStageProblem) -> String {
    write_native(&NativeDocument::Problem(p.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{p1, random_problem, GeneratorConfig};
    use crate::problem::fixtures::p1_template;
    use proptest::prelude::*;

    const P1: &str = r#"{
  "version": 1,
  "name": "p1",
  "first_stage": { "c": [1.0], "A": [], "b": [] },
  "recourse": { "W": [[1.0, -1.0]], "m": 2 },
  "scenarios": [
    { "pi": 0.5, "q": [1.0, 0.0], "T": [[1.0]], "h": [2.0] },
    { "pi": 0.5, "q": [1.0, 0.0], "T": [[1.0]], "h": [4.0] }
  ]
}"#;

    #[test]
    fn p1_document() {
        match parse_native(P1).unwrap() {
            NativeDocument::Problem(p) => {
                assert!(validate_problem(&p).is_empty());
                assert_eq!(p, p1());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scenarios_and_random_exclusive() {
        let text = P1.replace(r#""scenarios": ["#, r#""random": [], "scenarios": ["#);
        let err = parse_native(&text).unwrap_err();
        assert!(err[0].message.contains("mutually exclusive"), "{err:?}");
    }

    #[test]
    fn empty_scenarios_rejected() {
        let text = r#"{"version":1,"first_stage":{"c":[1],"A":[],"b":[]},"recourse":{"W":[[1]],"m":1},"scenarios":[]}"#;
        let err = parse_native(text).unwrap_err();
        assert!(err[0].message.contains("N >= 1 required"));
    }

    #[test]
    fn schema_errors_carry_json_path() {
        let text = P1.replace(r#""pi": 0.5, "q": [1.0, 0.0], "T": [[1.0]], "h": [4.0]"#, r#""pi": "half", "q": [1.0, 0.0], "T": [[1.0]], "h": [4.0]"#);
        let err = parse_native(&text).unwrap_err();
        assert!(err[0].message.contains("scenarios[1].pi"), "{}", err[0].message);
        assert_eq!(err[0].line, 8);
        let err = parse_native(&P1.replace("\"m\": 2", "\"m\": 2, \"extra\": 0")).unwrap_err();
        assert!(err[0].message.contains("recourse"), "{}", err[0].message);
    }

    #[test]
    fn semantic_violations_reported() {
        let err = parse_native(&P1.replace(r#""pi": 0.5, "q": [1.0, 0.0], "T": [[1.0]], "h": [2.0]"#, r#""pi": 0.4, "q": [1.0, 0.0], "T": [[1.0]], "h": [2.0]"#)).unwrap_err();
        assert!(err.iter().any(|d| d.message.contains("probabilities sum to 0.9")), "{err:?}");
        let err = parse_native(&P1.replace("\"version\": 1", "\"version\": 2")).unwrap_err();
        assert!(err[0].message.contains("version"));
    }

    #[test]
    fn template_round_trip() {
        let t = p1_template();
        let text = write_native(&NativeDocument::Template(t.clone()));
        assert_eq!(parse_native(&text).unwrap(), NativeDocument::Template(t));
        assert!(text.contains("\"random\""));
    }

    #[test]
    fn template_target_fields_checked() {
        let text = r#"{"version":1,"first_stage":{"c":[1],"A":[],"b":[]},"recourse":{"W":[[1]],"m":1},
            "nominal":{"q":[1],"T":[[1]],"h":[2]},"random":[{"target":"h","col":0,"outcomes":[[1,1]]}]}"#;
        assert!(parse_native(text).is_err());
    }

    proptest! {
        #[test]
        fn problem_round_trip(seed in 0u64..500, n in 1usize..4, rows in 1usize..3, scenarios in 1usize..6) {
            let p = random_problem(&GeneratorConfig::new(n, rows, scenarios), seed);
            let back = parse_native(&write_problem(&p)).unwrap();
            prop_assert_eq!(back, NativeDocument::Problem(p));
        }

        #[test]
        fn never_panics_on_bytes(bytes in prop::collection::vec(any::<u8>(), 0..300)) {
            let text = String::from_utf8_lossy(&bytes);
            let _ = parse_native(&text);
        }

        #[test]
        fn never_panics_on_mutated_documents(cut in 0usize..400, insert in "[\\[\\]{},:0-9a-z\"-]{0,4}") {
            let mut text = P1.to_string();
            let at = cut.min(text.len());
            if text.is_char_boundary(at) {
                text.insert_str(at, &insert);
                let _ = parse_native(&text);
            }
        }
    }
}
