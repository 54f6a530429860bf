//! Readers for the native JSON format and an SMPS subset.

pub mod native;
pub mod smps;

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFile {
    Core,
    Time,
    Stoch,
    Native,
}

impl fmt::Display for SourceFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Core => "core",
            Self::Time => "time",
            Self::Stoch => "stoch",
            Self::Native => "native",
        })
    }
}

/// A located parse problem. Lines are one-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostic {
    pub file: SourceFile,
    pub line: usize,
    pub message: String,
}

impl ParseDiagnostic {
    pub fn new(file: SourceFile, line: usize, message: impl Into<String>) -> Self {
        Self { file, line: line.max(1), message: message.into() }
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.file, self.line, self.message)
    }
}

/// Diagnostics joined one per line.
pub fn render(diags: &[ParseDiagnostic]) -> String {
    diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")
}
