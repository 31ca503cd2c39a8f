//! Validation reports: one line per check with its value, the bound or
//! target it is compared against, a standard error where one exists, and the
//! verdict. Rendered as CSV and as a plain-text summary; both renderings are
//! pure functions of the lines.

use std::fmt::Write as _;

use crate::io::format_number;

/// One check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub value: f64,
    pub target: f64,
    /// NaN for deterministic checks.
    pub se: f64,
    pub pass: bool,
    /// Short description of the comparison, e.g. `>= floor`.
    pub relation: String,
}

/// Ordered list of checks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckReport {
    pub lines: Vec<CheckLine>,
}

impl CheckReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: f64, relation: &str, target: f64, se: f64, pass: bool) {
        self.lines.push(CheckLine {
            name: name.into(),
            value,
            target,
            se,
            pass,
            relation: relation.to_string(),
        });
    }

    /// Record a check that could not be evaluated.
    pub fn push_error(&mut self, name: impl Into<String>, message: &str) {
        self.push(name, f64::NAN, message, f64::NAN, f64::NAN, false);
    }

    pub fn passed(&self) -> bool {
        self.lines.iter().all(|l| l.pass)
    }

    pub fn failures(&self) -> usize {
        self.lines.iter().filter(|l| !l.pass).count()
    }

    /// CSV with columns `check, value, relation, target, se, pass`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("check,value,relation,target,se,pass\n");
        for l in &self.lines {
            let _ = writeln!(
                s,
                "{},{},\"{}\",{},{},{}",
                l.name,
                format_number(l.value),
                l.relation.replace('"', "'"),
                format_number(l.target),
                format_number(l.se),
                if l.pass { "PASS" } else { "FAIL" }
            );
        }
        s
    }

    /// Aligned human-readable table followed by a verdict line.
    pub fn summary(&self) -> String {
        let width = self.lines.iter().map(|l| l.name.len()).max().unwrap_or(0);
        let mut s = String::new();
        for l in &self.lines {
            let se = if l.se.is_nan() {
                String::new()
            } else {
                format!(" (se {:.3e})", l.se)
            };
            let _ = writeln!(
                s,
                "{} {:<width$}  {:.6e} {} {:.6e}{se}",
                if l.pass { "PASS" } else { "FAIL" },
                l.name,
                l.value,
                l.relation,
                l.target,
            );
        }
        let _ = writeln!(
            s,
            "{} of {} checks passed",
            self.lines.len() - self.failures(),
            self.lines.len()
        );
        s
    }
}
