//! Check records shared by the library checks, the CLI and the acceptance suite.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
    #[serde(default)]
    pub kind: CheckKind,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    #[default]
    Abs,
    Rel,
    Below,
    Holds,
}

impl Check {
    /// `|measured − target| ≤ tolerance`.
    pub fn abs(name: impl Into<String>, measured: f64, target: f64, tolerance: f64) -> Self {
        let pass = (measured - target).abs() <= tolerance;
        Check { name: name.into(), measured, target, tolerance, pass, note: String::new(), kind: CheckKind::Abs }
    }

    /// `|measured/target − 1| ≤ tolerance`.
    pub fn rel(name: impl Into<String>, measured: f64, target: f64, tolerance: f64) -> Self {
        let pass = (measured / target - 1.0).abs() <= tolerance;
        Check { name: name.into(), measured, target, tolerance, pass, note: String::new(), kind: CheckKind::Rel }
    }

    /// `measured < bound`.
    pub fn below(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Check { name: name.into(), measured, target: bound, tolerance: 0.0, pass: measured < bound, note: String::new(), kind: CheckKind::Below }
    }

    /// Boolean property, recorded as 1/0.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Check {
            name: name.into(),
            measured: if ok { 1.0 } else { 0.0 },
            target: 1.0,
            tolerance: 0.0,
            pass: ok,
            note: String::new(),
            kind: CheckKind::Holds,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    /// One line for terminal output.
    pub fn line(&self) -> String {
        let body = match self.kind {
            CheckKind::Abs => format!("{:.6e} vs {:.6e} (abs tol {:.1e})", self.measured, self.target, self.tolerance),
            CheckKind::Rel => format!("{:.6e} vs {:.6e} (rel tol {:.1e})", self.measured, self.target, self.tolerance),
            CheckKind::Below => format!("{:.4e} < {:.4e}", self.measured, self.target),
            CheckKind::Holds => (if self.pass { "holds" } else { "violated" }).to_string(),
        };
        let note = if self.note.is_empty() { String::new() } else { format!(" [{}]", self.note) };
        format!("{} {}: {body}{note}", if self.pass { "PASS" } else { "FAIL" }, self.name)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
    }
    pub fn extend(&mut self, other: Report) {
        self.checks.extend(other.checks);
    }
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}
