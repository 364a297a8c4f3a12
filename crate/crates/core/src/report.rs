//! Itemized pass/fail reports produced by the verification routines.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// Default tolerance for identities checked on exact matrix backends.
pub const DEFAULT_CHECK_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    /// Preconditions not met; nothing was asserted.
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub outcome: Outcome,
    pub detail: String,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Pass
    }

    pub fn failed(&self) -> bool {
        self.outcome == Outcome::Fail
    }

    pub fn skipped(&self) -> bool {
        self.outcome == Outcome::Skipped
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub title: String,
    pub checks: Vec<Check>,
    /// Observations that are not failures (e.g. non-unique minimizers).
    pub flags: Vec<String>,
}

impl Report {
    pub fn new(title: &str) -> Self {
        Report { title: title.to_string(), ..Default::default() }
    }

    pub fn record(&mut self, name: &str, ok: bool, detail: impl Into<String>) -> bool {
        let outcome = if ok { Outcome::Pass } else { Outcome::Fail };
        self.checks.push(Check { name: name.to_string(), outcome, detail: detail.into() });
        ok
    }

    pub fn skip(&mut self, name: &str, reason: impl Into<String>) {
        self.checks.push(Check { name: name.to_string(), outcome: Outcome::Skipped, detail: reason.into() });
    }

    pub fn flag(&mut self, flag: &str) {
        if !self.flags.iter().any(|f| f == flag) {
            self.flags.push(flag.to_string());
        }
    }

    /// Appends another report's checks under a name prefix.
    pub fn absorb(&mut self, other: Report) {
        let prefix = other.title;
        for mut c in other.checks {
            if !prefix.is_empty() {
                c.name = alloc::format!("{prefix}/{}", c.name);
            }
            self.checks.push(c);
        }
        for f in other.flags {
            self.flag(&f);
        }
    }

    /// True iff no check failed.
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| !c.failed())
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.failed())
    }

    pub fn count(&self, outcome: Outcome) -> usize {
        self.checks.iter().filter(|c| c.outcome == outcome).count()
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }
}

/// `|a − b| <= tol·max(1, |a|, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}
