//! Named verification results.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
    Skipped,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Inconclusive => "inconclusive",
            Status::Skipped => "skipped",
        }
    }
}

/// How `value` is compared with `oracle`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|value - oracle| <= tolerance`.
    Equal,
    /// `value <= oracle + tolerance`.
    AtMost,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    /// The formula or statement being checked, or `plumbing`.
    pub anchor: String,
    pub value: f64,
    pub oracle: f64,
    pub tolerance: f64,
    pub standard_error: Option<f64>,
    pub comparison: Comparison,
    pub status: Status,
    /// Supporting numbers, keyed by name.
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn equality(name: impl Into<String>, anchor: impl Into<String>, value: f64, oracle: f64, tolerance: f64) -> Self {
        let status = if (value - oracle).abs() <= tolerance {
            Status::Pass
        } else {
            Status::Fail
        };
        Self::build(name, anchor, value, oracle, tolerance, None, Comparison::Equal, status)
    }

    pub fn at_most(name: impl Into<String>, anchor: impl Into<String>, value: f64, bound: f64, tolerance: f64) -> Self {
        let status = if value <= bound + tolerance {
            Status::Pass
        } else {
            Status::Fail
        };
        Self::build(name, anchor, value, bound, tolerance, None, Comparison::AtMost, status)
    }

    /// Passes when `|value - oracle| <= k * standard_error`; the tolerance
    /// field records `k * standard_error`.
    pub fn monte_carlo(
        name: impl Into<String>,
        anchor: impl Into<String>,
        value: f64,
        oracle: f64,
        standard_error: f64,
        k: f64,
    ) -> Self {
        let tolerance = k * standard_error;
        let status = if (value - oracle).abs() <= tolerance {
            Status::Pass
        } else {
            Status::Fail
        };
        Self::build(
            name,
            anchor,
            value,
            oracle,
            tolerance,
            Some(standard_error),
            Comparison::Equal,
            status,
        )
    }

    pub fn skipped(name: impl Into<String>, anchor: impl Into<String>, reason: impl Into<String>) -> Self {
        let mut report = Self::build(name, anchor, 0.0, 0.0, 0.0, None, Comparison::Equal, Status::Skipped);
        report.notes.push(reason.into());
        report
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        name: impl Into<String>,
        anchor: impl Into<String>,
        value: f64,
        oracle: f64,
        tolerance: f64,
        standard_error: Option<f64>,
        comparison: Comparison,
        status: Status,
    ) -> Self {
        let anchor = anchor.into();
        Self {
            name: name.into(),
            anchor: if anchor.is_empty() { "plumbing".into() } else { anchor },
            value,
            oracle,
            tolerance,
            standard_error,
            comparison,
            status,
            metrics: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    /// Downgrades a pass or fail to inconclusive, keeping the reason.
    pub fn inconclusive(mut self, reason: impl Into<String>) -> Self {
        if matches!(self.status, Status::Pass | Status::Fail) {
            self.status = Status::Inconclusive;
        }
        self.notes.push(reason.into());
        self
    }

    /// Forces a failure regardless of the numeric comparison.
    pub fn fail(mut self, reason: impl Into<String>) -> Self {
        self.status = Status::Fail;
        self.notes.push(reason.into());
        self
    }

    pub fn with_metric(mut self, key: impl Into<String>, value: f64) -> Self {
        self.metrics.insert(key.into(), value);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Process exit code implied by a set of reports.
pub fn exit_code(reports: &[CheckReport], strict: bool) -> i32 {
    let failing = reports.iter().any(|r| {
        r.status == Status::Fail || (strict && r.status == Status::Inconclusive)
    });
    i32::from(failing)
}

/// `name,status,value,oracle,tolerance,standard_error` rows with a header.
pub fn summary_csv(reports: &[CheckReport]) -> String {
    let mut out = String::from("name,status,comparison,value,oracle,tolerance,standard_error\n");
    for r in reports {
        let se = r.standard_error.map(|v| format!("{v:e}")).unwrap_or_default();
        let comparison = match r.comparison {
            Comparison::Equal => "equal",
            Comparison::AtMost => "at_most",
        };
        out.push_str(&format!(
            "{},{},{},{:e},{:e},{:e},{}\n",
            r.name,
            r.status.as_str(),
            comparison,
            r.value,
            r.oracle,
            r.tolerance,
            se
        ));
    }
    out
}
