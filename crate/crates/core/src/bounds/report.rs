//! The validation report: fitted constants, tagged residuals, pass flags.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// One numeric check. `value` is compared with `tolerance` in the direction
/// given by `bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub bound: Bound,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    AtMost,
    AtLeast,
}

impl CheckOutcome {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            bound: Bound::AtMost,
            passed: value.is_finite() && value <= tolerance,
            note: None,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            bound: Bound::AtLeast,
            passed: value.is_finite() && value >= tolerance,
            note: None,
        }
    }

    /// A check that could not be evaluated.
    pub fn failed(name: impl Into<String>, tolerance: f64, reason: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value: f64::NAN,
            tolerance,
            bound: Bound::AtMost,
            passed: false,
            note: Some(reason.into()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Constants of the inequalities, fitted as least max-ratios.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FittedConstants {
    /// C and c of |∂_t^k p| ≤ C t^{−k} e^{ct} G.
    pub upper_c: Option<f64>,
    pub upper_rate: Option<f64>,
    pub c_h: Option<f64>,
    pub c_phi: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c_a: Option<f64>,
    /// Remaining constants by name.
    #[serde(default)]
    pub extra: BTreeMap<String, f64>,
}

impl FittedConstants {
    pub fn all(&self) -> Vec<(String, f64)> {
        let named = [
            ("upper_c", self.upper_c),
            ("upper_rate", self.upper_rate),
            ("c_h", self.c_h),
            ("c_phi", self.c_phi),
            ("c1", self.c1),
            ("c2", self.c2),
            ("c_a", self.c_a),
        ];
        let mut out: Vec<(String, f64)> = named
            .into_iter()
            .filter_map(|(n, v)| v.map(|v| (n.to_string(), v)))
            .collect();
        out.extend(self.extra.iter().map(|(k, v)| (k.clone(), *v)));
        out
    }

    pub fn non_finite(&self) -> Vec<String> {
        self.all().into_iter().filter(|(_, v)| !v.is_finite()).map(|(n, _)| n).collect()
    }
}

/// Grid, mesh and tolerance settings the report was produced with.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub dim: usize,
    pub points_per_dim: usize,
    pub half_width: f64,
    pub mesh_nodes: usize,
    pub horizon: f64,
    pub grading: f64,
    pub theta: f64,
    pub alpha: f64,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    /// Every numerical tolerance in force, by name.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
    pub constants: FittedConstants,
    pub metadata: RunMetadata,
}

impl ValidationReport {
    pub fn new(metadata: RunMetadata) -> Self {
        Self {
            passed: false,
            checks: Vec::new(),
            constants: FittedConstants::default(),
            metadata,
        }
    }

    pub fn push(&mut self, check: CheckOutcome) {
        self.checks.push(check);
    }

    /// Sets the overall flag: every check passed and every constant is finite.
    pub fn finalize(&mut self) -> bool {
        let bad = self.constants.non_finite();
        if !bad.is_empty() {
            self.checks.push(CheckOutcome::failed(
                "constants_finite",
                0.0,
                format!("non-finite: {}", bad.join(", ")),
            ));
        }
        self.passed = !self.checks.is_empty() && self.checks.iter().all(|c| c.passed);
        self.passed
    }

    pub fn failing(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}
