//! Versioned JSON run report shared by the command-line tools.

use serde::{Deserialize, Serialize};

use crate::counterexamples::{Certificate, CutoffVerdict};

/// Bumped on any incompatible change of the report layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularVerdict {
    pub distinct: bool,
    pub first_divergent_iteration: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PairResult {
    pub label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub files: Vec<String>,
    pub wl: Vec<CutoffVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angular: Option<AngularVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub congruent: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub congruence_summary: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certified: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

impl PairResult {
    pub fn from_certificate(label: impl Into<String>, cert: &Certificate) -> Self {
        PairResult {
            label: label.into(),
            files: Vec::new(),
            wl: cert.wl.clone(),
            angular: Some(AngularVerdict {
                distinct: cert.angular_distinct,
                first_divergent_iteration: cert.angular_first_divergent_iteration,
            }),
            congruent: cert.congruent,
            congruence_summary: cert.congruence_summary.clone(),
            certified: Some(cert.passed),
            failures: cert.failures.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

/// Top-level report. `config` holds the fully resolved run configuration
/// (flags merged over the config file), enough to repeat the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub hash: String,
    pub command: Vec<String>,
    pub config: serde_json::Value,
    pub results: Vec<PairResult>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub payload: serde_json::Value,
    pub timing: Timing,
}

impl RunReport {
    pub fn new(command: Vec<String>, config: serde_json::Value) -> Self {
        RunReport {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            hash: crate::graph::HASH_ID.to_string(),
            command,
            config,
            results: Vec::new(),
            payload: serde_json::Value::Null,
            timing: Timing { wall_seconds: 0.0 },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let mut r = RunReport::new(vec!["degen".into(), "floor".into()], serde_json::json!({"energies": "e.txt"}));
        r.results.push(PairResult {
            label: "x".into(),
            ..Default::default()
        });
        let back: RunReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.schema_version, SCHEMA_VERSION);
    }
}
