//! The JSON report format: deterministic for a fixed spec, seed, and tool
//! version, with residuals rendered as decimal strings carrying 17
//! significant digits.

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use ksym_core::structures::{CheckRecord, CheckStatus, Witness};

#[derive(Debug, Serialize)]
pub struct ReportFile {
    pub spec_digest: String,
    pub tool_version: String,
    pub seed: u64,
    pub checks: Vec<ReportCheck>,
    pub artifacts: Map<String, Value>,
}

#[derive(Debug, Serialize)]
pub struct ReportCheck {
    pub id: String,
    pub description: String,
    pub status: &'static str,
    pub max_residual: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<ReportWitness>,
}

#[derive(Debug, Serialize)]
pub struct ReportWitness {
    pub point: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub detail: String,
}

/// 17 significant digits, scientific notation.
pub fn residual_string(value: f64) -> String {
    format!("{value:.16e}")
}

pub fn status_str(status: CheckStatus) -> &'static str {
    match status {
        CheckStatus::Pass => "pass",
        CheckStatus::Fail => "fail",
        CheckStatus::Skipped => "skipped",
    }
}

impl ReportCheck {
    pub fn from_record(record: &CheckRecord) -> ReportCheck {
        ReportCheck {
            id: record.id.clone(),
            description: record.description.clone(),
            status: status_str(record.status),
            max_residual: residual_string(record.max_residual),
            witness: record.witness.as_ref().map(|w: &Witness| ReportWitness {
                point: w.point.clone(),
                vectors: w.vectors.clone(),
                detail: w.detail.clone(),
            }),
        }
    }
}

impl ReportFile {
    pub fn new(spec_bytes: &[u8], seed: u64) -> ReportFile {
        let mut hasher = Sha256::new();
        hasher.update(spec_bytes);
        ReportFile {
            spec_digest: hex_string(&hasher.finalize()),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            checks: Vec::new(),
            artifacts: Map::new(),
        }
    }

    pub fn push_records(&mut self, records: &[CheckRecord]) {
        self.checks
            .extend(records.iter().map(ReportCheck::from_record));
    }

    pub fn any_failed(&self) -> bool {
        self.checks.iter().any(|c| c.status == "fail")
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
