//! Result records written as JSON, one object per line.

use serde::{Deserialize, Serialize};

use crate::invbranch::DecayReport;
use crate::localmodel::Verdict;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenRecord {
    pub map: String,
    /// `re0, im0, re1, im1, re2, im2`.
    pub point: [f64; 6],
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudRecord {
    pub map: String,
    pub depth: usize,
    pub count: usize,
    pub seed: u64,
    pub dropped: usize,
    pub csv: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovRecord {
    pub map: String,
    pub lambda1: f64,
    pub lambda2: f64,
    pub se1: f64,
    pub se2: f64,
    pub sum_via_det: f64,
    pub n: usize,
    #[serde(rename = "N")]
    pub count: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub map: String,
    pub orbits: usize,
    pub n: usize,
    pub seed: u64,
    pub decay: DecayReport,
    /// Fraction of orbits satisfying the contraction floor.
    pub floor_fraction: f64,
    pub resampled: usize,
}

/// A quadrature pairing with its error estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingRecord {
    pub name: String,
    pub value: f64,
    pub error_estimate: f64,
    pub parameters: serde_json::Value,
}

/// Two-sided comparison from the local model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub operation: String,
    pub test_function: String,
    pub verdict: Verdict,
}

/// One entry of a verification report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub anchor: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Green(GreenRecord),
    Cloud(CloudRecord),
    Lyapunov(LyapunovRecord),
    Orbit(OrbitRecord),
    Pairing(PairingRecord),
    Verdict(VerdictRecord),
    Check(CheckRecord),
}

impl Record {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}
