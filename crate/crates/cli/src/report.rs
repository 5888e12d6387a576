//! Versioned JSON report.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use switchctrl_core::criteria::FEEDBACK_RESIDUAL_TOL;
use switchctrl_core::subspace::containment_tol;
use switchctrl_core::{serialize_spec, CriteriaReport, SwitchSystem};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub rank_tol: f64,
    pub containment_tol: f64,
    pub feedback_residual_tol: f64,
}

impl Tolerances {
    pub fn new(rank_tol: f64) -> Self {
        Self {
            rank_tol,
            containment_tol: containment_tol(rank_tol),
            feedback_residual_tol: FEEDBACK_RESIDUAL_TOL,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub command: &'static str,
    /// SHA-256 of the canonical serialization of the system.
    pub system_digest: String,
    pub tolerances: Tolerances,
    pub seed: u64,
    /// Every other knob the command used.
    pub parameters: BTreeMap<&'static str, Value>,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub criteria: Option<CriteriaReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub riccati: Option<Value>,
}

impl Report {
    pub fn new(command: &'static str, system: &SwitchSystem, rank_tol: f64, seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION"),
            command,
            system_digest: digest(system),
            tolerances: Tolerances::new(rank_tol),
            seed,
            parameters: BTreeMap::new(),
            criteria: None,
            mc: None,
            riccati: None,
        }
    }

    pub fn param(&mut self, key: &'static str, value: impl Serialize) {
        self.parameters
            .insert(key, serde_json::to_value(value).expect("parameters serialize"));
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn digest(system: &SwitchSystem) -> String {
    let hash = Sha256::digest(serialize_spec(system).as_bytes());
    hash.iter().map(|b| format!("{b:02x}")).collect()
}
