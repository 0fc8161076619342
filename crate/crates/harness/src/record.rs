use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use shiftinvert::{EigenResult64, ShiftSearchResult, SolverReport};

use crate::bench::BenchTable;
use crate::error::Result;
use crate::spec::RunSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Payload {
    Eigen(EigenResult64),
    Shift(ShiftSearchResult),
    Bench(BenchTable),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    pub row_accesses: u64,
    pub work: u64,
    pub inner_steps: u64,
    pub full_gradients: u64,
    pub epochs: u64,
    pub samples_used: u64,
}

impl Counters {
    pub fn from_solver(r: &SolverReport) -> Self {
        Counters {
            row_accesses: r.row_accesses,
            work: r.work,
            inner_steps: r.inner_steps_total,
            full_gradients: r.full_gradient_count,
            epochs: r.epochs_run,
            samples_used: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub spec: RunSpec,
    pub resolved_config: Value,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
    pub counters: Counters,
    pub result: Payload,
    pub checks: Vec<Check>,
}

impl RunRecord {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Compact JSON without `timings`; identical runs give identical bytes.
    pub fn canonical_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(m) = v.as_object_mut() {
            m.remove("timings");
        }
        Ok(serde_json::to_string(&v)?)
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}
