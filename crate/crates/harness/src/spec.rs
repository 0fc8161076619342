use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use shiftinvert::SolverChoice;

use crate::error::{HarnessError, Result};
use crate::generator::Generator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Offline,
    Online,
    EstimateShift,
    Bench,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Input {
    /// Matrix Market for matrix modes, a replay file for online.
    Path(PathBuf),
    Generator(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub mode: Mode,
    pub input: Input,
    pub epsilon: f64,
    pub delta: f64,
    pub solver: SolverChoice,
    pub seed: u64,
    /// Online sample budget.
    #[serde(default)]
    pub samples: Option<u64>,
    /// Shift-search accuracy parameter.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Bench trials.
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub trace_csv: Option<PathBuf>,
    /// Dotted config paths, e.g. `svrg.m_scale=0.2`, plus `preset`.
    #[serde(default)]
    pub overrides: BTreeMap<String, String>,
}

impl RunSpec {
    pub fn new(mode: Mode, input: Input) -> Self {
        RunSpec {
            mode,
            input,
            epsilon: 1e-6,
            delta: 0.05,
            solver: SolverChoice::Plain,
            seed: 0,
            samples: None,
            alpha: None,
            trials: None,
            out: None,
            trace_csv: None,
            overrides: BTreeMap::new(),
        }
    }

    pub fn generator(&self) -> Result<Option<Generator>> {
        match &self.input {
            Input::Generator(s) => s.parse().map(Some),
            Input::Path(_) => Ok(None),
        }
    }

    /// Mode-specific checks, run before any computation.
    pub fn validate(&self) -> Result<()> {
        let usage = |m: String| Err(HarnessError::Usage(m));
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return usage(format!("epsilon {} must lie in (0, 1)", self.epsilon));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return usage(format!("delta {} must lie in (0, 1)", self.delta));
        }
        if let Some(a) = self.alpha {
            if !(a > 1.0) {
                return usage(format!("alpha {a} must exceed 1"));
            }
            if !matches!(self.mode, Mode::EstimateShift | Mode::Offline | Mode::Bench) {
                return usage("--alpha applies to matrix modes only".into());
            }
        }
        if self.samples.is_some() && self.mode != Mode::Online {
            return usage("--samples applies to online mode only".into());
        }
        if matches!(self.samples, Some(0)) {
            return usage("--samples must be positive".into());
        }
        if self.trials.is_some() && self.mode != Mode::Bench {
            return usage("--trials applies to bench mode only".into());
        }
        if matches!(self.trials, Some(0)) {
            return usage("--trials must be positive".into());
        }
        let generator = self.generator()?;
        match (self.mode, &self.input, &generator) {
            (Mode::Online, Input::Path(p), _) if !is_replay(p) => {
                usage(format!("online input {} is not a .bin or .csv replay file", p.display()))
            }
            (Mode::Online, Input::Generator(_), Some(g)) if !g.is_stream() => {
                usage("online mode needs a stream generator such as spike".into())
            }
            (Mode::Offline | Mode::EstimateShift | Mode::Bench, Input::Generator(_), Some(g)) if g.is_stream() => {
                usage("matrix modes need a matrix generator or a .mtx file".into())
            }
            _ => Ok(()),
        }
    }
}

fn is_replay(p: &Path) -> bool {
    p.extension().is_some_and(|e| e == "bin" || e == "csv")
}

/// Sets a dotted `path` inside the JSON form of `cfg`. The value is read as
/// JSON when it parses, otherwise as a string. Paths must already exist.
pub fn apply_override<C: Serialize + DeserializeOwned>(cfg: &C, path: &str, raw: &str) -> Result<C> {
    let mut value = serde_json::to_value(cfg)?;
    let mut slot = &mut value;
    for key in path.split('.') {
        slot = slot
            .as_object_mut()
            .and_then(|m| m.get_mut(key))
            .ok_or_else(|| HarnessError::usage(format!("unknown config key `{path}`")))?;
    }
    *slot = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    serde_json::from_value(value).map_err(|e| HarnessError::usage(format!("bad value for `{path}`: {e}")))
}

pub fn apply_overrides<C: Serialize + DeserializeOwned>(
    mut cfg: C,
    overrides: &BTreeMap<String, String>,
    skip: &[&str],
) -> Result<C> {
    for (k, v) in overrides {
        if skip.contains(&k.as_str()) {
            continue;
        }
        cfg = apply_override(&cfg, k, v)?;
    }
    Ok(cfg)
}
