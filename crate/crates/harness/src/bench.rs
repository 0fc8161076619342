//! Plain SVRG, accelerated, and baseline power iteration on one instance and
//! one seed set. The baseline gets the mean work of the plain runs.

use std::fmt;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use shiftinvert::oracle::{gram_spectrum, MAX_DENSE_DIM};
use shiftinvert::{top_eigenvector_offline, PowerConfig, SolverChoice};

use crate::baseline::baseline_power_method;
use crate::error::{HarnessError, Result};
use crate::pool::run_trials;
use crate::record::{Check, Counters, Payload, RunRecord};
use crate::run::{load_matrix, offline_config};
use crate::spec::RunSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: String,
    pub trials: usize,
    pub failures: usize,
    pub mean_work: f64,
    pub mean_row_accesses: f64,
    /// `(λ₁ − quot(x))/λ₁` against the dense oracle, or against the best
    /// Rayleigh quotient seen when the instance is too large for it.
    /// `None` when every run failed.
    pub median_relative_error: Option<f64>,
    pub max_relative_error: Option<f64>,
    pub successes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTable {
    pub lambda1: f64,
    pub lambda1_from_oracle: bool,
    pub epsilon: f64,
    pub baseline_iterations: usize,
    pub rows: Vec<BenchRow>,
}

impl fmt::Display for BenchTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<12} {:>6} {:>8} {:>14} {:>14} {:>12} {:>12}",
            "method", "trials", "success", "mean work", "row accesses", "median err", "max err"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<12} {:>6} {:>8} {:>14.0} {:>14.0} {:>12.3e} {:>12.3e}",
                r.method,
                r.trials,
                r.successes,
                r.mean_work,
                r.mean_row_accesses,
                r.median_relative_error.unwrap_or(f64::NAN),
                r.max_relative_error.unwrap_or(f64::NAN)
            )?;
        }
        Ok(())
    }
}

struct Trial {
    rayleigh: Option<f64>,
    work: u64,
    row_accesses: u64,
    seconds: f64,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

fn summarize(method: &str, trials: &[Trial], lambda1: f64, epsilon: f64) -> BenchRow {
    let n = trials.len().max(1) as f64;
    let errs: Vec<f64> = trials
        .iter()
        .filter_map(|t| t.rayleigh)
        .map(|r| ((lambda1 - r) / lambda1).max(0.0))
        .collect();
    BenchRow {
        method: method.to_string(),
        trials: trials.len(),
        failures: trials.iter().filter(|t| t.rayleigh.is_none()).count(),
        mean_work: trials.iter().map(|t| t.work as f64).sum::<f64>() / n,
        mean_row_accesses: trials.iter().map(|t| t.row_accesses as f64).sum::<f64>() / n,
        successes: errs.iter().filter(|&&e| e <= epsilon).count(),
        max_relative_error: errs.iter().copied().reduce(f64::max),
        median_relative_error: median(errs),
    }
}

pub fn run_bench(spec: &RunSpec) -> Result<RunRecord> {
    let start = Instant::now();
    let a = load_matrix(spec)?;
    let base = offline_config(spec)?;
    let trials = spec.trials.unwrap_or(10);
    let offline = |solver: SolverChoice| -> Vec<Trial> {
        run_trials(trials, |t| {
            let cfg = PowerConfig {
                solver,
                seed: spec.seed.wrapping_add(t as u64),
                ..base.clone()
            };
            let clock = Instant::now();
            match top_eigenvector_offline(&a, &cfg) {
                Ok(r) => Trial {
                    rayleigh: Some(r.rayleigh),
                    work: r.report.solver.work,
                    row_accesses: r.report.solver.row_accesses,
                    seconds: clock.elapsed().as_secs_f64(),
                },
                Err(_) => Trial {
                    rayleigh: None,
                    work: 0,
                    row_accesses: 0,
                    seconds: clock.elapsed().as_secs_f64(),
                },
            }
        })
    };
    let plain = offline(SolverChoice::Plain);
    let accelerated = offline(SolverChoice::Accelerated);
    let ok_plain: Vec<&Trial> = plain.iter().filter(|t| t.rayleigh.is_some()).collect();
    if ok_plain.is_empty() {
        return Err(HarnessError::Core(shiftinvert::Error::NotConverged(
            "no plain run converged, so the baseline has no work budget".into(),
        )));
    }
    let mean_work = ok_plain.iter().map(|t| t.work as f64).sum::<f64>() / ok_plain.len() as f64;
    let per_step = (2 * a.nnz() + a.d()) as f64;
    let baseline_iterations = ((mean_work / per_step).round() as usize).max(1);
    let baseline: Vec<Trial> = run_trials(trials, |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(t as u64));
        let clock = Instant::now();
        let r = baseline_power_method(&a, baseline_iterations, &mut rng);
        Trial {
            work: r.as_ref().map_or(0, |r| r.report.solver.work),
            row_accesses: r.as_ref().map_or(0, |r| r.report.solver.row_accesses),
            rayleigh: r.ok().map(|r| r.rayleigh),
            seconds: clock.elapsed().as_secs_f64(),
        }
    });

    let (lambda1, from_oracle) = if a.d() <= MAX_DENSE_DIM {
        (gram_spectrum(&a)?.lambda1(), true)
    } else {
        let best = plain
            .iter()
            .chain(&accelerated)
            .chain(&baseline)
            .filter_map(|t| t.rayleigh)
            .fold(f64::MIN, f64::max);
        (best, false)
    };
    let table = BenchTable {
        lambda1,
        lambda1_from_oracle: from_oracle,
        epsilon: spec.epsilon,
        baseline_iterations,
        rows: vec![
            summarize("plain", &plain, lambda1, spec.epsilon),
            summarize("accelerated", &accelerated, lambda1, spec.epsilon),
            summarize("power", &baseline, lambda1, spec.epsilon),
        ],
    };
    let checks = vec![Check::new(
        "all_runs_finished",
        table.rows.iter().all(|r| r.failures == 0),
        format!(
            "failures: {}",
            table.rows.iter().map(|r| format!("{} {}", r.method, r.failures)).collect::<Vec<_>>().join(", ")
        ),
    )];
    let mut timings = std::collections::BTreeMap::new();
    timings.insert("total".to_string(), start.elapsed().as_secs_f64());
    for (name, t) in [("plain", &plain), ("accelerated", &accelerated), ("power", &baseline)] {
        timings.insert(format!("{name}_mean"), t.iter().map(|t| t.seconds).sum::<f64>() / trials as f64);
    }
    Ok(RunRecord {
        spec: spec.clone(),
        resolved_config: serde_json::to_value(&base)?,
        timings,
        counters: Counters {
            work: plain.iter().chain(&accelerated).chain(&baseline).map(|t| t.work).sum(),
            row_accesses: plain.iter().chain(&accelerated).chain(&baseline).map(|t| t.row_accesses).sum(),
            ..Counters::default()
        },
        result: Payload::Bench(table),
        checks,
    })
}
