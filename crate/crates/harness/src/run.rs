//! Executes a validated [`RunSpec`] and assembles the [`RunRecord`].

use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use shiftinvert::mtx::read_matrix_market_file;
use shiftinvert::oracle::{gram_spectrum, MAX_DENSE_DIM};
use shiftinvert::shift::ConjugateGradientShiftInverse;
use shiftinvert::vector::{dot, gaussian_vector, norm};
use shiftinvert::{
    estimate_shift, rayleigh_quotient, spike_sampler, top_eigenvector_offline, top_eigenvector_online, DataMatrix,
    EigenResult64,
    OnlineConfig, OnlineShift, PowerConfig, ReplayData, ReplayStream, SampleStream, ShiftConfig, ShiftSource,
    SpikeModelParams,
};

use crate::bench::run_bench;
use crate::error::{HarnessError, Result};
use crate::record::{Check, Counters, Payload, RunRecord};
use crate::spec::{apply_overrides, Input, Mode, RunSpec};
use crate::trace::write_trace_csv;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Practical,
    Faithful,
}

pub fn preset(spec: &RunSpec) -> Result<Preset> {
    match spec.overrides.get("preset").map(String::as_str) {
        None | Some("practical") => Ok(Preset::Practical),
        Some("faithful") => Ok(Preset::Faithful),
        Some(other) => Err(HarnessError::usage(format!("unknown preset `{other}`"))),
    }
}

/// Offline configuration after preset, flags and overrides.
pub fn offline_config(spec: &RunSpec) -> Result<PowerConfig> {
    let mut cfg = match preset(spec)? {
        Preset::Practical => PowerConfig::practical(),
        Preset::Faithful => PowerConfig::default(),
    };
    cfg.target_epsilon = spec.epsilon;
    cfg.delta = spec.delta;
    cfg.solver = spec.solver;
    cfg.seed = spec.seed;
    cfg.trace = spec.trace_csv.is_some();
    if let (Some(a), ShiftSource::Estimate { search, .. }) = (spec.alpha, &mut cfg.shift) {
        search.alpha = a;
    }
    let cfg = apply_overrides(cfg, &spec.overrides, &["preset"])?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn shift_config(spec: &RunSpec) -> Result<ShiftConfig> {
    let mut cfg = match preset(spec)? {
        Preset::Practical => ShiftConfig {
            c: 0.05,
            ..ShiftConfig::default()
        },
        Preset::Faithful => ShiftConfig::default(),
    };
    if let Some(a) = spec.alpha {
        cfg.alpha = a;
    }
    let cfg = apply_overrides(cfg, &spec.overrides, &["preset"])?;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WarmStart {
    /// Population top direction, spike generators only.
    Oracle,
    /// Offline run on the covariance of a recorded prefix of the stream.
    Pilot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineRunConfig {
    pub online: OnlineConfig,
    /// `λ = λ̂₁(1 + placement·gap̂)`
    pub placement: f64,
    pub warm_start: WarmStart,
    /// Oracle starts are tilted off `v*` to this potential `G(x₀)`; must stay
    /// below `1/√10`.
    pub warm_potential: f64,
    pub pilot_samples: usize,
    pub pilot: PowerConfig,
}

pub fn online_config(spec: &RunSpec) -> Result<OnlineRunConfig> {
    let online = match preset(spec)? {
        // the δ² factor in the final solver constant overshoots the target
        // by two orders of magnitude on spike streams
        Preset::Practical => OnlineConfig {
            c3_final_scale: 10.0,
            ..OnlineConfig::practical()
        },
        Preset::Faithful => OnlineConfig::default(),
    };
    let oracle_available = matches!(spec.input, Input::Generator(_));
    let cfg = OnlineRunConfig {
        online: OnlineConfig {
            trace: spec.trace_csv.is_some(),
            ..online
        },
        placement: 1.0 / 8.0,
        warm_start: if oracle_available { WarmStart::Oracle } else { WarmStart::Pilot },
        warm_potential: 0.25,
        pilot_samples: 20_000,
        pilot: PowerConfig {
            target_epsilon: 1e-4,
            seed: spec.seed,
            ..PowerConfig::practical()
        },
    };
    let cfg = apply_overrides(cfg, &spec.overrides, &["preset"])?;
    cfg.online.validate()?;
    cfg.pilot.validate()?;
    if !(cfg.warm_potential >= 0.0 && cfg.warm_potential < 10f64.sqrt().recip()) {
        return Err(HarnessError::usage("warm_potential must lie in [0, 1/√10)"));
    }
    if !(cfg.placement > 0.0) || cfg.pilot_samples < 2 {
        return Err(HarnessError::usage("placement must be positive and pilot_samples at least 2"));
    }
    if cfg.warm_start == WarmStart::Oracle && !oracle_available {
        return Err(HarnessError::usage("warm_start=oracle needs a spike generator"));
    }
    Ok(cfg)
}

pub fn load_matrix(spec: &RunSpec) -> Result<DataMatrix> {
    match (&spec.input, spec.generator()?) {
        (Input::Path(p), _) => Ok(read_matrix_market_file(p)?),
        (_, Some(g)) => g.matrix(),
        _ => unreachable!("generator input always parses to a generator"),
    }
}

struct Timer {
    timings: BTreeMap<String, f64>,
}

impl Timer {
    fn new() -> Self {
        Timer {
            timings: BTreeMap::new(),
        }
    }

    fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.timings.insert(phase.to_string(), t.elapsed().as_secs_f64());
        out
    }
}

/// Validates, runs, and writes the optional trace. The record is returned;
/// writing it is the caller's job.
pub fn execute(spec: &RunSpec) -> Result<RunRecord> {
    spec.validate()?;
    let record = match spec.mode {
        Mode::Offline => run_offline(spec)?,
        Mode::EstimateShift => run_estimate_shift(spec)?,
        Mode::Online => run_online(spec)?,
        Mode::Bench => run_bench(spec)?,
    };
    if let (Some(path), Payload::Eigen(r)) = (&spec.trace_csv, &record.result) {
        write_trace_csv(path, &r.report.trace)?;
    }
    Ok(record)
}

/// Plain-solver work against `nnz(A)` per full gradient plus `d` per inner
/// step. Each inner step also touches one row twice, so the ratio stays
/// within 2 when rows hold at most about `d/2` entries.
pub fn work_accounting_check(a: &DataMatrix, c: &Counters) -> Check {
    let reference = c.full_gradients * a.nnz() as u64 + c.inner_steps * a.d() as u64;
    let max_row = (0..a.n()).map(|i| a.row_nnz(i)).max().unwrap_or(0) as u64;
    let upper = c.full_gradients * (2 * a.nnz() + a.d()) as u64 + c.inner_steps * (2 * max_row + a.d() as u64);
    let ratio = c.work as f64 / reference.max(1) as f64;
    Check::new(
        "work_accounting",
        c.work >= reference && c.work <= upper,
        format!("work {} is {ratio:.3}× nnz·gradients + d·inner steps", c.work),
    )
}

fn oracle_checks(a: &DataMatrix, r: &EigenResult64, epsilon: f64, checks: &mut Vec<Check>) -> Result<()> {
    if a.d() <= MAX_DENSE_DIM {
        let l1 = gram_spectrum(a)?.lambda1();
        checks.push(Check::new(
            "oracle_rayleigh",
            r.rayleigh >= (1.0 - epsilon) * l1,
            format!("rayleigh {:.12e} vs (1 - ε)·λ₁ with λ₁ = {l1:.12e}", r.rayleigh),
        ));
        // the warm-start analysis wants (10/11)(λ − λ₁) ≤ λ − λ̂₁ ≤ λ − λ₁
        let (mu, mu_hat) = (r.shift_used - l1, r.shift_used - r.lambda1_estimate);
        checks.push(Check::new(
            "lambda1_estimate_band",
            // rounding in λ − λ̂₁ alone reaches 1e-12 relative when μ is small
            mu > 0.0 && mu_hat >= 10.0 / 11.0 * mu && mu_hat <= mu * (1.0 + 1e-9),
            format!("(λ − λ̂₁)/(λ − λ₁) = 1 {:+.3e} (band [10/11, 1])", mu_hat / mu - 1.0),
        ));
    }
    Ok(())
}

fn run_offline(spec: &RunSpec) -> Result<RunRecord> {
    let mut timer = Timer::new();
    let cfg = offline_config(spec)?;
    let a = timer.time("load", || load_matrix(spec))?;
    let r = timer.time("solve", || top_eigenvector_offline(&a, &cfg))?;
    let counters = Counters::from_solver(&r.report.solver);
    let mut checks = vec![
        Check::new(
            "unit_norm",
            (r.vector.norm() - 1.0).abs() <= 1e-12,
            format!("‖x‖ = {}", r.vector.norm()),
        ),
        Check::new(
            "rayleigh_consistent",
            (rayleigh_quotient(&a, &r.vector)? - r.rayleigh).abs() <= 1e-12 * r.rayleigh.abs().max(1.0),
            "reported Rayleigh quotient matches xᵀAᵀAx",
        ),
    ];
    if cfg.solver == shiftinvert::SolverChoice::Plain {
        checks.push(work_accounting_check(&a, &counters));
    }
    timer.time("oracle", || oracle_checks(&a, &r, spec.epsilon, &mut checks))?;
    Ok(RunRecord {
        spec: spec.clone(),
        resolved_config: serde_json::to_value(&cfg)?,
        timings: timer.timings,
        counters,
        result: Payload::Eigen(r),
        checks,
    })
}

fn run_estimate_shift(spec: &RunSpec) -> Result<RunRecord> {
    let mut timer = Timer::new();
    let cfg = shift_config(spec)?;
    let a = timer.time("load", || load_matrix(spec))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let r = timer.time("search", || {
        estimate_shift(&a, &cfg, &ConjugateGradientShiftInverse::default(), &mut rng)
    })?;
    let mut checks = vec![Check::new(
        "shift_above_estimate",
        r.lambda_bar > r.lambda_tilde_1,
        format!("λ̄ = {} and λ̃₁ = {}", r.lambda_bar, r.lambda_tilde_1),
    )];
    if a.d() <= MAX_DENSE_DIM {
        let s = gram_spectrum(&a)?;
        let (l1, gap) = (s.lambda1(), s.gap());
        checks.push(Check::new(
            "oracle_band",
            r.lambda_bar >= (1.0 + gap / 120.0) * l1 && r.lambda_bar <= (1.0 + gap / 8.0) * l1,
            format!("λ̄ = {} with λ₁ = {l1}, gap = {gap}", r.lambda_bar),
        ));
        checks.push(Check::new(
            "iteration_budget",
            r.iterations <= ShiftConfig::budget_for_gap(gap),
            format!("{} of {} iterations", r.iterations, ShiftConfig::budget_for_gap(gap)),
        ));
    }
    Ok(RunRecord {
        spec: spec.clone(),
        resolved_config: serde_json::to_value(cfg)?,
        timings: timer.timings,
        counters: Counters::default(),
        result: Payload::Shift(r),
        checks,
    })
}

/// Caps the samples a run may draw; exceeding the cap is an error.
pub struct Budgeted<'a, S: ?Sized> {
    inner: &'a mut S,
    limit: u64,
}

impl<'a, S: SampleStream<f64> + ?Sized> Budgeted<'a, S> {
    pub fn new(inner: &'a mut S, limit: Option<u64>) -> Self {
        Budgeted {
            inner,
            limit: limit.unwrap_or(u64::MAX),
        }
    }
}

impl<S: SampleStream<f64> + ?Sized> SampleStream<f64> for Budgeted<'_, S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn nvar_bound(&self) -> f64 {
        self.inner.nvar_bound()
    }

    fn lambda1_proxy(&self) -> Option<f64> {
        self.inner.lambda1_proxy()
    }

    fn next_sample(&mut self, out: &mut [f64]) -> shiftinvert::Result<()> {
        if self.inner.samples_drawn() >= self.limit {
            return Err(shiftinvert::Error::StreamExhausted(self.limit));
        }
        self.inner.next_sample(out)
    }

    fn samples_drawn(&self) -> u64 {
        self.inner.samples_drawn()
    }
}

/// Offline run on `n` recorded samples scaled by `1/√n`, so that `AᵀA` is
/// their empirical second moment.
fn pilot(
    stream: &mut dyn SampleStream<f64>,
    cfg: &OnlineRunConfig,
) -> Result<(Vec<f64>, OnlineShift)> {
    let data = ReplayData::record::<f64, _>(stream, cfg.pilot_samples)?;
    let scale = (data.n() as f64).sqrt().recip();
    let rows: Vec<Vec<f64>> = data.values.chunks(data.d).map(|r| r.iter().map(|v| v * scale).collect()).collect();
    let a = DataMatrix::from_dense_rows(&rows)?;
    let r = top_eigenvector_offline(&a, &cfg.pilot)?;
    let shift = OnlineShift::place(r.lambda1_estimate, r.gap_estimate, cfg.placement);
    Ok((r.vector.into_inner(), shift))
}

/// `cos θ·v* + sin θ·u` for a random unit `u ⊥ v*`, with `θ` set so that
/// `G(x₀) = g`. Every other spike eigenvalue is 1, so
/// `tan θ = g·√((λ − λ₁)/(λ − 1))`.
fn tilted_start(p: &SpikeModelParams, shift: OnlineShift, g: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let v = &p.direction;
    if v.len() == 1 || g == 0.0 {
        return Ok(v.clone());
    }
    let mut u: Vec<f64> = gaussian_vector(v.len(), rng);
    let c = dot(&u, v);
    u.iter_mut().zip(v).for_each(|(ui, vi)| *ui -= c * vi);
    let nu = norm(&u);
    let t = g * ((shift.shift - p.lambda1()) / (shift.shift - 1.0)).sqrt();
    let (cos, sin) = (1.0 / (1.0 + t * t).sqrt(), t / (1.0 + t * t).sqrt());
    Ok(v.iter().zip(&u).map(|(vi, ui)| cos * vi + sin * ui / nu).collect())
}

fn run_online(spec: &RunSpec) -> Result<RunRecord> {
    let mut timer = Timer::new();
    let cfg = online_config(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let generator = spec.generator()?;
    let spike = generator.as_ref().and_then(|g| g.spike_params());
    let mut source: Box<dyn SampleStream<f64>> = match (&spec.input, &spike) {
        (_, Some(p)) => Box::new(spike_sampler(p.clone())?),
        (Input::Path(path), None) => Box::new(timer.time("load", || -> Result<ReplayStream> {
            Ok(ReplayStream::new(ReplayData::read_file(path)?)?)
        })?),
        _ => unreachable!("validated online input"),
    };
    let mut stream = Budgeted::new(source.as_mut(), spec.samples);

    let (x0, shift) = match (cfg.warm_start, &spike) {
        (WarmStart::Oracle, Some(p)) => {
            let shift = OnlineShift::place(p.lambda1(), p.gap(), cfg.placement);
            (tilted_start(p, shift, cfg.warm_potential, &mut rng)?, shift)
        }
        _ => timer.time("pilot", || pilot(&mut stream, &cfg))?,
    };
    let pilot_samples = stream.samples_drawn();
    let r = timer.time("solve", || {
        top_eigenvector_online(&mut stream, &x0, shift, spec.epsilon, spec.delta, &cfg.online, &mut rng)
    })?;
    let total = stream.samples_drawn();

    let mut checks = vec![Check::new(
        "unit_norm",
        (r.vector.norm() - 1.0).abs() <= 1e-12,
        format!("‖x‖ = {}", r.vector.norm()),
    )];
    if let Some(limit) = spec.samples {
        checks.push(Check::new("sample_budget", total <= limit, format!("{total} of {limit} samples")));
    }
    if let Some(p) = &spike {
        let align = dot(r.vector.as_slice(), &p.direction).abs();
        let err = p.lambda1() - (p.lambda1() - 1.0) * align * align - 1.0;
        checks.push(Check::new(
            "oracle_rayleigh",
            err <= spec.epsilon * p.lambda1(),
            format!("population Rayleigh error {err:.6e}, |xᵀv*| = {align:.6}"),
        ));
    }
    let counters = Counters {
        samples_used: total,
        ..Counters::default()
    };
    let mut resolved = serde_json::to_value(&cfg)?;
    if let Some(m) = resolved.as_object_mut() {
        m.insert("shift".into(), serde_json::to_value(shift)?);
        m.insert("pilot_samples_used".into(), Value::from(pilot_samples));
    }
    Ok(RunRecord {
        spec: spec.clone(),
        resolved_config: resolved,
        timings: timer.timings,
        counters,
        result: Payload::Eigen(r),
        checks,
    })
}
