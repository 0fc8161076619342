//! Streaming setting: sample sources, median-of-means Rayleigh estimates,
//! the streaming SVRG step, the staged solver started from zero, and the
//! online warm-start power method.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::power::{certify_alignment, solver_error_schedule, AcceptRule, EigenResult, PowerReport, TraceRow};
use crate::scalar::Scalar;
use crate::vector::{check_finite, check_len, dot, norm, Vector};

/// A source of i.i.d. vectors with declared dimension and variance bound
/// `v(D) = ‖E(aaᵀ)²‖₂/λ₁² ≥ 1`.
pub trait SampleStream<T: Scalar> {
    fn dim(&self) -> usize;

    fn nvar_bound(&self) -> f64;

    /// Population `λ₁` when the source knows it; used by tests and the harness.
    fn lambda1_proxy(&self) -> Option<f64> {
        None
    }

    /// Writes the next sample into `out` (length `dim()`).
    fn next_sample(&mut self, out: &mut [T]) -> Result<()>;

    fn samples_drawn(&self) -> u64;
}

/// `a = √λ_s·ι·v* + Z` with `ι ∼ N(0, 1)`, `Z ∼ N(0, I_d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeModelParams {
    pub spike_strength: f64,
    pub direction: Vec<f64>,
    pub seed: u64,
}

impl SpikeModelParams {
    /// Spike along the first basis vector.
    pub fn axis(d: usize, spike_strength: f64, seed: u64) -> Self {
        let mut direction = vec![0.0; d];
        if d > 0 {
            direction[0] = 1.0;
        }
        SpikeModelParams {
            spike_strength,
            direction,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spike_strength >= 0.0 && self.spike_strength.is_finite()) {
            return Err(Error::config("spike strength must be finite and non-negative"));
        }
        if self.direction.is_empty() {
            return Err(Error::config("spike direction must be non-empty"));
        }
        check_finite(&self.direction)?;
        if (norm(&self.direction) - 1.0).abs() > 1e-12 {
            return Err(Error::config("spike direction must have unit norm"));
        }
        Ok(())
    }

    pub fn lambda1(&self) -> f64 {
        1.0 + self.spike_strength
    }

    pub fn gap(&self) -> f64 {
        self.spike_strength / (1.0 + self.spike_strength)
    }

    /// `(d + 2 + 3λ_s)/(1 + λ_s)`
    pub fn nvar(&self) -> f64 {
        let d = self.direction.len() as f64;
        (d + 2.0 + 3.0 * self.spike_strength) / (1.0 + self.spike_strength)
    }
}

#[derive(Debug, Clone)]
pub struct SpikeStream {
    params: SpikeModelParams,
    scale: f64,
    rng: ChaCha8Rng,
    drawn: u64,
}

pub fn spike_sampler(params: SpikeModelParams) -> Result<SpikeStream> {
    params.validate()?;
    Ok(SpikeStream {
        scale: params.spike_strength.sqrt(),
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        params,
        drawn: 0,
    })
}

impl SpikeStream {
    pub fn params(&self) -> &SpikeModelParams {
        &self.params
    }
}

impl<T: Scalar> SampleStream<T> for SpikeStream {
    fn dim(&self) -> usize {
        self.params.direction.len()
    }

    fn nvar_bound(&self) -> f64 {
        self.params.nvar()
    }

    fn lambda1_proxy(&self) -> Option<f64> {
        Some(self.params.lambda1())
    }

    fn next_sample(&mut self, out: &mut [T]) -> Result<()> {
        check_len(out, self.params.direction.len())?;
        let iota: f64 = self.rng.sample(StandardNormal);
        let s = self.scale * iota;
        for (o, &v) in out.iter_mut().zip(&self.params.direction) {
            let z: f64 = self.rng.sample(StandardNormal);
            *o = T::lit(s * v + z);
        }
        self.drawn += 1;
        Ok(())
    }

    fn samples_drawn(&self) -> u64 {
        self.drawn
    }
}

/// I.i.d. draws from a finite set of atoms. A single atom is a point mass.
#[derive(Debug, Clone)]
pub struct AtomStream {
    atoms: Vec<Vec<f64>>,
    cumulative: Vec<f64>,
    nvar: f64,
    lambda1: f64,
    rng: ChaCha8Rng,
    drawn: u64,
}

impl AtomStream {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>, seed: u64) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::config("need one positive weight per atom"));
        }
        let d = atoms[0].len();
        for a in &atoms {
            check_len(a, d)?;
            check_finite(a)?;
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::config("atom weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();

        let mut sigma = vec![vec![0.0; d]; d];
        let mut fourth = vec![vec![0.0; d]; d];
        for (a, &p) in atoms.iter().zip(&probs) {
            let sq = dot(a, a);
            for i in 0..d {
                for j in 0..d {
                    sigma[i][j] += p * a[i] * a[j];
                    fourth[i][j] += p * sq * a[i] * a[j];
                }
            }
        }
        let lambda1 = dense_top_eigenvalue(&sigma);
        if !(lambda1 > 0.0) {
            return Err(Error::ZeroMatrix);
        }
        let nvar = (dense_top_eigenvalue(&fourth) / (lambda1 * lambda1)).max(1.0);
        Ok(AtomStream {
            atoms,
            cumulative,
            nvar,
            lambda1,
            rng: ChaCha8Rng::seed_from_u64(seed),
            drawn: 0,
        })
    }

    pub fn point_mass(atom: Vec<f64>) -> Result<Self> {
        Self::new(vec![atom], vec![1.0], 0)
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.cumulative
            .iter()
            .map(|&c| {
                let p = c - prev;
                prev = c;
                p
            })
            .collect()
    }
}

/// Power iteration on a small dense PSD matrix.
fn dense_top_eigenvalue(m: &[Vec<f64>]) -> f64 {
    let d = m.len();
    let mut x: Vec<f64> = (0..d).map(|i| 1.0 + 0.1 * i as f64).collect();
    let mut value = 0.0;
    for _ in 0..2000 {
        let y: Vec<f64> = m.iter().map(|row| dot(row, &x)).collect();
        let n = norm(&y);
        if n == 0.0 {
            return 0.0;
        }
        value = dot(&x, &y) / dot(&x, &x);
        x = y.iter().map(|v| v / n).collect();
    }
    value
}

impl<T: Scalar> SampleStream<T> for AtomStream {
    fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    fn nvar_bound(&self) -> f64 {
        self.nvar
    }

    fn lambda1_proxy(&self) -> Option<f64> {
        Some(self.lambda1)
    }

    fn next_sample(&mut self, out: &mut [T]) -> Result<()> {
        let k = if self.atoms.len() == 1 {
            0
        } else {
            let u: f64 = self.rng.random::<f64>() * self.cumulative[self.cumulative.len() - 1];
            self.cumulative.partition_point(|&c| c <= u).min(self.atoms.len() - 1)
        };
        check_len(out, self.atoms[k].len())?;
        for (o, &v) in out.iter_mut().zip(&self.atoms[k]) {
            *o = T::lit(v);
        }
        self.drawn += 1;
        Ok(())
    }

    fn samples_drawn(&self) -> u64 {
        self.drawn
    }
}

/// Recorded samples: header `(d, n, nvar_bound)` and row-major values.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayData {
    pub d: usize,
    pub nvar_bound: f64,
    pub values: Vec<f64>,
}

impl ReplayData {
    pub fn n(&self) -> usize {
        if self.d == 0 {
            0
        } else {
            self.values.len() / self.d
        }
    }

    /// Draws `n` samples from `stream`.
    pub fn record<T: Scalar, S: SampleStream<T> + ?Sized>(stream: &mut S, n: usize) -> Result<Self> {
        let d = stream.dim();
        let mut buf = vec![T::zero(); d];
        let mut values = Vec::with_capacity(n * d);
        for _ in 0..n {
            stream.next_sample(&mut buf)?;
            values.extend(buf.iter().map(|v| v.to_f64_lossy()));
        }
        Ok(ReplayData {
            d,
            nvar_bound: stream.nvar_bound(),
            values,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.d == 0 || self.values.len() % self.d != 0 {
            return Err(Error::config("replay data length is not a multiple of d"));
        }
        if !(self.nvar_bound >= 1.0) {
            return Err(Error::config("nvar_bound must be at least 1"));
        }
        check_finite(&self.values)
    }

    /// Little-endian `u64 d`, `u64 n`, `f64 nvar_bound`, then `n·d` `f64`s.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.d as u64).to_le_bytes())?;
        w.write_all(&(self.n() as u64).to_le_bytes())?;
        w.write_all(&self.nvar_bound.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> io::Result<[u8; 8]> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        let d = u64::from_le_bytes(next(&mut r)?) as usize;
        let n = u64::from_le_bytes(next(&mut r)?) as usize;
        let nvar_bound = f64::from_le_bytes(next(&mut r)?);
        let total = n
            .checked_mul(d)
            .ok_or_else(|| Error::config("replay header overflows"))?;
        let mut values = Vec::with_capacity(total.min(1 << 24));
        for _ in 0..total {
            values.push(f64::from_le_bytes(next(&mut r)?));
        }
        let data = ReplayData { d, nvar_bound, values };
        data.validate()?;
        Ok(data)
    }

    /// First line `d,n,nvar_bound`, then one sample per line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{},{},{:e}", self.d, self.n(), self.nvar_bound)?;
        for row in self.values.chunks(self.d.max(1)) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty replay file".into(),
        })??;
        let fields: Vec<&str> = header.trim().split(',').collect();
        let bad = |line: usize, message: String| Error::Parse { line, message };
        if fields.len() != 3 {
            return Err(bad(1, "header must be d,n,nvar_bound".into()));
        }
        let d: usize = fields[0].trim().parse().map_err(|e| bad(1, format!("d: {e}")))?;
        let n: usize = fields[1].trim().parse().map_err(|e| bad(1, format!("n: {e}")))?;
        let nvar_bound: f64 = fields[2].trim().parse().map_err(|e| bad(1, format!("nvar_bound: {e}")))?;
        let mut values = Vec::with_capacity(n * d);
        let mut rows = 0;
        for (k, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(k + 2, e.to_string()))?;
            if row.len() != d {
                return Err(bad(k + 2, format!("expected {d} values, found {}", row.len())));
            }
            values.extend(row);
            rows += 1;
        }
        if rows != n {
            return Err(bad(0, format!("header declares {n} samples, found {rows}")));
        }
        let data = ReplayData { d, nvar_bound, values };
        data.validate()?;
        Ok(data)
    }

    /// Chooses the format from the extension: `.csv` is text, anything else binary.
    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = BufReader::new(File::open(path)?);
        if path.extension().is_some_and(|e| e == "csv") {
            Self::read_csv(f)
        } else {
            Self::read_binary(f)
        }
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = BufWriter::new(File::create(path)?);
        if path.extension().is_some_and(|e| e == "csv") {
            self.write_csv(f)
        } else {
            self.write_binary(f)
        }
    }
}

/// Single pass over recorded samples; running out is an error.
#[derive(Debug, Clone)]
pub struct ReplayStream {
    data: ReplayData,
    cursor: usize,
}

impl ReplayStream {
    pub fn new(data: ReplayData) -> Result<Self> {
        data.validate()?;
        Ok(ReplayStream { data, cursor: 0 })
    }
}

impl<T: Scalar> SampleStream<T> for ReplayStream {
    fn dim(&self) -> usize {
        self.data.d
    }

    fn nvar_bound(&self) -> f64 {
        self.data.nvar_bound
    }

    fn next_sample(&mut self, out: &mut [T]) -> Result<()> {
        check_len(out, self.data.d)?;
        if self.cursor >= self.data.n() {
            return Err(Error::StreamExhausted(self.cursor as u64));
        }
        let row = &self.data.values[self.cursor * self.data.d..(self.cursor + 1) * self.data.d];
        for (o, &v) in out.iter_mut().zip(row) {
            *o = T::lit(v);
        }
        self.cursor += 1;
        Ok(())
    }

    fn samples_drawn(&self) -> u64 {
        self.cursor as u64
    }
}

/// Median-of-means sizes `k = ⌈4v/ε²⌉`, `m = ⌈c·ln(1/p)⌉`.
pub fn rayleigh_batch_sizes(nvar: f64, epsilon: f64, p: f64, c: f64) -> (u64, u64) {
    let k = (4.0 * nvar / (epsilon * epsilon)).ceil().max(1.0) as u64;
    let m = (c * (1.0 / p).ln()).ceil().max(1.0) as u64;
    (k, m)
}

/// Median of `m` batch means of `(aᵀx)²`, each over `k` fresh samples;
/// within `ελ₁` of `xᵀΣx` with probability `1 − p`.
pub fn estimate_rayleigh_online<T: Scalar, S: SampleStream<T> + ?Sized>(
    stream: &mut S,
    x: &[T],
    epsilon: f64,
    p: f64,
) -> Result<T> {
    estimate_rayleigh_online_with(stream, x, epsilon, p, 20.0)
}

pub fn estimate_rayleigh_online_with<T: Scalar, S: SampleStream<T> + ?Sized>(
    stream: &mut S,
    x: &[T],
    epsilon: f64,
    p: f64,
    c: f64,
) -> Result<T> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::config("epsilon must lie in (0, 1]"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::config("failure probability must lie in (0, 1)"));
    }
    check_len(x, stream.dim())?;
    let (k, m) = rayleigh_batch_sizes(stream.nvar_bound(), epsilon, p, c);
    let mut buf = vec![T::zero(); stream.dim()];
    let mut means = Vec::with_capacity(m as usize);
    for _ in 0..m {
        let mut acc = 0.0f64;
        for _ in 0..k {
            stream.next_sample(&mut buf)?;
            let s = dot(&buf, x).to_f64_lossy();
            acc += s * s;
        }
        means.push(acc / k as f64);
    }
    means.sort_by(|a, b| a.partial_cmp(b).expect("finite means"));
    let mid = means.len() / 2;
    let median = if means.len() % 2 == 1 {
        means[mid]
    } else {
        0.5 * (means[mid - 1] + means[mid])
    };
    Ok(T::lit(median))
}

/// One streaming SVRG step: anchor `∇g(x₀) = λx₀ − (1/k)Σaᵢaᵢᵀx₀ − b` from `k`
/// fresh samples, then `m̃ ∼ U{1..m}` inner steps
/// `x ← x − step·[λ(x − x₀) − aaᵀ(x − x₀) + ∇g(x₀)]`, each with a fresh `a`.
/// `step` is the full per-step multiplier.
#[allow(clippy::too_many_arguments)]
pub fn ssvrg_iter<T: Scalar, S: SampleStream<T> + ?Sized, R: Rng + ?Sized>(
    stream: &mut S,
    x0: &[T],
    step: T,
    k: u64,
    m: u64,
    lambda: T,
    b: &[T],
    rng: &mut R,
) -> Result<Vector<T>> {
    let d = stream.dim();
    check_len(x0, d)?;
    check_len(b, d)?;
    if k == 0 || m == 0 {
        return Err(Error::config("k and m must be at least 1"));
    }
    let mut buf = vec![T::zero(); d];
    let mut cov_x0 = vec![T::zero(); d];
    for _ in 0..k {
        stream.next_sample(&mut buf)?;
        let s = dot(&buf, x0);
        for (c, &a) in cov_x0.iter_mut().zip(&buf) {
            *c = *c + s * a;
        }
    }
    let inv_k = T::one() / T::lit(k as f64);
    let g: Vec<T> = (0..d).map(|j| lambda * x0[j] - cov_x0[j] * inv_k - b[j]).collect();
    // x − step·λ(x − x₀) − step·g = keep·x + drift
    let keep = T::one() - step * lambda;
    let drift: Vec<T> = (0..d).map(|j| step * (lambda * x0[j] - g[j])).collect();

    let steps = rng.random_range(1..=m);
    let mut x = x0.to_vec();
    for _ in 0..steps {
        stream.next_sample(&mut buf)?;
        let s = step * (dot(&buf, &x) - dot(&buf, x0));
        for j in 0..d {
            x[j] = keep * x[j] + drift[j] + s * buf[j];
        }
    }
    Ok(Vector::from_vec_unchecked(x))
}

/// Constants of the streaming solver. With all scales at 1 these are
/// `step = c₂/(8S̄)`, `m = ⌈S̄/(μc₂²)⌉`, `k = max(⌈S̄/(μc₂)⌉, ⌈vλ₁²/(μ²c₃)⌉)`,
/// where `S̄ = λ + vλ₁²/μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamSolverConfig {
    pub c2: f64,
    /// First-stage variance constant of the staged solver.
    pub c3_prime: f64,
    pub eta_scale: f64,
    pub m_scale: f64,
    pub k_scale: f64,
    /// Stages run at the final `c₃` once the schedule reaches it.
    pub final_stages: u32,
}

impl Default for StreamSolverConfig {
    fn default() -> Self {
        StreamSolverConfig {
            c2: 1.0 / 44.0,
            c3_prime: 1.0 / 20.0,
            eta_scale: 1.0,
            m_scale: 1.0,
            k_scale: 1.0,
            final_stages: 1,
        }
    }
}

impl StreamSolverConfig {
    /// A 44× larger step (`1/(8S̄)`) with epochs and anchors cut to match.
    pub fn practical() -> Self {
        StreamSolverConfig {
            eta_scale: 44.0,
            m_scale: 1.0 / 100.0,
            k_scale: 0.05,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.c2) || !unit(self.c3_prime) {
            return Err(Error::config("c2 and c3_prime must lie in (0, 1)"));
        }
        if !(self.eta_scale > 0.0 && self.m_scale > 0.0 && self.k_scale > 0.0) {
            return Err(Error::config("streaming scales must be positive"));
        }
        Ok(())
    }
}

/// Resolved step, epoch and anchor sizes for one `ssvrg_iter`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamStepParams {
    pub step: f64,
    pub m: u64,
    pub k: u64,
    pub s_bar: f64,
}

pub fn stream_step_params(cfg: &StreamSolverConfig, lambda: f64, lambda1: f64, nvar: f64, c3: f64) -> Result<StreamStepParams> {
    cfg.validate()?;
    let mu = lambda - lambda1;
    if !(mu > 0.0) {
        return Err(Error::InvalidShift {
            shift: lambda,
            detail: format!("shift must exceed the top eigenvalue estimate {lambda1}"),
        });
    }
    if !(c3 > 0.0 && c3 < 1.0) {
        return Err(Error::config("c3 must lie in (0, 1)"));
    }
    let noise = nvar * lambda1 * lambda1;
    let s_bar = lambda + noise / mu;
    let size = |v: f64| -> Result<u64> {
        if !v.is_finite() || v > 1e15 {
            return Err(Error::config(format!("streaming batch size {v:e} is too large")));
        }
        Ok((v.ceil() as u64).max(1))
    };
    let c2 = cfg.c2;
    Ok(StreamStepParams {
        step: cfg.eta_scale * c2 / (8.0 * s_bar),
        m: size(cfg.m_scale * s_bar / (mu * c2 * c2))?,
        k: size(cfg.k_scale * (s_bar / (mu * c2)).max(noise / (mu * mu * c3)))?,
        s_bar,
    })
}

/// Shift and top eigenvalue estimate for the online path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnlineShift {
    pub shift: f64,
    pub lambda1_estimate: f64,
    /// Only used to certify alignment of the result.
    pub gap_estimate: f64,
}

impl OnlineShift {
    /// `λ = λ₁(1 + placement·gap)` from known (or estimated) `λ₁` and gap.
    pub fn place(lambda1: f64, gap: f64, placement: f64) -> Self {
        OnlineShift {
            shift: lambda1 * (1.0 + placement * gap),
            lambda1_estimate: lambda1,
            gap_estimate: gap,
        }
    }
}

/// Solves `Bx = b` for unit `b` from `x₀ = 0` in stages: stage `s` uses
/// `c₃,ₛ = max(c₃, c₃′·2⁻ˢ)`, and `final_stages` more stages run at `c₃`.
/// Returns the solution and the samples consumed.
pub fn streaming_solve<T: Scalar, S: SampleStream<T> + ?Sized, R: Rng + ?Sized>(
    stream: &mut S,
    shift: OnlineShift,
    b: &[T],
    c3: f64,
    cfg: &StreamSolverConfig,
    rng: &mut R,
) -> Result<(Vector<T>, u64)> {
    check_len(b, stream.dim())?;
    let b_norm = norm(b).to_f64_lossy();
    if (b_norm - 1.0).abs() > 1e-8 {
        return Err(Error::config("right-hand side must be a unit vector"));
    }
    let start = stream.samples_drawn();
    let nvar = stream.nvar_bound();
    let lambda = T::lit(shift.shift);
    let mut x = vec![T::zero(); stream.dim()];
    let mut stage = 0u32;
    let mut at_floor = 0u32;
    loop {
        let c3s = (cfg.c3_prime * 0.5f64.powi(stage as i32)).max(c3);
        let p = stream_step_params(cfg, shift.shift, shift.lambda1_estimate, nvar, c3s)?;
        x = ssvrg_iter(stream, &x, T::lit(p.step), p.k, p.m, lambda, b, rng)?.into_inner();
        stage += 1;
        if c3s <= c3 {
            at_floor += 1;
            if at_floor > cfg.final_stages {
                break;
            }
        }
    }
    Ok((Vector::from_vec_unchecked(x), stream.samples_drawn() - start))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnlineConfig {
    pub solver: StreamSolverConfig,
    /// Rayleigh tolerance `ε_rq = rq_eps_scale·(λ − λ̂₁)/λ̂₁`.
    pub rq_eps_scale: f64,
    /// Median-of-means constant `c` in `m = ⌈c·ln(1/p)⌉`.
    pub rq_c: f64,
    /// Final solver constant `c₃ = c3_final_scale·δ²·ε·λ̂₁/(λ − λ̂₁)`.
    pub c3_final_scale: f64,
    pub max_iterations: usize,
    pub trace: bool,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        OnlineConfig {
            solver: StreamSolverConfig::default(),
            rq_eps_scale: 1.0 / 30.0,
            rq_c: 20.0,
            c3_final_scale: 1.0,
            max_iterations: 40,
            trace: false,
        }
    }
}

impl OnlineConfig {
    pub fn practical() -> Self {
        OnlineConfig {
            solver: StreamSolverConfig::practical(),
            rq_eps_scale: 1.0,
            rq_c: 2.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if !(self.rq_eps_scale > 0.0 && self.rq_c > 0.0 && self.c3_final_scale > 0.0) {
            return Err(Error::config("online constants must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// Per-iteration solver constants: `c₁(i)²` while it exceeds `25·c₃_final`,
/// then one last iteration at `c₃_final`, so only the last one tracks `ε`.
pub fn online_c3_schedule(c3_final: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0.. {
        let c = solver_error_schedule(i);
        if c * c <= 25.0 * c3_final {
            break;
        }
        out.push(c * c);
    }
    out.push(c3_final);
    out
}

/// Warm-start online power method. `x0_warm` must satisfy `G ≤ 1/√10`.
/// The returned `rayleigh` is a fresh streaming estimate of the final
/// iterate at the accept-test tolerance.
#[allow(clippy::too_many_arguments)]
pub fn top_eigenvector_online<T: Scalar, S: SampleStream<T> + ?Sized, R: Rng + ?Sized>(
    stream: &mut S,
    x0_warm: &[T],
    shift: OnlineShift,
    epsilon: f64,
    delta: f64,
    cfg: &OnlineConfig,
    rng: &mut R,
) -> Result<EigenResult<T>> {
    cfg.validate()?;
    if !(epsilon > 0.0 && epsilon < 1.0 && delta > 0.0 && delta < 1.0) {
        return Err(Error::config("epsilon and delta must lie in (0, 1)"));
    }
    check_len(x0_warm, stream.dim())?;
    let mu = shift.shift - shift.lambda1_estimate;
    if !(mu > 0.0 && shift.lambda1_estimate > 0.0) {
        return Err(Error::InvalidShift {
            shift: shift.shift,
            detail: "shift must exceed a positive top eigenvalue estimate".into(),
        });
    }
    let l1 = shift.lambda1_estimate;
    let c3_final = (cfg.c3_final_scale * delta * delta * epsilon * l1 / mu).min(0.5);
    let schedule = online_c3_schedule(c3_final);
    if schedule.len() > cfg.max_iterations {
        return Err(Error::config(format!(
            "schedule needs {} iterations, budget is {}",
            schedule.len(),
            cfg.max_iterations
        )));
    }
    let rq_eps = (cfg.rq_eps_scale * mu / l1).min(1.0);
    let rq_p = (delta / (2.0 * schedule.len() as f64)).min(0.5);
    let rule = AcceptRule::<f64>::new(shift.shift, l1);

    let start = stream.samples_drawn();
    let mut x = Vector::new(x0_warm.to_vec())?.normalized()?;
    let mut report = PowerReport::default();
    for (i, &c3) in schedule.iter().enumerate() {
        let (xh, _) = streaming_solve(stream, shift, &x, c3, &cfg.solver, rng)?;
        let n = xh.norm().to_f64_lossy();
        let mut accepted = false;
        let mut rq_seen = f64::NAN;
        if n > 0.0 && n.is_finite() {
            let unit = Vector::from_vec_unchecked(xh.iter().map(|&v| v / T::lit(n)).collect());
            let rq = estimate_rayleigh_online_with(stream, &unit, rq_eps, rq_p, cfg.rq_c)?.to_f64_lossy();
            rq_seen = rq;
            if rule.accepts(rq, n) {
                x = unit;
                accepted = true;
            }
        }
        if accepted {
            report.accepted += 1;
        } else {
            report.rejected += 1;
        }
        if cfg.trace {
            let err = (l1 - rq_seen).max(0.0);
            report.trace.push(TraceRow {
                iteration: i + 1,
                phase: "warm".into(),
                accepted,
                rayleigh: rq_seen,
                rayleigh_error: err,
                g_proxy: (err / mu).sqrt(),
                cumulative_work: stream.samples_drawn() - start,
            });
        }
    }
    report.warm_iterations = schedule.len();
    let rayleigh = estimate_rayleigh_online_with(stream, &x, rq_eps, rq_p, cfg.rq_c)?;
    report.samples_used = stream.samples_drawn() - start;
    let err = (T::lit(l1) - rayleigh).max(T::zero());
    let gap = T::lit(shift.gap_estimate);
    Ok(EigenResult {
        alignment_lower_bound: certify_alignment(err, T::lit(l1), gap),
        vector: x,
        rayleigh,
        shift_used: T::lit(shift.shift),
        lambda1_estimate: T::lit(l1),
        gap_estimate: gap,
        shift_search: None,
        report,
    })
}
