//! Synthetic inputs from `name:key=value,...` specs. Unknown names and keys
//! are errors.
//!
//! - `spike:d=..,lambda=..[,seed=..]` streams `a = √λ·ι·e₁ + Z`
//! - `planted:d=..,gap=..[,n=..,tail=..,decay=..,seed=..]` has `AᵀA` spectrum
//!   `1, 1 − gap, tail·(1 − gap)·decayᵏ` in random orthonormal bases
//! - `gaussian:n=..,d=..[,density=..,seed=..]` sparse Gaussian entries
//! - `reference` is `diag(1, 1/√2)`

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use shiftinvert::vector::{dot, gaussian_vector, norm};
use shiftinvert::{DataMatrix, SpikeModelParams};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    Spike {
        d: usize,
        lambda: f64,
        seed: u64,
    },
    Planted {
        n: usize,
        d: usize,
        gap: f64,
        tail: f64,
        decay: f64,
        seed: u64,
    },
    Gaussian {
        n: usize,
        d: usize,
        density: f64,
        seed: u64,
    },
    Reference,
}

struct Keys {
    map: BTreeMap<String, String>,
    name: String,
}

impl Keys {
    fn parse(name: &str, body: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for part in body.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| HarnessError::usage(format!("generator entry `{part}` is not key=value")))?;
            if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(HarnessError::usage(format!("generator key `{}` given twice", k.trim())));
            }
        }
        Ok(Keys {
            map,
            name: name.to_string(),
        })
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| HarnessError::usage(format!("{}: bad value `{v}` for `{key}`", self.name))),
        }
    }

    fn need<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.take(key)?
            .ok_or_else(|| HarnessError::usage(format!("{}: missing `{key}`", self.name)))
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().next() {
            Some(k) => Err(HarnessError::usage(format!("{}: unknown key `{k}`", self.name))),
            None => Ok(()),
        }
    }
}

impl FromStr for Generator {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        let (name, body) = s.split_once(':').unwrap_or((s, ""));
        let mut k = Keys::parse(name, body)?;
        let g = match name.trim() {
            "spike" => Generator::Spike {
                d: k.need("d")?,
                lambda: k.need("lambda")?,
                seed: k.take("seed")?.unwrap_or(0),
            },
            "planted" => {
                let d: usize = k.need("d")?;
                Generator::Planted {
                    n: k.take("n")?.unwrap_or(3 * d),
                    d,
                    gap: k.need("gap")?,
                    tail: k.take("tail")?.unwrap_or(0.05),
                    decay: k.take("decay")?.unwrap_or(0.6),
                    seed: k.take("seed")?.unwrap_or(0),
                }
            }
            "gaussian" => Generator::Gaussian {
                n: k.need("n")?,
                d: k.need("d")?,
                density: k.take("density")?.unwrap_or(1.0),
                seed: k.take("seed")?.unwrap_or(0),
            },
            "reference" => Generator::Reference,
            other => return Err(HarnessError::usage(format!("unknown generator `{other}`"))),
        };
        k.finish()?;
        g.validate()?;
        Ok(g)
    }
}

fn orthonormal_columns(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    while cols.len() < k {
        let mut v: Vec<f64> = gaussian_vector(n, rng);
        // two passes of Gram–Schmidt keep the columns orthogonal to rounding
        for _ in 0..2 {
            for c in &cols {
                let p = dot(c, &v);
                for (x, y) in v.iter_mut().zip(c) {
                    *x -= p * y;
                }
            }
        }
        let nv = norm(&v);
        if nv > 1e-8 {
            cols.push(v.iter().map(|x| x / nv).collect());
        }
    }
    cols
}

impl Generator {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HarnessError::usage(m.to_string()));
        match *self {
            Generator::Spike { d, lambda, .. } => {
                if d == 0 || !(lambda > 0.0 && lambda.is_finite()) {
                    return bad("spike: need d ≥ 1 and lambda > 0");
                }
            }
            Generator::Planted { n, d, gap, tail, decay, .. } => {
                if d < 2 || n < d {
                    return bad("planted: need d ≥ 2 and n ≥ d");
                }
                if !(gap > 0.0 && gap < 1.0) || !(tail > 0.0 && tail < 1.0) || !(decay > 0.0 && decay <= 1.0) {
                    return bad("planted: gap and tail must lie in (0, 1), decay in (0, 1]");
                }
            }
            Generator::Gaussian { n, d, density, .. } => {
                if n == 0 || d == 0 || !(density > 0.0 && density <= 1.0) {
                    return bad("gaussian: need n, d ≥ 1 and density in (0, 1]");
                }
            }
            Generator::Reference => {}
        }
        Ok(())
    }

    pub fn is_stream(&self) -> bool {
        matches!(self, Generator::Spike { .. })
    }

    pub fn spike_params(&self) -> Option<SpikeModelParams> {
        match *self {
            Generator::Spike { d, lambda, seed } => Some(SpikeModelParams::axis(d, lambda, seed)),
            _ => None,
        }
    }

    /// Eigenvalues of `AᵀA` the generator plants, where known in closed form.
    pub fn planted_spectrum(&self) -> Option<Vec<f64>> {
        match *self {
            Generator::Planted { d, gap, tail, decay, .. } => {
                let mut s = vec![1.0, 1.0 - gap];
                s.extend((0..d - 2).map(|k| tail * (1.0 - gap) * decay.powi(k as i32)));
                Some(s)
            }
            Generator::Reference => Some(vec![1.0, 0.5]),
            _ => None,
        }
    }

    pub fn matrix(&self) -> Result<DataMatrix> {
        match *self {
            Generator::Spike { .. } => Err(HarnessError::usage("spike generates a stream, not a matrix")),
            Generator::Reference => Ok(DataMatrix::from_triplets(
                2,
                2,
                &[(0, 0, 1.0), (1, 1, 0.5f64.sqrt())],
            )?),
            Generator::Planted { n, d, seed, .. } => {
                let sig2 = self.planted_spectrum().expect("planted");
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let q = orthonormal_columns(&mut rng, n, d);
                let v = orthonormal_columns(&mut rng, d, d);
                let rows: Vec<Vec<f64>> = (0..n)
                    .map(|i| {
                        (0..d)
                            .map(|j| (0..d).map(|k| q[k][i] * sig2[k].sqrt() * v[k][j]).sum())
                            .collect()
                    })
                    .collect();
                Ok(DataMatrix::from_dense_rows(&rows)?)
            }
            Generator::Gaussian { n, d, density, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                loop {
                    let mut t = Vec::new();
                    for i in 0..n {
                        for j in 0..d {
                            if rng.random::<f64>() < density {
                                let z: f64 = gaussian_vector(1, &mut rng)[0];
                                t.push((i, j, z));
                            }
                        }
                    }
                    if !t.is_empty() {
                        return Ok(DataMatrix::from_triplets(n, d, &t)?);
                    }
                }
            }
        }
    }
}
