//! Index-addressed Gaussian increments and reproducible initial clouds.
//!
//! A [`NoiseTape`] never carries mutable state: the variate for the index
//! tuple `(r, i, n, k, ch)` is computed on demand from a ChaCha8 keystream
//! keyed by the seed. The replicate and channel select the stream, the
//! particle, step and coordinate select the position inside it. Any two
//! solvers that query the same tuple therefore see the same number, in any
//! order and from any thread.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::cloud::Cloud;
use crate::error::{invalid, Error, Result};

/// u32 keystream words reserved for one variate (two u64 draws).
const WORDS_PER_VARIATE: u128 = 4;
/// Stream reserved for initial-condition sampling.
const INIT_STREAM: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseLayout {
    pub replicates: usize,
    pub particles: usize,
    pub steps: usize,
    pub dim: usize,
    /// 1 for the plain schemes, 2 when the local-best noise is also needed.
    pub channels: usize,
}

/// Anything that can hand out the standard normal increments a step consumes.
pub trait NoiseSource: Sync {
    fn layout(&self) -> NoiseLayout;

    /// `theta(r, i, n, k, ch)`; `ch` is 1-based.
    fn theta(&self, r: usize, i: usize, n: usize, k: usize, ch: usize) -> Result<f64>;

    /// All `particles * dim` variates of step `n`, laid out as `out[i * dim + k]`.
    fn fill_step(&self, r: usize, n: usize, ch: usize, out: &mut [f64]) -> Result<()>;
}

#[derive(Clone, Debug)]
pub struct NoiseTape {
    seed: u64,
    layout: NoiseLayout,
}

impl NoiseTape {
    pub fn new(seed: u64, layout: NoiseLayout) -> Result<Self> {
        let l = layout;
        if l.replicates == 0 || l.particles == 0 || l.steps == 0 || l.dim == 0 {
            return Err(invalid(format!("empty noise layout {l:?}")));
        }
        if !(1..=2).contains(&l.channels) {
            return Err(invalid(format!(
                "channels must be 1 or 2, got {}",
                l.channels
            )));
        }
        Ok(Self { seed, layout })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn check(&self, r: usize, n: usize, ch: usize) -> Result<()> {
        let l = &self.layout;
        if r >= l.replicates || n >= l.steps || ch == 0 || ch > l.channels {
            return Err(Error::Layout(format!(
                "(r={r}, n={n}, ch={ch}) outside {l:?}"
            )));
        }
        Ok(())
    }

    fn stream(&self, r: usize, n: usize, ch: usize, slot_in_step: usize) -> ChaCha8Rng {
        let l = &self.layout;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((r * l.channels + (ch - 1)) as u64);
        let slot = (n as u128) * (l.particles * l.dim) as u128 + slot_in_step as u128;
        rng.set_word_pos(slot * WORDS_PER_VARIATE);
        rng
    }
}

#[inline]
fn box_muller(rng: &mut ChaCha8Rng) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * SCALE;
    let u2 = (rng.next_u64() >> 11) as f64 * SCALE;
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

impl NoiseSource for NoiseTape {
    fn layout(&self) -> NoiseLayout {
        self.layout
    }

    fn theta(&self, r: usize, i: usize, n: usize, k: usize, ch: usize) -> Result<f64> {
        self.check(r, n, ch)?;
        if i >= self.layout.particles || k >= self.layout.dim {
            return Err(Error::Layout(format!(
                "(i={i}, k={k}) outside {:?}",
                self.layout
            )));
        }
        let mut rng = self.stream(r, n, ch, i * self.layout.dim + k);
        Ok(box_muller(&mut rng))
    }

    fn fill_step(&self, r: usize, n: usize, ch: usize, out: &mut [f64]) -> Result<()> {
        self.check(r, n, ch)?;
        let expected = self.layout.particles * self.layout.dim;
        if out.len() != expected {
            return Err(Error::Layout(format!(
                "step buffer holds {} values, layout needs {expected}",
                out.len()
            )));
        }
        let mut rng = self.stream(r, n, ch, 0);
        for v in out.iter_mut() {
            *v = box_muller(&mut rng);
        }
        Ok(())
    }
}

/// Distribution of the initial positions (or velocities).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitDistribution {
    /// Independent coordinates `N(mean, var)`.
    Gaussian { mean: f64, var: f64 },
    /// Independent coordinates uniform on `[a, b]`.
    Uniform { a: f64, b: f64 },
}

impl InitDistribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InitDistribution::Gaussian { mean, var } => {
                if !(var > 0.0) || !var.is_finite() || !mean.is_finite() {
                    return Err(invalid(format!("gaussian({mean},{var}) needs var > 0")));
                }
            }
            InitDistribution::Uniform { a, b } => {
                if !(a < b) || !a.is_finite() || !b.is_finite() {
                    return Err(invalid(format!("uniform({a},{b}) needs a < b")));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for InitDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitDistribution::Gaussian { mean, var } => write!(f, "gaussian({mean},{var})"),
            InitDistribution::Uniform { a, b } => write!(f, "uniform({a},{b})"),
        }
    }
}

impl FromStr for InitDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || invalid(format!("cannot parse distribution '{s}'"));
        let open = s.find('(').ok_or_else(bad)?;
        let inner = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let args: Vec<f64> = inner
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let dist = match (s[..open].trim(), args.as_slice()) {
            ("gaussian", &[mean, var]) => InitDistribution::Gaussian { mean, var },
            ("uniform", &[a, b]) => InitDistribution::Uniform { a, b },
            _ => return Err(bad()),
        };
        dist.validate()?;
        Ok(dist)
    }
}

/// `n` i.i.d. points in `R^d` drawn from `dist`; fully determined by `seed`.
pub fn initial_positions(seed: u64, n: usize, d: usize, dist: InitDistribution) -> Result<Cloud> {
    dist.validate()?;
    if n == 0 || d == 0 {
        return Err(invalid("initial cloud needs N >= 1 and d >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM);
    let data: Vec<f64> = match dist {
        InitDistribution::Gaussian { mean, var } => {
            let normal = Normal::new(mean, var.sqrt()).map_err(|e| invalid(e.to_string()))?;
            (0..n * d).map(|_| normal.sample(&mut rng)).collect()
        }
        InitDistribution::Uniform { a, b } => {
            let uniform = Uniform::new_inclusive(a, b).map_err(|e| invalid(e.to_string()))?;
            (0..n * d).map(|_| uniform.sample(&mut rng)).collect()
        }
    };
    Cloud::new(d, data)
}

/// Seed for the initial cloud of replicate `r`, decorrelated from `seed`.
pub fn replicate_seed(seed: u64, r: usize) -> u64 {
    // splitmix64 finaliser over the pair
    let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(r as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
