//! Benchmark cost functions together with the bound metadata the rest of the
//! crate relies on.
//!
//! Every objective carries a lower and upper bound `E_lo <= E(x) <= E_hi` on
//! its test box and a constant `L` for the weighted Lipschitz condition
//!
//! ```text
//! |E(x) - E(y)| <= L (|x| + |y|) |x - y|
//! ```
//!
//! The weight ratio `C_{alpha,E} = exp(alpha (E_hi - E_lo))` is derived from
//! the bounds by [`c_alpha`].

use std::f64::consts::{E, PI};
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

mod lipschitz_table;

pub use lipschitz_table::{ACKLEY_LIPSCHITZ, LIPSCHITZ_CALIBRATION_PAIRS, LIPSCHITZ_SAFETY};

const ROUNDING_MARGIN: f64 = 1e-9;

pub type CostFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Side length of the default certification cube `[-3, 3]^d`.
pub const DEFAULT_BOX_HALF_WIDTH: f64 = 3.0;

/// Axis-aligned cube `[lower, upper]^d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestBox {
    pub lower: f64,
    pub upper: f64,
}

impl TestBox {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(invalid(format!("test box [{lower}, {upper}] is empty")));
        }
        Ok(Self { lower, upper })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().all(|&v| v >= self.lower && v <= self.upper)
    }

    /// Largest Euclidean distance from `center` to any point of the box.
    pub fn max_distance_from(&self, center: &[f64]) -> f64 {
        center
            .iter()
            .map(|&c| {
                let r = (c - self.lower).abs().max((self.upper - c).abs());
                r * r
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R, dim: usize) -> Vec<f64> {
        (0..dim)
            .map(|_| rng.random_range(self.lower..=self.upper))
            .collect()
    }
}

impl Default for TestBox {
    fn default() -> Self {
        Self {
            lower: -DEFAULT_BOX_HALF_WIDTH,
            upper: DEFAULT_BOX_HALF_WIDTH,
        }
    }
}

#[derive(Clone)]
enum Kind {
    Ackley,
    Sphere,
    Rastrigin,
    Custom(CostFn),
}

/// A cost function with its certified metadata. Immutable once built.
#[derive(Clone)]
pub struct Objective {
    name: String,
    dim: usize,
    kind: Kind,
    minimizer: Option<Vec<f64>>,
    lower_bound: f64,
    upper_bound: f64,
    lipschitz: f64,
    test_box: TestBox,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("minimizer", &self.minimizer)
            .field("lower_bound", &self.lower_bound)
            .field("upper_bound", &self.upper_bound)
            .field("lipschitz", &self.lipschitz)
            .field("test_box", &self.test_box)
            .finish()
    }
}

fn check_shift(dim: usize, shift: &[f64]) -> Result<()> {
    if dim == 0 {
        return Err(invalid("objective dimension must be at least 1"));
    }
    if shift.len() != dim {
        return Err(invalid(format!(
            "shift has {} coordinates, expected {dim}",
            shift.len()
        )));
    }
    if shift.iter().any(|v| !v.is_finite()) {
        return Err(invalid("shift must be finite"));
    }
    Ok(())
}

/// Ackley function with global minimiser `shift`:
///
/// `E(x) = -20 exp(-0.2/sqrt(d) |x - x*|) - exp(mean_k cos(2 pi (x_k - x*_k))) + e + 20`.
///
/// The upper bound is the analytic bound on the test box obtained from
/// `|x - x*| <= R_max` and `mean cos >= -1`.
pub fn ackley(dim: usize, shift: &[f64]) -> Result<Objective> {
    check_shift(dim, shift)?;
    let test_box = TestBox::default();
    let reach = test_box.max_distance_from(shift);
    let upper = 20.0 + E - 20.0 * (-0.2 * reach / (dim as f64).sqrt()).exp() - (-1.0f64).exp();
    let mut obj = Objective {
        name: "ackley".into(),
        dim,
        kind: Kind::Ackley,
        minimizer: Some(shift.to_vec()),
        lower_bound: 0.0,
        upper_bound: upper,
        lipschitz: f64::INFINITY,
        test_box,
    };
    obj.lipschitz = match lipschitz_table::ackley_lipschitz(dim) {
        Some(l) if shift.iter().all(|&s| s == 0.0) => l,
        _ => calibrated_lipschitz(&obj),
    };
    Ok(obj)
}

/// `E(x) = |x - x*|^2`. With `x* = 0` the weighted Lipschitz constant is 1;
/// the equality case in one dimension needs a rounding margin on top.
pub fn sphere(dim: usize, shift: &[f64]) -> Result<Objective> {
    check_shift(dim, shift)?;
    let test_box = TestBox::default();
    let reach = test_box.max_distance_from(shift);
    let mut obj = Objective {
        name: "sphere".into(),
        dim,
        kind: Kind::Sphere,
        minimizer: Some(shift.to_vec()),
        lower_bound: 0.0,
        upper_bound: reach * reach,
        lipschitz: 1.0 + ROUNDING_MARGIN,
        test_box,
    };
    if shift.iter().any(|&s| s != 0.0) {
        obj.lipschitz = calibrated_lipschitz(&obj);
    }
    Ok(obj)
}

/// `E(x) = 10 d + sum_k ((x_k - x*_k)^2 - 10 cos(2 pi (x_k - x*_k)))`.
///
/// For `x* = 0` each partial derivative satisfies `|dE/dx_k| <= (2 + 40 pi^2) |x_k|`,
/// which gives `L = 2 + 40 pi^2`.
pub fn rastrigin(dim: usize, shift: &[f64]) -> Result<Objective> {
    check_shift(dim, shift)?;
    let test_box = TestBox::default();
    let upper = shift
        .iter()
        .map(|&c| {
            let r = (c - test_box.lower).abs().max((test_box.upper - c).abs());
            r * r + 20.0
        })
        .sum();
    let mut obj = Objective {
        name: "rastrigin".into(),
        dim,
        kind: Kind::Rastrigin,
        minimizer: Some(shift.to_vec()),
        lower_bound: 0.0,
        upper_bound: upper,
        lipschitz: (2.0 + 40.0 * PI * PI) * (1.0 + ROUNDING_MARGIN),
        test_box,
    };
    if shift.iter().any(|&s| s != 0.0) {
        obj.lipschitz = calibrated_lipschitz(&obj);
    }
    Ok(obj)
}

/// Looks a benchmark up by its configuration name. `shift` defaults to the origin.
pub fn by_name(name: &str, dim: usize, shift: Option<&[f64]>) -> Result<Objective> {
    let origin = vec![0.0; dim];
    let shift = shift.unwrap_or(&origin);
    match name {
        "ackley" => ackley(dim, shift),
        "sphere" => sphere(dim, shift),
        "rastrigin" => rastrigin(dim, shift),
        other => Err(invalid(format!("unknown objective '{other}'"))),
    }
}

fn calibrated_lipschitz(obj: &Objective) -> f64 {
    LIPSCHITZ_SAFETY * estimate_weighted_lipschitz(obj, LIPSCHITZ_CALIBRATION_PAIRS / 5, 0x1ee7)
}

/// Largest observed ratio `|E(x) - E(y)| / ((|x| + |y|) |x - y|)` over
/// `pairs` uniform pairs from the test box.
pub fn estimate_weighted_lipschitz(obj: &Objective, pairs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for _ in 0..pairs {
        let x = obj.test_box.sample(&mut rng, obj.dim);
        let y = obj.test_box.sample(&mut rng, obj.dim);
        let denom = (norm(&x) + norm(&y)) * distance(&x, &y);
        if denom > 0.0 {
            best = best.max((obj.eval(&x) - obj.eval(&y)).abs() / denom);
        }
    }
    best
}

impl Objective {
    /// A user-supplied cost with declared bounds on the default test box.
    /// The Lipschitz constant is unknown (infinite) until set.
    pub fn custom<F>(name: &str, dim: usize, bounds: (f64, f64), f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(invalid("objective dimension must be at least 1"));
        }
        let (lower_bound, upper_bound) = bounds;
        if !(lower_bound <= upper_bound) || !lower_bound.is_finite() || !upper_bound.is_finite() {
            return Err(invalid(format!(
                "bounds [{lower_bound}, {upper_bound}] are not a finite interval"
            )));
        }
        Ok(Self {
            name: name.to_string(),
            dim,
            kind: Kind::Custom(Arc::new(f)),
            minimizer: None,
            lower_bound,
            upper_bound,
            lipschitz: f64::INFINITY,
            test_box: TestBox::default(),
        })
    }

    pub fn with_minimizer(mut self, x: Vec<f64>) -> Result<Self> {
        if x.len() != self.dim {
            return Err(invalid("minimizer dimension mismatch"));
        }
        self.minimizer = Some(x);
        Ok(self)
    }

    pub fn with_test_box(mut self, test_box: TestBox) -> Self {
        self.test_box = test_box;
        self
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = l;
        self
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let shift = self.minimizer.as_deref();
        match &self.kind {
            Kind::Ackley => {
                let shift = shift.expect("benchmarks carry a minimizer");
                let d = self.dim as f64;
                let mut sq = 0.0;
                let mut cos = 0.0;
                for (&xk, &sk) in x.iter().zip(shift) {
                    let z = xk - sk;
                    sq += z * z;
                    cos += (2.0 * PI * z).cos();
                }
                -20.0 * (-0.2 / d.sqrt() * sq.sqrt()).exp() - (cos / d).exp() + E + 20.0
            }
            Kind::Sphere => {
                let shift = shift.expect("benchmarks carry a minimizer");
                x.iter().zip(shift).map(|(a, b)| (a - b) * (a - b)).sum()
            }
            Kind::Rastrigin => {
                let shift = shift.expect("benchmarks carry a minimizer");
                let mut acc = 10.0 * self.dim as f64;
                for (&xk, &sk) in x.iter().zip(shift) {
                    let z = xk - sk;
                    acc += z * z - 10.0 * (2.0 * PI * z).cos();
                }
                acc
            }
            Kind::Custom(f) => f(x),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn minimizer(&self) -> Option<&[f64]> {
        self.minimizer.as_deref()
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    pub fn upper_bound(&self) -> f64 {
        self.upper_bound
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn test_box(&self) -> TestBox {
        self.test_box
    }
}

/// `C_{alpha,E} = exp(alpha (E_hi - E_lo))`, always at least 1.
pub fn c_alpha(obj: &Objective, alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(invalid(format!("alpha must be nonnegative, got {alpha}")));
    }
    let gap = obj.upper_bound - obj.lower_bound;
    if gap == 0.0 {
        return Ok(1.0);
    }
    let exponent = alpha * gap;
    if exponent > f64::MAX.ln() {
        return Err(Error::Overflow(format!(
            "exp({exponent}) exceeds the f64 range"
        )));
    }
    Ok(exponent.exp())
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}
