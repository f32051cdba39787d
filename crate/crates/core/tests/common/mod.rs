//! Exact rational-arithmetic oracle shared by the integration suites.
//!
//! Transcendental values come from truncated series evaluated on a dyadic grid
//! of spacing 2^-320, so their error is far below f64 resolution and the only
//! visible rounding in a comparison is the final conversion to f64.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q(num: i64, den: i64) -> Q {
    Q::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Q {
    q(n, 1)
}

const GRID_BITS: usize = 320;

/// Rounds to the nearest multiple of 2^-GRID_BITS to keep denominators bounded.
fn snap(x: Q) -> Q {
    let scale = Q::from_integer(BigInt::one() << GRID_BITS);
    (x * &scale).round() / scale
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().expect("finite rational")
}

/// Taylor series of `exp(x)` for `|x| <= 1`; 45 terms leave a remainder below 1e-55.
fn exp_small(x: &Q) -> Q {
    assert!(x.abs() <= Q::one(), "exp_small needs |x| <= 1");
    let mut term = Q::one();
    let mut sum = Q::one();
    for k in 1..45 {
        term = snap(term * x / int(k));
        sum += &term;
    }
    sum
}

/// `exp(x)` for any rational `x`, by splitting into `x / 2^s` with `|x / 2^s| <= 1`.
pub fn exp(x: &Q) -> Q {
    let mut halvings = 0u32;
    let mut y = x.clone();
    while y.abs() > Q::one() {
        y /= int(2);
        halvings += 1;
    }
    let mut out = exp_small(&y);
    for _ in 0..halvings {
        out = snap(&out * &out);
    }
    out
}

/// `ln(1 + y)` for `|y| <= 1/2` by the alternating series.
pub fn ln1p(y: &Q) -> Q {
    assert!(y.abs() <= q(1, 2));
    let mut power = y.clone();
    let mut sum = Q::zero();
    for k in 1..120 {
        let term = &power / int(k);
        if k % 2 == 1 {
            sum += term;
        } else {
            sum -= term;
        }
        power = snap(power * y);
    }
    sum
}

/// `ln 2 = sum_k 1 / (k 2^k)`.
pub fn ln2() -> Q {
    let mut sum = Q::zero();
    let mut pow = int(2);
    for k in 1..200 {
        sum += Q::one() / (int(k) * &pow);
        pow *= int(2);
    }
    sum
}

pub fn tanh(x: &Q) -> Q {
    let e2 = exp(&(x * int(2)));
    (&e2 - Q::one()) / (&e2 + Q::one())
}

/// Relative error of `got` against the exact `want`.
pub fn rel_err(got: f64, want: &Q) -> f64 {
    let w = to_f64(want);
    if w == 0.0 {
        got.abs()
    } else {
        ((got - w) / w).abs()
    }
}

pub mod fixtures {
    //! The hand-computable single-step scheme examples, each paired with its
    //! exact value.

    use super::*;
    use swarm_limit::dynamics::{cbo_memory_step, cbo_step, layout_for, pso_step};
    use swarm_limit::objectives::sphere;
    use swarm_limit::{Cloud, MemoryParams, NoiseTape, Objective, Params, Scheme, SwarmState};

    pub struct Check {
        pub label: &'static str,
        pub got: f64,
        pub want: Q,
    }

    fn params(m: f64, lambda: f64, alpha: f64) -> Params {
        Params {
            m,
            lambda,
            sigma: 0.0,
            alpha,
            dt: 0.01,
            horizon: 0.01,
            particles: 2,
            dim: 1,
            memory: None,
        }
    }

    /// Two particles at {0, 1}, V = 0, m = 1/2, dt = 1/100, lambda = 1, sigma = 0, alpha = 0.
    pub fn pso_two_particles() -> Vec<Check> {
        let p = params(0.5, 1.0, 0.0);
        let obj = sphere(1, &[0.0]).unwrap();
        let tape = NoiseTape::new(1, layout_for(Scheme::Pso, &p, 1)).unwrap();
        let x0 = Cloud::from_scalars(&[0.0, 1.0]).unwrap();
        let mut s = SwarmState::new(Scheme::Pso, &x0, None).unwrap();
        pso_step(&mut s, &p, &obj, &tape, 0).unwrap();
        let v = s.v.clone().unwrap();
        // V' = (lambda dt / (m + (1 - m) dt)) (1/2 - x) = +-1/101, X' = x + V'/100
        vec![
            Check {
                label: "pso v[0]",
                got: v[0],
                want: q(1, 101),
            },
            Check {
                label: "pso v[1]",
                got: v[1],
                want: q(-1, 101),
            },
            Check {
                label: "pso x[0]",
                got: s.x[0],
                want: q(1, 10100),
            },
            Check {
                label: "pso x[1]",
                got: s.x[1],
                want: q(10099, 10100),
            },
        ]
    }

    /// Two particles at {0, 1}, lambda = 1, sigma = 0, dt = 1/100, alpha = 0.
    pub fn cbo_two_particles() -> Vec<Check> {
        let p = params(0.5, 1.0, 0.0);
        let obj = sphere(1, &[0.0]).unwrap();
        let tape = NoiseTape::new(1, layout_for(Scheme::Cbo, &p, 1)).unwrap();
        let x0 = Cloud::from_scalars(&[0.0, 1.0]).unwrap();
        let mut s = SwarmState::new(Scheme::Cbo, &x0, None).unwrap();
        cbo_step(&mut s, &p, &obj, &tape, 0).unwrap();
        vec![
            Check {
                label: "cbo x[0]",
                got: s.x[0],
                want: q(1, 200),
            },
            Check {
                label: "cbo x[1]",
                got: s.x[1],
                want: q(199, 200),
            },
        ]
    }

    pub fn linear_unit_interval() -> Objective {
        Objective::custom("linear", 1, (0.0, 1.0), |x| x[0]).unwrap()
    }

    /// X = {0}, Y = {1}, E(x) = x, lambda1 = 1, lambda2 = 0, sigmas 0, nu = 1/2, beta = 30.
    pub fn cbo_memory_single() -> Vec<Check> {
        let mut p = params(1.0, 0.0, 30.0);
        p.particles = 1;
        p.memory = Some(MemoryParams {
            lambda1: 1.0,
            lambda2: 0.0,
            sigma1: 0.0,
            sigma2: 0.0,
            nu: 0.5,
            beta: 30.0,
        });
        let obj = linear_unit_interval();
        let tape = NoiseTape::new(1, layout_for(Scheme::CboMemory, &p, 1)).unwrap();
        let x0 = Cloud::from_scalars(&[0.0]).unwrap();
        let mut s = SwarmState::new(Scheme::CboMemory, &x0, None).unwrap();
        s.y = Some(vec![1.0]);
        cbo_memory_step(&mut s, &p, &obj, &tape, 0).unwrap();

        let x1 = q(1, 100);
        let switch = tanh(&(int(30) * (&x1 - int(1))));
        let y1 = int(1) + q(1, 2) * q(1, 100) * (&x1 - int(1)) * switch;
        vec![
            Check {
                label: "cbo_mem x[0]",
                got: s.x[0],
                want: x1,
            },
            Check {
                label: "cbo_mem y[0]",
                got: s.y.as_ref().unwrap()[0],
                want: y1,
            },
        ]
    }

    pub fn all_scheme_checks() -> Vec<Check> {
        let mut out = pso_two_particles();
        out.extend(cbo_two_particles());
        out.extend(cbo_memory_single());
        out
    }
}
