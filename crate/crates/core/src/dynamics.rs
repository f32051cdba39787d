//! Time stepping for the four particle schemes.
//!
//! * `pso`: semi-implicit second-order scheme, velocity first and then the
//!   position with the new velocity.
//! * `cbo`: Euler-Maruyama for the first-order consensus dynamics.
//! * `pso_mem` / `cbo_mem`: the same pair with a per-particle local best `Y`
//!   and the consensus taken over the local bests.
//!
//! The consensus point is computed once per step from the pre-step cloud and
//! shared read-only by the per-particle sweep, which runs on the rayon pool.
//! All noise comes from a [`NoiseSource`] addressed by `(r, i, n, k, ch)`, so
//! a PSO run and a CBO run on the same tape see identical increments.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::cloud::Cloud;
use crate::consensus::weighted_average;
use crate::error::{invalid, Error, Result};
use crate::metrics::{empirical_moments_of, Moments};
use crate::noise::{NoiseLayout, NoiseSource};
use crate::objectives::Objective;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MemoryParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub nu: f64,
    pub beta: f64,
}

/// Model and discretisation constants. The friction is always `1 - m`.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    /// Inertia weight in `(0, 1]`; ignored by the first-order schemes.
    pub m: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub dt: f64,
    pub horizon: f64,
    pub particles: usize,
    pub dim: usize,
    pub memory: Option<MemoryParams>,
}

impl Params {
    pub fn gamma(&self) -> f64 {
        1.0 - self.m
    }

    pub fn with_m(&self, m: f64) -> Self {
        Self { m, ..self.clone() }
    }

    /// Number of steps `floor(T / dt)`, tolerant to representation error in the ratio.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )))
            }
        };
        if !(self.m > 0.0 && self.m <= 1.0) {
            return Err(invalid(format!("m must lie in (0, 1], got {}", self.m)));
        }
        nonneg("lambda", self.lambda)?;
        nonneg("sigma", self.sigma)?;
        nonneg("alpha", self.alpha)?;
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt) || !self.horizon.is_finite() {
            return Err(invalid(format!(
                "T = {} must be at least dt = {}",
                self.horizon, self.dt
            )));
        }
        if self.particles == 0 || self.dim == 0 {
            return Err(invalid("need N >= 1 and d >= 1"));
        }
        if let Some(mp) = &self.memory {
            nonneg("lambda1", mp.lambda1)?;
            nonneg("lambda2", mp.lambda2)?;
            nonneg("sigma1", mp.sigma1)?;
            nonneg("sigma2", mp.sigma2)?;
            nonneg("nu", mp.nu)?;
            nonneg("beta", mp.beta)?;
        }
        Ok(())
    }

    fn memory_params(&self) -> Result<&MemoryParams> {
        self.memory.as_ref().ok_or_else(|| {
            invalid("memory scheme requires lambda1, lambda2, sigma1, sigma2, nu, beta")
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    Pso,
    Cbo,
    PsoMemory,
    CboMemory,
}

impl Scheme {
    pub fn has_velocity(self) -> bool {
        matches!(self, Scheme::Pso | Scheme::PsoMemory)
    }

    pub fn has_memory(self) -> bool {
        matches!(self, Scheme::PsoMemory | Scheme::CboMemory)
    }

    pub fn channels(self) -> usize {
        if self.has_memory() {
            2
        } else {
            1
        }
    }

    /// The first-order scheme a second-order one degenerates to as `m -> 0`.
    pub fn limit(self) -> Scheme {
        match self {
            Scheme::Pso | Scheme::Cbo => Scheme::Cbo,
            Scheme::PsoMemory | Scheme::CboMemory => Scheme::CboMemory,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Pso => "pso",
            Scheme::Cbo => "cbo",
            Scheme::PsoMemory => "pso_mem",
            Scheme::CboMemory => "cbo_mem",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "pso" => Ok(Scheme::Pso),
            "cbo" => Ok(Scheme::Cbo),
            "pso_mem" => Ok(Scheme::PsoMemory),
            "cbo_mem" => Ok(Scheme::CboMemory),
            other => Err(invalid(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Positions, and where the scheme needs them velocities and local bests,
/// after `step` steps. All buffers are row-major `N x d`.
#[derive(Clone, Debug, PartialEq)]
pub struct SwarmState {
    pub step: usize,
    pub t: f64,
    pub dim: usize,
    pub x: Vec<f64>,
    pub v: Option<Vec<f64>>,
    pub y: Option<Vec<f64>>,
}

impl SwarmState {
    /// Initial state for `scheme`: velocities default to zero, local bests
    /// start at the positions.
    pub fn new(scheme: Scheme, positions: &Cloud, velocities: Option<&Cloud>) -> Result<Self> {
        let x = positions.as_slice().to_vec();
        let v = if scheme.has_velocity() {
            match velocities {
                Some(vc) if vc.dim() == positions.dim() && vc.len() == positions.len() => {
                    Some(vc.as_slice().to_vec())
                }
                Some(_) => return Err(invalid("velocity cloud shape differs from positions")),
                None => Some(vec![0.0; x.len()]),
            }
        } else {
            None
        };
        let y = scheme.has_memory().then(|| x.clone());
        Ok(Self {
            step: 0,
            t: 0.0,
            dim: positions.dim(),
            x,
            v,
            y,
        })
    }

    pub fn particles(&self) -> usize {
        self.x.len() / self.dim
    }

    pub fn positions(&self) -> Cloud {
        Cloud::new(self.dim, self.x.clone()).expect("state buffers are never empty")
    }

    pub fn local_bests(&self) -> Option<Cloud> {
        self.y
            .as_ref()
            .map(|y| Cloud::new(self.dim, y.clone()).expect("nonempty"))
    }

    /// `(1/N) sum_i |V_i|`; zero for schemes without velocity.
    pub fn mean_speed(&self) -> f64 {
        match &self.v {
            Some(v) => {
                v.chunks_exact(self.dim)
                    .map(|vi| vi.iter().map(|c| c * c).sum::<f64>().sqrt())
                    .sum::<f64>()
                    / self.particles() as f64
            }
            None => 0.0,
        }
    }

    fn advance_clock(&mut self, dt: f64) {
        self.step += 1;
        self.t = self.step as f64 * dt;
    }

    fn check_finite(&self) -> Result<()> {
        let fields = [
            ("X", Some(&self.x)),
            ("V", self.v.as_ref()),
            ("Y", self.y.as_ref()),
        ];
        for (field, buf) in fields {
            if let Some(buf) = buf {
                if let Some(pos) = buf.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFinite {
                        step: self.step,
                        particle: pos / self.dim,
                        field,
                    });
                }
            }
        }
        Ok(())
    }
}

fn costs_of(points: &[f64], dim: usize, obj: &Objective) -> Vec<f64> {
    points.par_chunks_exact(dim).map(|p| obj.eval(p)).collect()
}

fn consensus_of(points: &[f64], dim: usize, obj: &Objective, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let costs = costs_of(points, dim, obj);
    let mut center = vec![0.0; dim];
    weighted_average(points, &costs, dim, alpha, &mut center);
    (costs, center)
}

fn check_shape(state: &SwarmState, p: &Params, obj: &Objective, scheme: Scheme) -> Result<()> {
    if state.dim != p.dim || obj.dim() != p.dim {
        return Err(invalid(format!(
            "dimension mismatch: state {}, params {}, objective {}",
            state.dim,
            p.dim,
            obj.dim()
        )));
    }
    if state.v.is_some() != scheme.has_velocity() || state.y.is_some() != scheme.has_memory() {
        return Err(invalid(format!(
            "state layout does not fit scheme {scheme}"
        )));
    }
    Ok(())
}

fn draw(noise: &impl NoiseSource, r: usize, n: usize, ch: usize, len: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0.0; len];
    noise.fill_step(r, n, ch, &mut buf)?;
    Ok(buf)
}

/// One semi-implicit PSO step, consuming channel 1 of step `state.step`.
pub fn pso_step(
    state: &mut SwarmState,
    p: &Params,
    obj: &Objective,
    noise: &impl NoiseSource,
    r: usize,
) -> Result<()> {
    check_shape(state, p, obj, Scheme::Pso)?;
    let d = state.dim;
    let (_, xa) = consensus_of(&state.x, d, obj, p.alpha);
    let theta = draw(noise, r, state.step, 1, state.x.len())?;

    let denom = p.m + p.gamma() * p.dt;
    let keep = p.m / denom;
    let drift = p.lambda * p.dt / denom;
    let diffusion = p.sigma * p.dt.sqrt() / denom;
    let dt = p.dt;
    let v = state.v.as_mut().expect("checked above");
    state
        .x
        .par_chunks_exact_mut(d)
        .zip(v.par_chunks_exact_mut(d))
        .zip(theta.par_chunks_exact(d))
        .for_each(|((x, v), th)| {
            for k in 0..d {
                let gap = xa[k] - x[k];
                v[k] = keep * v[k] + drift * gap + diffusion * gap * th[k];
                x[k] += dt * v[k];
            }
        });
    state.advance_clock(p.dt);
    state.check_finite()
}

/// One Euler-Maruyama CBO step, consuming the same tape slots as [`pso_step`].
pub fn cbo_step(
    state: &mut SwarmState,
    p: &Params,
    obj: &Objective,
    noise: &impl NoiseSource,
    r: usize,
) -> Result<()> {
    check_shape(state, p, obj, Scheme::Cbo)?;
    let d = state.dim;
    let (_, xa) = consensus_of(&state.x, d, obj, p.alpha);
    let theta = draw(noise, r, state.step, 1, state.x.len())?;

    let drift = p.lambda * p.dt;
    let diffusion = p.sigma * p.dt.sqrt();
    state
        .x
        .par_chunks_exact_mut(d)
        .zip(theta.par_chunks_exact(d))
        .for_each(|(x, th)| {
            for k in 0..d {
                let gap = xa[k] - x[k];
                x[k] += drift * gap + diffusion * gap * th[k];
            }
        });
    state.advance_clock(p.dt);
    state.check_finite()
}

/// Local-best relaxation `Y += nu dt (X_new - Y) tanh(beta (E(X_new) - E(Y)))`.
#[inline]
fn relax_local_best(
    x: &[f64],
    y: &mut [f64],
    cost_y: f64,
    mp: &MemoryParams,
    dt: f64,
    obj: &Objective,
) {
    if mp.nu == 0.0 {
        return;
    }
    let switch = (mp.beta * (obj.eval(x) - cost_y)).tanh();
    let rate = mp.nu * dt * switch;
    for (yk, &xk) in y.iter_mut().zip(x) {
        *yk += rate * (xk - *yk);
    }
}

/// One semi-implicit PSO step with memory. Channel 1 drives the local-best
/// attraction, channel 2 the global-best attraction.
pub fn pso_memory_step(
    state: &mut SwarmState,
    p: &Params,
    obj: &Objective,
    noise: &impl NoiseSource,
    r: usize,
) -> Result<()> {
    check_shape(state, p, obj, Scheme::PsoMemory)?;
    let mp = *p.memory_params()?;
    let d = state.dim;
    let y = state.y.as_mut().expect("checked above");
    let (cost_y, ya) = consensus_of(y, d, obj, p.alpha);
    let theta1 = draw(noise, r, state.step, 1, state.x.len())?;
    let theta2 = draw(noise, r, state.step, 2, state.x.len())?;

    let denom = p.m + p.gamma() * p.dt;
    let keep = p.m / denom;
    let local_drift = mp.lambda1 * p.dt / denom;
    let global_drift = mp.lambda2 * p.dt / denom;
    let local_diff = mp.sigma1 * p.dt.sqrt() / denom;
    let global_diff = mp.sigma2 * p.dt.sqrt() / denom;
    let dt = p.dt;
    let v = state.v.as_mut().expect("checked above");
    state
        .x
        .par_chunks_exact_mut(d)
        .zip(v.par_chunks_exact_mut(d))
        .zip(y.par_chunks_exact_mut(d))
        .zip(theta1.par_chunks_exact(d).zip(theta2.par_chunks_exact(d)))
        .zip(cost_y.par_iter())
        .for_each(|((((x, v), y), (th1, th2)), &cy)| {
            for k in 0..d {
                let to_local = y[k] - x[k];
                let to_global = ya[k] - x[k];
                v[k] = keep * v[k]
                    + local_drift * to_local
                    + global_drift * to_global
                    + local_diff * to_local * th1[k]
                    + global_diff * to_global * th2[k];
                x[k] += dt * v[k];
            }
            relax_local_best(x, y, cy, &mp, dt, obj);
        });
    state.advance_clock(p.dt);
    state.check_finite()
}

/// One Euler-Maruyama step of the first-order memory dynamics.
pub fn cbo_memory_step(
    state: &mut SwarmState,
    p: &Params,
    obj: &Objective,
    noise: &impl NoiseSource,
    r: usize,
) -> Result<()> {
    check_shape(state, p, obj, Scheme::CboMemory)?;
    let mp = *p.memory_params()?;
    let d = state.dim;
    let y = state.y.as_mut().expect("checked above");
    let (cost_y, ya) = consensus_of(y, d, obj, p.alpha);
    let theta1 = draw(noise, r, state.step, 1, state.x.len())?;
    let theta2 = draw(noise, r, state.step, 2, state.x.len())?;

    let sqrt_dt = p.dt.sqrt();
    let dt = p.dt;
    state
        .x
        .par_chunks_exact_mut(d)
        .zip(y.par_chunks_exact_mut(d))
        .zip(theta1.par_chunks_exact(d).zip(theta2.par_chunks_exact(d)))
        .zip(cost_y.par_iter())
        .for_each(|(((x, y), (th1, th2)), &cy)| {
            for k in 0..d {
                let to_local = y[k] - x[k];
                let to_global = ya[k] - x[k];
                x[k] += mp.lambda1 * dt * to_local
                    + mp.lambda2 * dt * to_global
                    + mp.sigma1 * sqrt_dt * to_local * th1[k]
                    + mp.sigma2 * sqrt_dt * to_global * th2[k];
            }
            relax_local_best(x, y, cy, &mp, dt, obj);
        });
    state.advance_clock(p.dt);
    state.check_finite()
}

/// Advances `state` by one step of `scheme`.
pub fn step(
    scheme: Scheme,
    state: &mut SwarmState,
    p: &Params,
    obj: &Objective,
    noise: &impl NoiseSource,
    r: usize,
) -> Result<()> {
    match scheme {
        Scheme::Pso => pso_step(state, p, obj, noise, r),
        Scheme::Cbo => cbo_step(state, p, obj, noise, r),
        Scheme::PsoMemory => pso_memory_step(state, p, obj, noise, r),
        Scheme::CboMemory => cbo_memory_step(state, p, obj, noise, r),
    }
}

/// Consensus point of the current state: over positions for the plain
/// schemes, over local bests for the memory schemes.
pub fn current_consensus(state: &SwarmState, obj: &Objective, alpha: f64) -> Vec<f64> {
    let cloud = state.y.as_ref().unwrap_or(&state.x);
    consensus_of(cloud, state.dim, obj, alpha).1
}

/// Noise layout large enough for one run of `scheme` under `p`.
pub fn layout_for(scheme: Scheme, p: &Params, replicates: usize) -> NoiseLayout {
    NoiseLayout {
        replicates,
        particles: p.particles,
        steps: p.steps(),
        dim: p.dim,
        channels: scheme.channels(),
    }
}

/// Which states [`run`] keeps in full.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum SnapshotSchedule {
    #[default]
    None,
    EveryStep,
    /// Times are mapped to the nearest step.
    Times(Vec<f64>),
}

impl SnapshotSchedule {
    fn steps(&self, p: &Params) -> Result<Vec<bool>> {
        let total = p.steps();
        let mut keep = vec![false; total + 1];
        match self {
            SnapshotSchedule::None => {}
            SnapshotSchedule::EveryStep => keep.fill(true),
            SnapshotSchedule::Times(times) => {
                for &t in times {
                    keep[time_to_step(t, p)?] = true;
                }
            }
        }
        Ok(keep)
    }
}

/// Nearest step index for time `t`, rejecting times outside `[0, steps * dt]`.
pub fn time_to_step(t: f64, p: &Params) -> Result<usize> {
    let total = p.steps();
    let n = (t / p.dt).round();
    if !(n >= 0.0) || n > total as f64 {
        return Err(invalid(format!(
            "snapshot time {t} outside [0, {}]",
            total as f64 * p.dt
        )));
    }
    Ok(n as usize)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub scheme: Scheme,
    pub steps: usize,
    pub times: Vec<f64>,
    pub consensus: Vec<Vec<f64>>,
    pub x_moments: Vec<Moments>,
    pub v_moments: Option<Vec<Moments>>,
    pub y_moments: Option<Vec<Moments>>,
    pub snapshots: Vec<SwarmState>,
}

impl RunRecord {
    fn new(scheme: Scheme, steps: usize) -> Self {
        Self {
            scheme,
            steps,
            times: Vec::with_capacity(steps + 1),
            consensus: Vec::with_capacity(steps + 1),
            x_moments: Vec::with_capacity(steps + 1),
            v_moments: scheme.has_velocity().then(Vec::new),
            y_moments: scheme.has_memory().then(Vec::new),
            snapshots: Vec::new(),
        }
    }

    fn observe(&mut self, state: &SwarmState, obj: &Objective, alpha: f64, keep: bool) {
        self.times.push(state.t);
        self.consensus.push(current_consensus(state, obj, alpha));
        self.x_moments
            .push(empirical_moments_of(&state.x, state.dim));
        if let (Some(acc), Some(v)) = (self.v_moments.as_mut(), state.v.as_ref()) {
            acc.push(empirical_moments_of(v, state.dim));
        }
        if let (Some(acc), Some(y)) = (self.y_moments.as_mut(), state.y.as_ref()) {
            acc.push(empirical_moments_of(y, state.dim));
        }
        if keep {
            self.snapshots.push(state.clone());
        }
    }

    pub fn final_consensus(&self) -> &[f64] {
        self.consensus
            .last()
            .expect("record holds the initial state")
    }
}

/// Steps `scheme` from `init` for `floor(T/dt)` steps on replicate `r` of
/// `noise`, recording consensus and moments at every step.
pub fn run(
    scheme: Scheme,
    p: &Params,
    obj: &Objective,
    noise: &impl NoiseSource,
    r: usize,
    init: SwarmState,
    snapshots: &SnapshotSchedule,
) -> Result<RunRecord> {
    p.validate()?;
    let total = p.steps();
    let keep = snapshots.steps(p)?;
    let mut state = init;
    let mut record = RunRecord::new(scheme, total);
    record.observe(&state, obj, p.alpha, keep[0]);
    for n in 0..total {
        step(scheme, &mut state, p, obj, noise, r)?;
        record.observe(&state, obj, p.alpha, keep[n + 1]);
    }
    Ok(record)
}
