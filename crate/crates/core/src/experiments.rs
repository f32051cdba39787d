//! Reproducible drivers for the zero-inertia experiments.
//!
//! Every driver couples an inertial run with its first-order limit by giving
//! both the same initial cloud and the same [`NoiseTape`]. Work is split into
//! independent `(m, replicate)` cells on the rayon pool; results are folded in
//! index order so the output does not depend on the number of workers.

use rayon::prelude::*;

use crate::cloud::{Cloud, EmpiricalMeasure};
use crate::consensus::laplace_value;
use crate::dynamics::{
    current_consensus, layout_for, step, time_to_step, Params, Scheme, SwarmState,
};
use crate::error::{invalid, Error, Result};
use crate::metrics::{default_bins, kl_histogram, paired_msq_gap_raw, wasserstein2_1d};
use crate::noise::{initial_positions, replicate_seed, InitDistribution, NoiseTape};
use crate::objectives::{distance, Objective};

/// Largest inertia accepted in a limit-study ladder.
pub const MAX_LADDER_M: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemePair {
    Plain,
    Memory,
}

impl SchemePair {
    pub fn inertial(self) -> Scheme {
        match self {
            SchemePair::Plain => Scheme::Pso,
            SchemePair::Memory => Scheme::PsoMemory,
        }
    }

    pub fn limit(self) -> Scheme {
        self.inertial().limit()
    }
}

/// How the expectation in the mean-square gap is estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Estimator {
    /// Mean over `R > 1` independent replicates of the particle average.
    Replicates(usize),
    /// Particle average of a single run.
    SingleRun,
}

impl Estimator {
    pub fn label(self) -> String {
        match self {
            Estimator::Replicates(r) => format!("replicates({r})"),
            Estimator::SingleRun => "single-run".into(),
        }
    }
}

/// Which coordinates enter the paired gap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GapMetric {
    /// `|X^m - X|^2`
    Positions,
    /// `|X^m - X|^2 + |Y^m - Y|^2`
    PositionsAndLocalBests,
}

impl GapMetric {
    pub fn label(self) -> &'static str {
        match self {
            GapMetric::Positions => "paired_msq_gap(x)",
            GapMetric::PositionsAndLocalBests => "paired_msq_gap(x,y)",
        }
    }
}

#[derive(Clone, Debug)]
pub struct LimitStudyConfig {
    /// Strictly decreasing inertia values in `(0, 1/2]`.
    pub m_ladder: Vec<f64>,
    pub replicates: usize,
    /// Everything but `m`, which the ladder supplies.
    pub base: Params,
    pub scheme_pair: SchemePair,
    pub init: InitDistribution,
    /// Initial velocities; zero when absent.
    pub initial_velocity: Option<InitDistribution>,
    /// Also record per-step W2 and KL series (plain pair, `d = 1` only).
    pub track_distributions: bool,
    /// Histogram bins for KL; `ceil(sqrt(N))` when absent.
    pub bins: Option<usize>,
}

impl LimitStudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_ladder.is_empty() {
            return Err(invalid("m ladder is empty"));
        }
        if let Some(&m) = self
            .m_ladder
            .iter()
            .find(|&&m| !(m > 0.0 && m <= MAX_LADDER_M))
        {
            return Err(invalid(format!(
                "ladder value {m} outside (0, {MAX_LADDER_M}]"
            )));
        }
        if self.m_ladder.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("m ladder must be strictly decreasing"));
        }
        if self.replicates == 0 {
            return Err(invalid("need at least one replicate"));
        }
        if self.scheme_pair == SchemePair::Memory && self.base.memory.is_none() {
            return Err(invalid("memory study needs memory parameters"));
        }
        if self.track_distributions && (self.base.dim != 1 || self.scheme_pair != SchemePair::Plain)
        {
            return Err(invalid(
                "distribution series need the plain pair in one dimension",
            ));
        }
        self.init.validate()?;
        self.base.with_m(self.m_ladder[0]).validate()
    }

    fn bins(&self) -> usize {
        self.bins
            .unwrap_or_else(|| default_bins(self.base.particles))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyRow {
    pub m: f64,
    /// `sup_t` of the paired gap, one entry per replicate.
    pub sup_gaps: Vec<f64>,
    pub mean: f64,
    /// Standard error of `mean`; NaN for a single replicate.
    pub stderr: f64,
    /// Replicate-averaged W2 at every recorded time.
    pub w2_series: Option<Vec<f64>>,
    pub kl_series: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyResult {
    pub rows: Vec<StudyRow>,
    pub times: Vec<f64>,
    /// Least-squares slope and intercept of `ln G` against `ln m`; absent with
    /// fewer than two ladder points or a vanishing gap.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub estimator: Estimator,
    pub metric: GapMetric,
    pub seed: u64,
    pub bins: Option<usize>,
}

/// Initial state of replicate `r` for `scheme`.
pub fn initial_state(
    scheme: Scheme,
    p: &Params,
    init: InitDistribution,
    initial_velocity: Option<InitDistribution>,
    seed: u64,
    r: usize,
) -> Result<SwarmState> {
    let x0 = initial_positions(replicate_seed(seed, r), p.particles, p.dim, init)?;
    let v0 = match initial_velocity {
        Some(dist) if scheme.has_velocity() => Some(initial_positions(
            replicate_seed(seed.rotate_left(32) ^ 0x76656c, r),
            p.particles,
            p.dim,
            dist,
        )?),
        _ => None,
    };
    SwarmState::new(scheme, &x0, v0.as_ref())
}

fn joint(state: &SwarmState) -> Vec<f64> {
    match &state.y {
        Some(y) => [state.x.as_slice(), y.as_slice()].concat(),
        None => state.x.clone(),
    }
}

struct CellOutcome {
    sup_gap: f64,
    w2: Option<Vec<f64>>,
    kl: Option<Vec<f64>>,
}

/// Couples `pso(m)` (or `pso_mem`) against the stored limit trajectory.
fn run_cell(
    cfg: &LimitStudyConfig,
    obj: &Objective,
    tape: &NoiseTape,
    seed: u64,
    m: f64,
    r: usize,
    limit_path: &[Vec<f64>],
) -> Result<CellOutcome> {
    let scheme = cfg.scheme_pair.inertial();
    let p = cfg.base.with_m(m);
    let mut state = initial_state(scheme, &p, cfg.init, cfg.initial_velocity, seed, r)?;
    let n = p.particles;
    let bins = cfg.bins();
    let mut sup_gap = 0.0f64;
    let mut w2 = cfg.track_distributions.then(Vec::new);
    let mut kl = cfg.track_distributions.then(Vec::new);
    for (idx, reference) in limit_path.iter().enumerate() {
        if idx > 0 {
            step(scheme, &mut state, &p, obj, tape, r)?;
        }
        let current = joint(&state);
        sup_gap = sup_gap.max(paired_msq_gap_raw(&current, reference, n));
        if let (Some(w2), Some(kl)) = (w2.as_mut(), kl.as_mut()) {
            let a = Cloud::new(1, current)?;
            let b = Cloud::new(1, reference.clone())?;
            w2.push(wasserstein2_1d(&a, &b)?);
            kl.push(kl_histogram(&a, &b, bins)?);
        }
    }
    Ok(CellOutcome { sup_gap, w2, kl })
}

fn limit_trajectory(
    cfg: &LimitStudyConfig,
    obj: &Objective,
    tape: &NoiseTape,
    seed: u64,
    r: usize,
) -> Result<Vec<Vec<f64>>> {
    let scheme = cfg.scheme_pair.limit();
    let p = &cfg.base;
    let mut state = initial_state(scheme, p, cfg.init, None, seed, r)?;
    let mut path = Vec::with_capacity(p.steps() + 1);
    path.push(joint(&state));
    for _ in 0..p.steps() {
        step(scheme, &mut state, p, obj, tape, r)?;
        path.push(joint(&state));
    }
    Ok(path)
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn mean_series(series: &[Vec<f64>]) -> Vec<f64> {
    let len = series[0].len();
    (0..len)
        .map(|t| series.iter().map(|s| s[t]).sum::<f64>() / series.len() as f64)
        .collect()
}

/// Ordinary least squares fit `y = slope * x + intercept`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    if xs.len() < 2 || xs.len() != ys.len() || xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// For every ladder value and replicate, the supremum over the time grid of
/// the paired mean-square gap between the inertial run and its limit, plus a
/// log-log rate fit over the ladder.
pub fn zero_inertia_study(
    cfg: &LimitStudyConfig,
    obj: &Objective,
    seed: u64,
) -> Result<StudyResult> {
    cfg.validate()?;
    let p = &cfg.base;
    let tape = NoiseTape::new(
        seed,
        layout_for(cfg.scheme_pair.inertial(), p, cfg.replicates),
    )?;

    // cells[r][j] is the outcome for replicate r and ladder entry j
    let cells: Vec<Vec<CellOutcome>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let path = limit_trajectory(cfg, obj, &tape, seed, r).map_err(|e| Error::Cell {
                m: 0.0,
                replicate: r,
                source: Box::new(e),
            })?;
            cfg.m_ladder
                .par_iter()
                .map(|&m| {
                    run_cell(cfg, obj, &tape, seed, m, r, &path).map_err(|e| Error::Cell {
                        m,
                        replicate: r,
                        source: Box::new(e),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let rows: Vec<StudyRow> = cfg
        .m_ladder
        .iter()
        .enumerate()
        .map(|(j, &m)| {
            let sup_gaps: Vec<f64> = cells.iter().map(|c| c[j].sup_gap).collect();
            let (mean, stderr) = mean_and_stderr(&sup_gaps);
            let collect_series = |pick: fn(&CellOutcome) -> Option<&Vec<f64>>| {
                let all: Option<Vec<Vec<f64>>> =
                    cells.iter().map(|c| pick(&c[j]).cloned()).collect();
                all.map(|s| mean_series(&s))
            };
            StudyRow {
                m,
                sup_gaps,
                mean,
                stderr,
                w2_series: collect_series(|c| c.w2.as_ref()),
                kl_series: collect_series(|c| c.kl.as_ref()),
            }
        })
        .collect();

    let fit = if rows.iter().all(|r| r.mean > 0.0) {
        let xs: Vec<f64> = rows.iter().map(|r| r.m.ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.mean.ln()).collect();
        fit_line(&xs, &ys)
    } else {
        None
    };
    let times = (0..=p.steps()).map(|n| n as f64 * p.dt).collect();
    Ok(StudyResult {
        rows,
        times,
        slope: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
        estimator: if cfg.replicates > 1 {
            Estimator::Replicates(cfg.replicates)
        } else {
            Estimator::SingleRun
        },
        metric: match cfg.scheme_pair {
            SchemePair::Plain => GapMetric::Positions,
            SchemePair::Memory => GapMetric::PositionsAndLocalBests,
        },
        seed,
        bins: cfg.track_distributions.then(|| cfg.bins()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompareRow {
    pub t: f64,
    pub w2: f64,
    pub kl: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareTable {
    pub m: f64,
    pub seed: u64,
    pub bins: usize,
    pub rows: Vec<CompareRow>,
}

impl CompareTable {
    pub fn mean_w2(&self) -> f64 {
        self.rows.iter().map(|r| r.w2).sum::<f64>() / self.rows.len() as f64
    }

    pub fn mean_kl(&self) -> f64 {
        self.rows.iter().map(|r| r.kl).sum::<f64>() / self.rows.len() as f64
    }
}

/// Coupled single runs of `pso(p.m)` and `cbo` on replicate 0; W2 and KL
/// between the two position clouds at each snapshot time (every step when
/// `snapshot_times` is `None`).
pub fn compare_distributions(
    p: &Params,
    obj: &Objective,
    init: InitDistribution,
    seed: u64,
    snapshot_times: Option<&[f64]>,
    bins: Option<usize>,
) -> Result<CompareTable> {
    p.validate()?;
    if p.dim != 1 {
        return Err(invalid("distribution comparison needs d = 1"));
    }
    let total = p.steps();
    let mut wanted = vec![snapshot_times.is_none(); total + 1];
    for &t in snapshot_times.unwrap_or(&[]) {
        wanted[time_to_step(t, p)?] = true;
    }
    let bins = bins.unwrap_or_else(|| default_bins(p.particles));
    let tape = NoiseTape::new(seed, layout_for(Scheme::Pso, p, 1))?;
    let mut inertial = initial_state(Scheme::Pso, p, init, None, seed, 0)?;
    let mut limit = initial_state(Scheme::Cbo, p, init, None, seed, 0)?;
    let mut rows = Vec::new();
    for (n, &keep) in wanted.iter().enumerate() {
        if n > 0 {
            step(Scheme::Pso, &mut inertial, p, obj, &tape, 0)?;
            step(Scheme::Cbo, &mut limit, p, obj, &tape, 0)?;
        }
        if keep {
            let a = inertial.positions();
            let b = limit.positions();
            rows.push(CompareRow {
                t: inertial.t,
                w2: wasserstein2_1d(&a, &b)?,
                kl: kl_histogram(&a, &b, bins)?,
            });
        }
    }
    Ok(CompareTable {
        m: p.m,
        seed,
        bins,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizeOutcome {
    pub consensus: Vec<f64>,
    /// `(1/N) sum |V_i|` at the horizon; zero for first-order schemes.
    pub mean_speed: f64,
    pub distance_to_minimizer: Option<f64>,
}

/// Runs `scheme` to `p.horizon` from replicate 0 of `seed`.
pub fn optimize(
    scheme: Scheme,
    p: &Params,
    obj: &Objective,
    init: InitDistribution,
    seed: u64,
) -> Result<OptimizeOutcome> {
    p.validate()?;
    let tape = NoiseTape::new(seed, layout_for(scheme, p, 1))?;
    let mut state = initial_state(scheme, p, init, None, seed, 0)?;
    for _ in 0..p.steps() {
        step(scheme, &mut state, p, obj, &tape, 0)?;
    }
    let consensus = current_consensus(&state, obj, p.alpha);
    let distance_to_minimizer = obj.minimizer().map(|xs| distance(&consensus, xs));
    Ok(OptimizeOutcome {
        mean_speed: state.mean_speed(),
        consensus,
        distance_to_minimizer,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaplaceRow {
    pub alpha: f64,
    pub value: f64,
    /// `value - min_i E(x_i)`
    pub gap: f64,
}

/// Laplace functional of a fixed cloud for increasing `alphas`.
pub fn laplace_sweep(
    measure: &EmpiricalMeasure,
    obj: &Objective,
    alphas: &[f64],
) -> Result<Vec<LaplaceRow>> {
    if alphas.is_empty() || alphas.iter().any(|&a| !(a > 0.0)) {
        return Err(invalid("alphas must be positive"));
    }
    if alphas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("alphas must be increasing"));
    }
    let min_cost = measure
        .points()
        .map(|x| obj.eval(x))
        .fold(f64::INFINITY, f64::min);
    alphas
        .iter()
        .map(|&alpha| {
            let value = laplace_value(measure, obj, alpha)?;
            Ok(LaplaceRow {
                alpha,
                value,
                gap: value - min_cost,
            })
        })
        .collect()
}
