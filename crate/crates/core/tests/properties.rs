//! Randomised invariant checks across the library.

use std::sync::Mutex;

use proptest::collection::vec;
use proptest::prelude::*;
use swarm_limit::config::RunConfig;
use swarm_limit::consensus::consensus_point;
use swarm_limit::dynamics::{layout_for, run, SnapshotSchedule};
use swarm_limit::experiments::{initial_state, zero_inertia_study, LimitStudyConfig, SchemePair};
use swarm_limit::metrics::{kl_histogram, paired_msq_gap, wasserstein2_1d};
use swarm_limit::objectives::{ackley, c_alpha};
use swarm_limit::{
    Cloud, InitDistribution, MemoryParams, NoiseLayout, NoiseSource, NoiseTape, Objective, Params,
    Result, Scheme,
};

fn cloud_strategy(max_n: usize) -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1usize..=3, 1usize..=max_n).prop_flat_map(|(d, n)| (Just(d), vec(-3.0f64..3.0, n * d)))
}

fn scalars(max_n: usize) -> impl Strategy<Value = Vec<f64>> {
    vec(-3.0f64..3.0, 1..=max_n)
}

/// Cost on a 2^-10 grid so that adding a small integer is exact.
fn quantized(dim: usize, offset: f64) -> Objective {
    let base = ackley(dim, &vec![0.0; dim]).unwrap();
    Objective::custom("quantized", dim, (offset, offset + 32.0), move |x| {
        (base.eval(x) * 1024.0).round() / 1024.0 + offset
    })
    .unwrap()
}

proptest! {
    #[test]
    fn consensus_lies_in_the_hull((d, data) in cloud_strategy(30), alpha in 0.0f64..200.0) {
        let cloud = Cloud::new(d, data).unwrap();
        let obj = ackley(d, &vec![0.0; d]).unwrap();
        let c = consensus_point(&cloud, &obj, alpha).unwrap();
        for k in 0..d {
            let (lo, hi) = cloud.points().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[k]), hi.max(p[k])));
            let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
            prop_assert!(c[k] >= lo - slack && c[k] <= hi + slack, "coordinate {} = {} outside [{}, {}]", k, c[k], lo, hi);
        }
    }

    #[test]
    fn constant_cost_offsets_leave_consensus_bit_identical(
        (d, data) in cloud_strategy(30),
        alpha in 0.0f64..100.0,
        offset in -8i32..8,
    ) {
        let cloud = Cloud::new(d, data).unwrap();
        let a = consensus_point(&cloud, &quantized(d, 0.0), alpha).unwrap();
        let b = consensus_point(&cloud, &quantized(d, offset as f64), alpha).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn consensus_approaches_best_point_as_alpha_grows(best in -3.0f64..3.0, offsets in vec(0.05f64..3.0, 1..20), upward in any::<bool>()) {
        // all points on one side of the minimiser of a centred parabola
        let sign = if upward { 1.0 } else { -1.0 };
        let mut xs = vec![best];
        xs.extend(offsets.iter().map(|o| best + sign * o));
        let cloud = Cloud::from_scalars(&xs).unwrap();
        let obj = Objective::custom("parabola", 1, (0.0, 36.0), move |x| (x[0] - best).powi(2)).unwrap();
        let mut last = f64::INFINITY;
        for alpha in [1.0, 10.0, 100.0, 1000.0] {
            let dist = (consensus_point(&cloud, &obj, alpha).unwrap()[0] - best).abs();
            prop_assert!(dist <= last + 1e-12, "alpha {}: {} after {}", alpha, dist, last);
            last = dist;
        }
        // second-best cost exceeds the best by at least 0.05^2
        let bound = offsets.len() as f64 * (-1000.0 * 0.0025f64).exp() * 3.0;
        prop_assert!(last <= bound + 1e-12);
    }

    #[test]
    fn consensus_is_continuous_under_perturbation(
        data in vec(-3.0f64..3.0, 2 * 40),
        dirs in vec(-1.0f64..1.0, 2 * 40),
    ) {
        let obj = ackley(2, &[0.0, 0.0]).unwrap();
        let base = Cloud::new(2, data.clone()).unwrap();
        let c0 = consensus_point(&base, &obj, 30.0).unwrap();
        let mut last = f64::INFINITY;
        for eps in [1e-2, 1e-3, 1e-4] {
            let moved: Vec<f64> = data
                .chunks_exact(2)
                .zip(dirs.chunks_exact(2))
                .flat_map(|(x, u)| {
                    let norm = (u[0] * u[0] + u[1] * u[1]).sqrt().max(1e-12);
                    let s = eps / norm.max(1.0);
                    [x[0] + s * u[0], x[1] + s * u[1]]
                })
                .collect();
            let c = consensus_point(&Cloud::new(2, moved).unwrap(), &obj, 30.0).unwrap();
            let gap = ((c[0] - c0[0]).powi(2) + (c[1] - c0[1]).powi(2)).sqrt();
            prop_assert!(gap < last || gap == 0.0, "eps {}: {} after {}", eps, gap, last);
            last = gap;
        }
    }

    #[test]
    fn jensen_fourth_moment_bound((d, data) in cloud_strategy(40), alpha in 0.0f64..30.0) {
        let cloud = Cloud::new(d, data).unwrap();
        let obj = ackley(d, &vec![0.0; d]).unwrap();
        let xa = consensus_point(&cloud, &obj, alpha).unwrap();
        let n = cloud.len() as f64;
        let lhs = cloud.points().map(|p| p.iter().zip(&xa).map(|(a, b)| (b - a).powi(2)).sum::<f64>().powi(2)).sum::<f64>() / n;
        let m4 = cloud.points().map(|p| p.iter().map(|v| v * v).sum::<f64>().powi(2)).sum::<f64>() / n;
        prop_assert!(lhs <= 16.0 * c_alpha(&obj, alpha).unwrap() * m4);
    }

    #[test]
    fn wasserstein_is_a_metric(seed_len in 1usize..40, a in scalars(40), b in scalars(40), c in scalars(40)) {
        let n = seed_len.min(a.len()).min(b.len()).min(c.len());
        let (a, b, c) = (
            Cloud::from_scalars(&a[..n]).unwrap(),
            Cloud::from_scalars(&b[..n]).unwrap(),
            Cloud::from_scalars(&c[..n]).unwrap(),
        );
        let ab = wasserstein2_1d(&a, &b).unwrap();
        prop_assert_eq!(wasserstein2_1d(&a, &a).unwrap(), 0.0);
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - wasserstein2_1d(&b, &a).unwrap()).abs() <= 1e-12);
        let ac = wasserstein2_1d(&a, &c).unwrap();
        let bc = wasserstein2_1d(&b, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12);
    }

    #[test]
    fn wasserstein_is_dominated_by_any_pairing(a in scalars(60), b in scalars(60)) {
        let n = a.len().min(b.len());
        let (a, b) = (Cloud::from_scalars(&a[..n]).unwrap(), Cloud::from_scalars(&b[..n]).unwrap());
        let w = wasserstein2_1d(&a, &b).unwrap();
        prop_assert!(w * w <= paired_msq_gap(&a, &b).unwrap() * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn kl_is_nonnegative(a in scalars(60), b in scalars(60), bins in 2usize..40) {
        let kl = kl_histogram(&Cloud::from_scalars(&a).unwrap(), &Cloud::from_scalars(&b).unwrap(), bins).unwrap();
        prop_assert!(kl >= 0.0 && kl.is_finite());
    }

    #[test]
    fn config_round_trip(
        dim in 1usize..4,
        n in 1usize..5000,
        dt in 1e-4f64..0.1,
        t in 0.1f64..10.0,
        alpha in 0.0f64..100.0,
        m in proptest::option::of(1e-3f64..1.0),
        seed in any::<u64>(),
        ladder in proptest::option::of(vec(1e-3f64..0.5, 1..6)),
        uniform in any::<bool>(),
    ) {
        let init = if uniform { "uniform(-3,3)" } else { "gaussian(0,1)" };
        let mut text = format!("objective = ackley\ndim = {dim}\nN = {n}\ndt = {dt}\nT = {t}\nalpha = {alpha}\ninit = {init}\nseed = {seed}\n");
        if let Some(m) = m {
            text.push_str(&format!("m = {m}\n"));
        }
        if let Some(l) = ladder {
            let l: Vec<String> = l.iter().map(|v| v.to_string()).collect();
            text.push_str(&format!("m_ladder = {}\n", l.join(",")));
        }
        let parsed = RunConfig::parse(&text).unwrap();
        let again = RunConfig::parse(&parsed.serialize()).unwrap();
        prop_assert_eq!(&parsed, &again);
        prop_assert_eq!(parsed.serialize(), again.serialize());
    }
}

fn base_params(particles: usize, horizon: f64) -> Params {
    Params {
        m: 0.1,
        lambda: 1.0,
        sigma: 1.0 / 3f64.sqrt(),
        alpha: 30.0,
        dt: 0.01,
        horizon,
        particles,
        dim: 1,
        memory: None,
    }
}

const GAUSSIAN: InitDistribution = InitDistribution::Gaussian {
    mean: 0.0,
    var: 1.0,
};

/// `(replicate, step, channel, variate bits)` per request.
type StepLog = Vec<(usize, usize, usize, Vec<u64>)>;

/// Wraps a tape and logs every step request with the variates it returned.
struct Recording<'a> {
    inner: &'a NoiseTape,
    log: Mutex<StepLog>,
}

impl<'a> Recording<'a> {
    fn new(inner: &'a NoiseTape) -> Self {
        Self {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }
}

impl NoiseSource for Recording<'_> {
    fn layout(&self) -> NoiseLayout {
        self.inner.layout()
    }

    fn theta(&self, r: usize, i: usize, n: usize, k: usize, ch: usize) -> Result<f64> {
        self.inner.theta(r, i, n, k, ch)
    }

    fn fill_step(&self, r: usize, n: usize, ch: usize, out: &mut [f64]) -> Result<()> {
        self.inner.fill_step(r, n, ch, out)?;
        let bits = out.iter().map(|v| v.to_bits()).collect();
        self.log.lock().unwrap().push((r, n, ch, bits));
        Ok(())
    }
}

#[test]
fn coupled_schemes_consume_identical_noise() {
    let p = base_params(50, 0.5);
    let obj = ackley(1, &[0.0]).unwrap();
    let tape = NoiseTape::new(9, layout_for(Scheme::Pso, &p, 2)).unwrap();
    for r in 0..2 {
        let pso = Recording::new(&tape);
        let cbo = Recording::new(&tape);
        run(
            Scheme::Pso,
            &p,
            &obj,
            &pso,
            r,
            initial_state(Scheme::Pso, &p, GAUSSIAN, None, 9, r).unwrap(),
            &SnapshotSchedule::None,
        )
        .unwrap();
        run(
            Scheme::Cbo,
            &p,
            &obj,
            &cbo,
            r,
            initial_state(Scheme::Cbo, &p, GAUSSIAN, None, 9, r).unwrap(),
            &SnapshotSchedule::None,
        )
        .unwrap();
        let (a, b) = (pso.log.into_inner().unwrap(), cbo.log.into_inner().unwrap());
        assert_eq!(a.len(), p.steps());
        assert_eq!(a, b);
    }

    let mut mp = base_params(50, 0.5);
    mp.memory = Some(MemoryParams {
        lambda1: 1.0,
        lambda2: 1.0,
        sigma1: 0.5,
        sigma2: 0.5,
        nu: 0.5,
        beta: 30.0,
    });
    let tape = NoiseTape::new(9, layout_for(Scheme::PsoMemory, &mp, 1)).unwrap();
    let pso = Recording::new(&tape);
    let cbo = Recording::new(&tape);
    run(
        Scheme::PsoMemory,
        &mp,
        &obj,
        &pso,
        0,
        initial_state(Scheme::PsoMemory, &mp, GAUSSIAN, None, 9, 0).unwrap(),
        &SnapshotSchedule::None,
    )
    .unwrap();
    run(
        Scheme::CboMemory,
        &mp,
        &obj,
        &cbo,
        0,
        initial_state(Scheme::CboMemory, &mp, GAUSSIAN, None, 9, 0).unwrap(),
        &SnapshotSchedule::None,
    )
    .unwrap();
    assert_eq!(pso.log.into_inner().unwrap(), cbo.log.into_inner().unwrap());
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn runs_are_bit_identical_across_thread_counts() {
    let p = base_params(300, 0.3);
    let obj = ackley(1, &[0.0]).unwrap();
    let tape = NoiseTape::new(5, layout_for(Scheme::Pso, &p, 1)).unwrap();
    let go = || {
        let init = initial_state(Scheme::Pso, &p, GAUSSIAN, None, 5, 0).unwrap();
        run(
            Scheme::Pso,
            &p,
            &obj,
            &tape,
            0,
            init,
            &SnapshotSchedule::EveryStep,
        )
        .unwrap()
    };
    let reference = in_pool(1, go);
    for threads in [2, 4, 8] {
        let other = in_pool(threads, go);
        let bits = |r: &swarm_limit::dynamics::RunRecord| -> Vec<u64> {
            r.snapshots
                .iter()
                .flat_map(|s| s.x.iter().chain(s.v.as_ref().unwrap()))
                .map(|v| v.to_bits())
                .collect()
        };
        assert_eq!(bits(&reference), bits(&other), "{threads} threads");
    }
}

fn study(pair: SchemePair, base: Params, ladder: &[f64], replicates: usize) -> LimitStudyConfig {
    LimitStudyConfig {
        m_ladder: ladder.to_vec(),
        replicates,
        base,
        scheme_pair: pair,
        init: GAUSSIAN,
        initial_velocity: None,
        track_distributions: false,
        bins: None,
    }
}

#[test]
fn study_is_identical_across_thread_counts() {
    let obj = ackley(1, &[0.0]).unwrap();
    let cfg = study(SchemePair::Plain, base_params(100, 0.5), &[0.2, 0.05], 3);
    let a = in_pool(1, || zero_inertia_study(&cfg, &obj, 4).unwrap());
    let b = in_pool(4, || zero_inertia_study(&cfg, &obj, 4).unwrap());
    assert_eq!(a, b);
}

#[test]
fn split_ladder_reproduces_each_cell() {
    let obj = ackley(1, &[0.0]).unwrap();
    let whole = zero_inertia_study(
        &study(
            SchemePair::Plain,
            base_params(100, 0.5),
            &[0.2, 0.1, 0.05],
            3,
        ),
        &obj,
        8,
    )
    .unwrap();
    let first = zero_inertia_study(
        &study(SchemePair::Plain, base_params(100, 0.5), &[0.2], 3),
        &obj,
        8,
    )
    .unwrap();
    let rest = zero_inertia_study(
        &study(SchemePair::Plain, base_params(100, 0.5), &[0.1, 0.05], 3),
        &obj,
        8,
    )
    .unwrap();
    let split: Vec<_> = first
        .rows
        .iter()
        .chain(&rest.rows)
        .map(|r| (r.m, r.sup_gaps.clone()))
        .collect();
    let joined: Vec<_> = whole
        .rows
        .iter()
        .map(|r| (r.m, r.sup_gaps.clone()))
        .collect();
    assert_eq!(split, joined);
}

#[test]
fn semi_implicit_scheme_stays_bounded_at_tiny_inertia() {
    let obj = ackley(1, &[0.0]).unwrap();
    for m in [1e-1, 1e-2, 1e-3] {
        let p = base_params(200, 1.0).with_m(m);
        let tape = NoiseTape::new(2, layout_for(Scheme::Pso, &p, 1)).unwrap();
        let init = initial_state(Scheme::Pso, &p, GAUSSIAN, None, 2, 0).unwrap();
        let rec = run(
            Scheme::Pso,
            &p,
            &obj,
            &tape,
            0,
            init,
            &SnapshotSchedule::None,
        )
        .unwrap();
        let worst = rec.x_moments.iter().map(|m| m.m4).fold(0.0, f64::max);
        assert!(
            worst <= 10.0 * rec.x_moments[0].m4,
            "m = {m}: fourth moment {worst}"
        );
    }
}

#[test]
fn degenerate_memory_study_orders_like_plain_study() {
    let obj = ackley(1, &[0.0]).unwrap();
    let ladder = [0.2, 0.1, 0.05, 0.025];
    let plain_base = base_params(200, 1.0);
    let mut mem_base = plain_base.clone();
    mem_base.memory = Some(MemoryParams {
        lambda1: plain_base.lambda / 2.0,
        lambda2: plain_base.lambda / 2.0,
        sigma1: plain_base.sigma / 2f64.sqrt(),
        sigma2: plain_base.sigma / 2f64.sqrt(),
        nu: 0.0,
        beta: 30.0,
    });
    let plain =
        zero_inertia_study(&study(SchemePair::Plain, plain_base, &ladder, 4), &obj, 21).unwrap();
    let memory =
        zero_inertia_study(&study(SchemePair::Memory, mem_base, &ladder, 4), &obj, 21).unwrap();
    let order = |rows: &[swarm_limit::experiments::StudyRow]| {
        let mut idx: Vec<usize> = (0..rows.len()).collect();
        idx.sort_by(|&a, &b| rows[a].mean.total_cmp(&rows[b].mean));
        idx
    };
    assert_eq!(order(&plain.rows), order(&memory.rows));
    assert_eq!(order(&plain.rows), vec![3, 2, 1, 0]);
}
