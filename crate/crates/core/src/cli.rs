//! Subcommands `run`, `limit-study`, `compare` and `laplace-check`.
//!
//! Exit codes: 0 success, 2 bad configuration or arguments, 3 numerical
//! abort, 4 I/O failure. Failures print one line to stderr:
//! `error kind=<config|numerical|io> msg="..."`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{fmt_f64, parse_list, RunConfig, SCHEMA_VERSION};
use crate::dynamics::{layout_for, run as run_scheme, Scheme, SnapshotSchedule};
use crate::error::{Error, Result};
use crate::experiments::{
    compare_distributions, initial_state, laplace_sweep, zero_inertia_study, LimitStudyConfig,
    SchemePair,
};
use crate::noise::{initial_positions, replicate_seed, NoiseTape};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

const DEFAULT_ALPHAS: &[f64] = &[1.0, 10.0, 100.0, 1000.0];

#[derive(Debug, Parser)]
#[command(
    name = "swarm-limit",
    version,
    about = "Coupled PSO/CBO zero-inertia experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one scheme and write per-step consensus and moments.
    Run(Common),
    /// Sup-in-time paired gap between PSO(m) and CBO across an inertia ladder.
    LimitStudy(Common),
    /// Per-time W2 and KL between coupled PSO(m) and CBO clouds (d = 1).
    Compare(Common),
    /// Laplace functional of the initial cloud for increasing alpha.
    LaplaceCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "a,b,c")]
        alphas: Option<String>,
    },
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long = "m-ladder", value_name = "a,b,c")]
    m_ladder: Option<String>,
    #[arg(long = "snapshot-times", value_name = "t1,t2")]
    snapshot_times: Option<String>,
}

fn kind(err: &Error) -> (&'static str, i32) {
    if err.is_numerical() {
        ("numerical", EXIT_NUMERICAL)
    } else if matches!(err, Error::Io(_)) {
        ("io", EXIT_IO)
    } else {
        ("config", EXIT_CONFIG)
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            let (label, code) = kind(&err);
            eprintln!("error kind={label} msg={:?}", err.to_string());
            code
        }
    }
}

/// Loaded configuration with command-line overrides applied.
struct Prepared {
    cfg: RunConfig,
    out: Option<PathBuf>,
}

fn prepare(common: &Common) -> Result<Prepared> {
    let text = fs::read_to_string(&common.config)?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(r) = common.replicates {
        cfg.replicates = Some(r);
    }
    if let Some(l) = &common.m_ladder {
        cfg.m_ladder = Some(parse_list("--m-ladder", l)?);
    }
    if let Some(t) = &common.snapshot_times {
        cfg.snapshot_times = Some(parse_list("--snapshot-times", t)?);
    }
    let out = common.out.clone().or_else(|| cfg.out_path.clone());
    Ok(Prepared { cfg, out })
}

fn emit(out: Option<&Path>, body: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, body)?,
        None => print!("{body}"),
    }
    Ok(())
}

fn header(buf: &mut String, command: &str, cfg: &RunConfig) {
    let _ = writeln!(buf, "# schema={SCHEMA_VERSION}");
    let _ = writeln!(buf, "# command={command}");
    let _ = writeln!(
        buf,
        "# objective={} dim={} N={} dt={} T={} alpha={}",
        cfg.objective, cfg.dim, cfg.particles, cfg.dt, cfg.horizon, cfg.alpha
    );
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run(common) => cmd_run(&prepare(&common)?),
        Command::LimitStudy(common) => cmd_limit_study(&prepare(&common)?),
        Command::Compare(common) => cmd_compare(&prepare(&common)?),
        Command::LaplaceCheck { common, alphas } => {
            let prepared = prepare(&common)?;
            let alphas = match alphas {
                Some(a) => parse_list("--alphas", &a)?,
                None => prepared
                    .cfg
                    .alphas
                    .clone()
                    .unwrap_or_else(|| DEFAULT_ALPHAS.to_vec()),
            };
            cmd_laplace(&prepared, &alphas)
        }
    }
}

fn cmd_run(prep: &Prepared) -> Result<()> {
    let cfg = &prep.cfg;
    let scheme = cfg
        .scheme
        .ok_or_else(|| config_error("missing required key 'scheme'"))?;
    let p = cfg.params(scheme, None)?;
    let obj = cfg.objective()?;
    let replicates = cfg.replicates.unwrap_or(1).max(1);
    let tape = NoiseTape::new(cfg.seed, layout_for(scheme, &p, replicates))?;

    let mut buf = String::new();
    header(&mut buf, "run", cfg);
    let _ = writeln!(buf, "# scheme={scheme} m={} seed={}", p.m, cfg.seed);
    let consensus_cols: Vec<String> = (1..=p.dim).map(|k| format!("consensus_{k}")).collect();
    let _ = writeln!(
        buf,
        "replicate,step,t,{},m2_x,m4_x,m2_v,m4_v,m2_y,m4_y",
        consensus_cols.join(",")
    );
    for r in 0..replicates {
        let init = initial_state(scheme, &p, cfg.init, cfg.v0, cfg.seed, r)?;
        let rec = run_scheme(scheme, &p, &obj, &tape, r, init, &SnapshotSchedule::None)?;
        for (n, t) in rec.times.iter().enumerate() {
            let cons: Vec<String> = rec.consensus[n].iter().map(|&c| fmt_f64(c)).collect();
            let pair = |m: Option<&Vec<crate::metrics::Moments>>| match m {
                Some(v) => format!("{},{}", fmt_f64(v[n].m2), fmt_f64(v[n].m4)),
                None => ",".to_string(),
            };
            let _ = writeln!(
                buf,
                "{r},{n},{},{},{},{},{}",
                fmt_f64(*t),
                cons.join(","),
                pair(Some(&rec.x_moments)),
                pair(rec.v_moments.as_ref()),
                pair(rec.y_moments.as_ref()),
            );
        }
    }
    emit(prep.out.as_deref(), &buf)
}

fn cmd_limit_study(prep: &Prepared) -> Result<()> {
    let cfg = &prep.cfg;
    let scheme_pair = match cfg.scheme {
        Some(s) if s.has_memory() => SchemePair::Memory,
        _ => SchemePair::Plain,
    };
    let ladder = cfg
        .m_ladder
        .clone()
        .ok_or_else(|| config_error("missing required key 'm_ladder' (or --m-ladder)"))?;
    let base = cfg.params(scheme_pair.limit(), Some(ladder[0]))?;
    let study = LimitStudyConfig {
        m_ladder: ladder,
        replicates: cfg.replicates.unwrap_or(20),
        base,
        scheme_pair,
        init: cfg.init,
        initial_velocity: cfg.v0,
        track_distributions: false,
        bins: cfg.bins,
    };
    let obj = cfg.objective()?;
    let res = zero_inertia_study(&study, &obj, cfg.seed)?;

    let slope = res.slope.map(fmt_f64).unwrap_or_else(|| "NaN".into());
    let mut buf = String::new();
    header(&mut buf, "limit-study", cfg);
    let _ = writeln!(
        buf,
        "# scheme_pair={}/{}",
        scheme_pair.inertial(),
        scheme_pair.limit()
    );
    let _ = writeln!(buf, "# estimator={}", res.estimator.label());
    let _ = writeln!(buf, "# metric={}", res.metric.label());
    let _ = writeln!(
        buf,
        "# slope={} intercept={}",
        slope,
        res.intercept.map(fmt_f64).unwrap_or_else(|| "NaN".into())
    );
    for row in &res.rows {
        let _ = writeln!(
            buf,
            "# m={} mean_sup_gap={} stderr={}",
            fmt_f64(row.m),
            fmt_f64(row.mean),
            fmt_f64(row.stderr)
        );
    }
    let _ = writeln!(buf, "m,replicate,sup_gap,slope_global,seed");
    for row in &res.rows {
        for (r, g) in row.sup_gaps.iter().enumerate() {
            let _ = writeln!(
                buf,
                "{},{r},{},{slope},{}",
                fmt_f64(row.m),
                fmt_f64(*g),
                res.seed
            );
        }
    }
    emit(prep.out.as_deref(), &buf)
}

fn cmd_compare(prep: &Prepared) -> Result<()> {
    let cfg = &prep.cfg;
    let ms = match (&cfg.m_ladder, cfg.m) {
        (Some(l), _) => l.clone(),
        (None, Some(m)) => vec![m],
        (None, None) => return Err(config_error("missing required key 'm' (or --m-ladder)")),
    };
    let obj = cfg.objective()?;
    let mut buf = String::new();
    header(&mut buf, "compare", cfg);
    let _ = writeln!(buf, "# init={}", cfg.init);
    let _ = writeln!(buf, "t,w2,kl,m,seed,bins");
    for m in ms {
        let p = cfg.params(Scheme::Pso, Some(m))?;
        let table = compare_distributions(
            &p,
            &obj,
            cfg.init,
            cfg.seed,
            cfg.snapshot_times.as_deref(),
            cfg.bins,
        )?;
        for row in &table.rows {
            let _ = writeln!(
                buf,
                "{},{},{},{},{},{}",
                fmt_f64(row.t),
                fmt_f64(row.w2),
                fmt_f64(row.kl),
                fmt_f64(table.m),
                table.seed,
                table.bins
            );
        }
    }
    emit(prep.out.as_deref(), &buf)
}

fn cmd_laplace(prep: &Prepared, alphas: &[f64]) -> Result<()> {
    let cfg = &prep.cfg;
    let obj = cfg.objective()?;
    let cloud = initial_positions(
        replicate_seed(cfg.seed, 0),
        cfg.particles,
        cfg.dim,
        cfg.init,
    )?;
    let rows = laplace_sweep(&cloud, &obj, alphas)?;
    let mut buf = String::new();
    header(&mut buf, "laplace-check", cfg);
    let _ = writeln!(buf, "alpha,laplace_value,gap");
    for row in rows {
        let _ = writeln!(
            buf,
            "{},{},{}",
            fmt_f64(row.alpha),
            fmt_f64(row.value),
            fmt_f64(row.gap)
        );
    }
    emit(prep.out.as_deref(), &buf)
}
