//! Flat `key = value` run configuration and CSV formatting helpers.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown or repeated
//! keys are rejected, as are missing required keys (named in the error).
//!
//! ```text
//! scheme = pso
//! objective = ackley
//! dim = 1
//! N = 10000
//! dt = 0.01
//! T = 1
//! m = 0.1
//! lambda = 1
//! sigma = 0.5773502691896258
//! alpha = 30
//! init = gaussian(0,1)
//! seed = 42
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::dynamics::{MemoryParams, Params, Scheme};
use crate::error::{Error, Result};
use crate::noise::InitDistribution;
use crate::objectives::{by_name, Objective};

/// Version tag written as the first line of every CSV file.
pub const SCHEMA_VERSION: &str = "v1";

const REQUIRED: &[&str] = &["objective", "dim", "N", "dt", "T", "alpha", "init", "seed"];
const OPTIONAL: &[&str] = &[
    "scheme",
    "shift",
    "m",
    "lambda",
    "sigma",
    "lambda1",
    "lambda2",
    "sigma1",
    "sigma2",
    "nu",
    "beta",
    "replicates",
    "out_path",
    "m_ladder",
    "snapshot_times",
    "bins",
    "v0",
    "alphas",
];
const MEMORY_KEYS: &[&str] = &["lambda1", "lambda2", "sigma1", "sigma2", "nu", "beta"];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scheme: Option<Scheme>,
    pub objective: String,
    pub dim: usize,
    pub shift: Option<Vec<f64>>,
    pub particles: usize,
    pub dt: f64,
    pub horizon: f64,
    pub m: Option<f64>,
    pub lambda: Option<f64>,
    pub sigma: Option<f64>,
    pub alpha: f64,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
    pub nu: Option<f64>,
    pub beta: Option<f64>,
    pub init: InitDistribution,
    /// Initial velocity distribution; zero velocities when absent.
    pub v0: Option<InitDistribution>,
    pub seed: u64,
    pub replicates: Option<usize>,
    pub out_path: Option<PathBuf>,
    pub m_ladder: Option<Vec<f64>>,
    pub snapshot_times: Option<Vec<f64>>,
    pub bins: Option<usize>,
    pub alphas: Option<Vec<f64>>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_num<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| config_err(format!("key '{key}': cannot parse '{raw}'")))
}

/// Comma-separated floats, as used by `shift`, `m_ladder` and the CLI lists.
pub fn parse_list(key: &str, raw: &str) -> Result<Vec<f64>> {
    let out: Vec<f64> = raw
        .split(',')
        .map(|s| parse_num::<f64>(key, s))
        .collect::<Result<_>>()?;
    if out.iter().any(|v| !v.is_finite()) {
        return Err(config_err(format!("key '{key}': values must be finite")));
    }
    Ok(out)
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<&str, &str> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            if !REQUIRED.contains(&key) && !OPTIONAL.contains(&key) {
                return Err(config_err(format!("unknown key '{key}'")));
            }
            if entries.insert(key, value.trim()).is_some() {
                return Err(config_err(format!("duplicate key '{key}'")));
            }
        }
        if let Some(missing) = REQUIRED.iter().find(|k| !entries.contains_key(*k)) {
            return Err(config_err(format!("missing required key '{missing}'")));
        }

        let get = |k: &str| entries.get(k).copied();
        let opt_f64 = |k: &str| get(k).map(|v| parse_num::<f64>(k, v)).transpose();
        let opt_list = |k: &str| get(k).map(|v| parse_list(k, v)).transpose();
        let distribution = |k: &str, v: &str| {
            v.parse::<InitDistribution>()
                .map_err(|e| config_err(format!("key '{k}': {e}")))
        };

        let cfg = RunConfig {
            scheme: get("scheme")
                .map(|v| v.parse::<Scheme>().map_err(|e| config_err(e.to_string())))
                .transpose()?,
            objective: get("objective").unwrap_or_default().to_string(),
            dim: parse_num("dim", get("dim").unwrap_or_default())?,
            shift: opt_list("shift")?,
            particles: parse_num("N", get("N").unwrap_or_default())?,
            dt: parse_num("dt", get("dt").unwrap_or_default())?,
            horizon: parse_num("T", get("T").unwrap_or_default())?,
            m: opt_f64("m")?,
            lambda: opt_f64("lambda")?,
            sigma: opt_f64("sigma")?,
            alpha: parse_num("alpha", get("alpha").unwrap_or_default())?,
            lambda1: opt_f64("lambda1")?,
            lambda2: opt_f64("lambda2")?,
            sigma1: opt_f64("sigma1")?,
            sigma2: opt_f64("sigma2")?,
            nu: opt_f64("nu")?,
            beta: opt_f64("beta")?,
            init: distribution("init", get("init").unwrap_or_default())?,
            v0: get("v0").map(|v| distribution("v0", v)).transpose()?,
            seed: parse_num("seed", get("seed").unwrap_or_default())?,
            replicates: get("replicates")
                .map(|v| parse_num("replicates", v))
                .transpose()?,
            out_path: get("out_path").map(PathBuf::from),
            m_ladder: opt_list("m_ladder")?,
            snapshot_times: opt_list("snapshot_times")?,
            bins: get("bins").map(|v| parse_num("bins", v)).transpose()?,
            alphas: opt_list("alphas")?,
        };
        let memory_given = MEMORY_KEYS
            .iter()
            .filter(|k| entries.contains_key(*k))
            .count();
        if memory_given > 0 && memory_given < MEMORY_KEYS.len() {
            let missing = MEMORY_KEYS
                .iter()
                .find(|k| !entries.contains_key(*k))
                .unwrap();
            return Err(config_err(format!("missing required key '{missing}'")));
        }
        Ok(cfg)
    }

    /// Canonical text form; `parse(serialize(c)) == c` for every accepted config.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        if let Some(s) = self.scheme {
            put("scheme", s.to_string());
        }
        put("objective", self.objective.clone());
        put("dim", self.dim.to_string());
        if let Some(s) = &self.shift {
            put("shift", join(s));
        }
        put("N", self.particles.to_string());
        put("dt", self.dt.to_string());
        put("T", self.horizon.to_string());
        let scalars = [
            ("m", self.m),
            ("lambda", self.lambda),
            ("sigma", self.sigma),
            ("alpha", Some(self.alpha)),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("sigma1", self.sigma1),
            ("sigma2", self.sigma2),
            ("nu", self.nu),
            ("beta", self.beta),
        ];
        for (k, v) in scalars {
            if let Some(v) = v {
                put(k, v.to_string());
            }
        }
        put("init", self.init.to_string());
        if let Some(v0) = self.v0 {
            put("v0", v0.to_string());
        }
        put("seed", self.seed.to_string());
        if let Some(r) = self.replicates {
            put("replicates", r.to_string());
        }
        if let Some(p) = &self.out_path {
            put("out_path", p.display().to_string());
        }
        for (k, v) in [
            ("m_ladder", &self.m_ladder),
            ("snapshot_times", &self.snapshot_times),
            ("alphas", &self.alphas),
        ] {
            if let Some(v) = v {
                put(k, join(v));
            }
        }
        if let Some(b) = self.bins {
            put("bins", b.to_string());
        }
        out
    }

    pub fn objective(&self) -> Result<Objective> {
        by_name(&self.objective, self.dim, self.shift.as_deref())
    }

    pub fn memory(&self) -> Option<MemoryParams> {
        Some(MemoryParams {
            lambda1: self.lambda1?,
            lambda2: self.lambda2?,
            sigma1: self.sigma1?,
            sigma2: self.sigma2?,
            nu: self.nu?,
            beta: self.beta?,
        })
    }

    /// Parameters for `scheme` with inertia `m` (falls back to the `m` key).
    pub fn params(&self, scheme: Scheme, m: Option<f64>) -> Result<Params> {
        let require = |k: &str, v: Option<f64>| {
            v.ok_or_else(|| config_err(format!("missing required key '{k}'")))
        };
        let memory = if scheme.has_memory() {
            Some(
                self.memory()
                    .ok_or_else(|| config_err("missing required key 'lambda1'"))?,
            )
        } else {
            None
        };
        let (lambda, sigma) = if scheme.has_memory() {
            (self.lambda.unwrap_or(0.0), self.sigma.unwrap_or(0.0))
        } else {
            (
                require("lambda", self.lambda)?,
                require("sigma", self.sigma)?,
            )
        };
        let m = match m.or(self.m) {
            Some(m) => m,
            None if scheme.has_velocity() => return Err(config_err("missing required key 'm'")),
            None => 1.0,
        };
        let p = Params {
            m,
            lambda,
            sigma,
            alpha: self.alpha,
            dt: self.dt,
            horizon: self.horizon,
            particles: self.particles,
            dim: self.dim,
            memory,
        };
        p.validate().map_err(|e| config_err(e.to_string()))?;
        Ok(p)
    }
}

/// Fixed 17-significant-digit rendering used for every CSV float.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}
