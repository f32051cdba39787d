//! Distributional and moment diagnostics between particle clouds.

use crate::cloud::SampleCloud;
use crate::error::{invalid, Result};

/// Additive smoothing applied to every histogram bin before renormalising.
pub const KL_SMOOTHING: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    /// `(1/N) sum |x_i|^2`
    pub m2: f64,
    /// `(1/N) sum |x_i|^4`
    pub m4: f64,
}

/// Exact 1-d Wasserstein-2 distance between equal-size clouds via order statistics.
pub fn wasserstein2_1d(a: &SampleCloud, b: &SampleCloud) -> Result<f64> {
    if a.dim() != 1 || b.dim() != 1 {
        return Err(invalid("wasserstein2_1d needs one-dimensional clouds"));
    }
    if a.len() != b.len() {
        return Err(invalid(format!(
            "cloud sizes differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mut sa = a.as_slice().to_vec();
    let mut sb = b.as_slice().to_vec();
    sa.sort_unstable_by(f64::total_cmp);
    sb.sort_unstable_by(f64::total_cmp);
    let sum: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((sum / sa.len() as f64).sqrt())
}

/// `(1/N) sum_i |a_i - b_i|^2` over index-matched particles.
pub fn paired_msq_gap(a: &SampleCloud, b: &SampleCloud) -> Result<f64> {
    if a.dim() != b.dim() || a.len() != b.len() {
        return Err(invalid(format!(
            "paired clouds differ in shape: {}x{} vs {}x{}",
            a.len(),
            a.dim(),
            b.len(),
            b.dim()
        )));
    }
    Ok(paired_msq_gap_raw(a.as_slice(), b.as_slice(), a.len()))
}

/// Sum of squared differences of two equally shaped buffers divided by `particles`.
pub(crate) fn paired_msq_gap_raw(a: &[f64], b: &[f64], particles: usize) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / particles as f64
}

/// Default histogram resolution `ceil(sqrt(N))`.
pub fn default_bins(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).max(2)
}

/// KL(a || b) between histograms of two 1-d clouds on shared equal-width
/// bins spanning the union range, with [`KL_SMOOTHING`] added to each bin.
///
/// Returns 0 when every point of both clouds coincides.
pub fn kl_histogram(a: &SampleCloud, b: &SampleCloud, bins: usize) -> Result<f64> {
    if a.dim() != 1 || b.dim() != 1 {
        return Err(invalid("kl_histogram needs one-dimensional clouds"));
    }
    if bins < 2 {
        return Err(invalid(format!("need at least 2 bins, got {bins}")));
    }
    let (lo, hi) = a
        .as_slice()
        .iter()
        .chain(b.as_slice())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !(hi > lo) {
        return Ok(0.0);
    }
    let p = histogram(a.as_slice(), lo, hi, bins);
    let q = histogram(b.as_slice(), lo, hi, bins);
    Ok(kl_from_masses(&p, &q))
}

fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let n = values.len() as f64;
    counts.into_iter().map(|c| c as f64 / n).collect()
}

/// `sum_k p_k ln(p_k / q_k)` after smoothing both mass vectors.
pub fn kl_from_masses(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let norm = 1.0 + KL_SMOOTHING * p.len() as f64;
    let kl: f64 = p
        .iter()
        .zip(q)
        .map(|(&pk, &qk)| {
            let ps = (pk + KL_SMOOTHING) / norm;
            let qs = (qk + KL_SMOOTHING) / norm;
            ps * (ps / qs).ln()
        })
        .sum();
    kl.max(0.0)
}

pub fn empirical_moments(a: &SampleCloud) -> Moments {
    empirical_moments_of(a.as_slice(), a.dim())
}

pub(crate) fn empirical_moments_of(buf: &[f64], dim: usize) -> Moments {
    let n = (buf.len() / dim) as f64;
    let (m2, m4) = buf.chunks_exact(dim).fold((0.0, 0.0), |(s2, s4), x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        (s2 + r2, s4 + r2 * r2)
    });
    Moments {
        m2: m2 / n,
        m4: m4 / n,
    }
}
