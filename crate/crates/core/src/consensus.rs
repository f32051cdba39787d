//! The regularised weighted average ("consensus point") of an empirical
//! measure and the Laplace functional built from the same weights.
//!
//! Both are evaluated with the minimum cost subtracted before exponentiating,
//! so every weight lies in `(0, 1]` and the best particle has weight exactly 1.
//! This is mathematically identical to using `exp(-alpha E(x))` directly but
//! does not underflow for `alpha = 30` and Ackley-sized costs.

use crate::cloud::EmpiricalMeasure;
use crate::error::{invalid, Result};
use crate::objectives::Objective;

/// Weighted average of row-major `points` given their precomputed `costs`.
///
/// Summation runs in index order, so the result is bit-reproducible.
pub fn weighted_average(points: &[f64], costs: &[f64], dim: usize, alpha: f64, out: &mut [f64]) {
    debug_assert_eq!(points.len(), costs.len() * dim);
    debug_assert_eq!(out.len(), dim);
    let min_cost = costs.iter().copied().fold(f64::INFINITY, f64::min);
    out.fill(0.0);
    let mut total = 0.0;
    for (x, &c) in points.chunks_exact(dim).zip(costs) {
        let w = (-alpha * (c - min_cost)).exp();
        total += w;
        for (o, &xk) in out.iter_mut().zip(x) {
            *o += w * xk;
        }
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Consensus point `X^alpha(rho^N)` of `measure` under `obj`.
pub fn consensus_point(
    measure: &EmpiricalMeasure,
    obj: &Objective,
    alpha: f64,
) -> Result<Vec<f64>> {
    check_alpha(alpha, false)?;
    check_dim(measure, obj)?;
    let costs: Vec<f64> = measure.points().map(|x| obj.eval(x)).collect();
    let mut out = vec![0.0; measure.dim()];
    weighted_average(measure.as_slice(), &costs, measure.dim(), alpha, &mut out);
    Ok(out)
}

/// `-(1/alpha) log((1/N) sum_i exp(-alpha E(x_i)))`.
pub fn laplace_value(measure: &EmpiricalMeasure, obj: &Objective, alpha: f64) -> Result<f64> {
    check_alpha(alpha, true)?;
    check_dim(measure, obj)?;
    let costs: Vec<f64> = measure.points().map(|x| obj.eval(x)).collect();
    let min_cost = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let mean_weight = costs
        .iter()
        .map(|&c| (-alpha * (c - min_cost)).exp())
        .sum::<f64>()
        / costs.len() as f64;
    Ok(min_cost - mean_weight.ln() / alpha)
}

fn check_alpha(alpha: f64, strictly_positive: bool) -> Result<()> {
    let ok = if strictly_positive {
        alpha > 0.0
    } else {
        alpha >= 0.0
    };
    if ok && alpha.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("alpha out of range: {alpha}")))
    }
}

fn check_dim(measure: &EmpiricalMeasure, obj: &Objective) -> Result<()> {
    if measure.dim() != obj.dim() {
        return Err(invalid(format!(
            "measure is {}-dimensional, objective is {}-dimensional",
            measure.dim(),
            obj.dim()
        )));
    }
    Ok(())
}
