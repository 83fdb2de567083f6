//! Poisson Chernoff and Gaussian tail bounds, with exact tails to compare against.

use serde::Serialize;
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Upper,
    Lower,
}

/// `P[P >= (1+eps) lambda] <= exp(-lambda eps^2 (1 - eps/3) / 2)` and
/// `P[P <= (1-eps) lambda] <= exp(-lambda eps^2 / 2)`.
pub fn poisson_chernoff(lambda: f64, eps: f64, side: Side) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("eps must lie in (0, 1), got {eps}")));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    Ok(match side {
        Side::Upper => (-lambda * eps * eps * (1.0 - eps / 3.0) / 2.0).exp(),
        Side::Lower => (-lambda * eps * eps / 2.0).exp(),
    })
}

/// `P[N(0, sigma^2) >= x] <= sigma / (sqrt(2 pi) x) exp(-x^2 / (2 sigma^2))`.
pub fn normal_tail_bound(sigma: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(invalid(format!("x must be positive, got {x}")));
    }
    if !(sigma > 0.0) {
        return Err(invalid(format!("sigma must be positive, got {sigma}")));
    }
    Ok(sigma / ((2.0 * std::f64::consts::PI).sqrt() * x) * (-x * x / (2.0 * sigma * sigma)).exp())
}

/// Exact `P[N(0, sigma^2) >= x]`.
pub fn normal_tail_exact(sigma: f64, x: f64) -> f64 {
    0.5 * erfc(x / (sigma * std::f64::consts::SQRT_2))
}

fn poisson_ln_pmf(lambda: f64, k: u64) -> f64 {
    k as f64 * lambda.ln() - lambda - ln_gamma(k as f64 + 1.0)
}

/// Exact `P[Poisson(lambda) >= k]` by summing the mass function.
pub fn poisson_upper_tail(lambda: f64, k: u64) -> f64 {
    let stop = (lambda + 40.0 * lambda.sqrt() + 60.0).ceil() as u64;
    (k..=stop.max(k)).map(|j| poisson_ln_pmf(lambda, j).exp()).sum::<f64>().min(1.0)
}

/// Exact `P[Poisson(lambda) <= k]` by summing the mass function.
pub fn poisson_lower_tail(lambda: f64, k: u64) -> f64 {
    (0..=k).map(|j| poisson_ln_pmf(lambda, j).exp()).sum::<f64>().min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub kind: String,
    pub params: String,
    pub bound: f64,
    pub exact: f64,
    pub holds: bool,
}

/// Bounds and exact tails over `lambda in {10, 100, 1000}` x `eps in {0.05, 0.2, 0.5}`
/// (both sides) and `x / sigma in {0.5, 1, 2, 4}`.
pub fn bounds_table() -> Vec<BoundRow> {
    let mut rows = Vec::new();
    for lambda in [10.0f64, 100.0, 1000.0] {
        for eps in [0.05f64, 0.2, 0.5] {
            let upper_k = ((1.0 + eps) * lambda).ceil() as u64;
            let exact = poisson_upper_tail(lambda, upper_k);
            let bound = poisson_chernoff(lambda, eps, Side::Upper).expect("valid grid");
            rows.push(BoundRow {
                kind: "poisson-upper".into(),
                params: format!("lambda={lambda} eps={eps}"),
                bound,
                exact,
                holds: exact <= bound,
            });
            let lower_k = ((1.0 - eps) * lambda).floor() as u64;
            let exact = poisson_lower_tail(lambda, lower_k);
            let bound = poisson_chernoff(lambda, eps, Side::Lower).expect("valid grid");
            rows.push(BoundRow {
                kind: "poisson-lower".into(),
                params: format!("lambda={lambda} eps={eps}"),
                bound,
                exact,
                holds: exact <= bound,
            });
        }
    }
    for sigma in [1.0, 2.5] {
        for ratio in [0.5, 1.0, 2.0, 4.0] {
            let x = ratio * sigma;
            let bound = normal_tail_bound(sigma, x).expect("valid grid");
            let exact = normal_tail_exact(sigma, x);
            rows.push(BoundRow {
                kind: "normal".into(),
                params: format!("sigma={sigma} x={x}"),
                bound,
                exact,
                holds: exact <= bound,
            });
        }
    }
    rows
}
