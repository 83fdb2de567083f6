//! Tessellation diagnostics: dense cells and the tagged node staying near home.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::harness::run_trials;
use crate::point_process::{NodeEnsemble, Region};
use crate::rng::RngPolicy;
use crate::stats::survival::wilson_interval;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenseCellReport {
    /// Cell side after rounding so the box holds a whole number of cells.
    pub ell: f64,
    pub cells_per_axis: usize,
    pub cells: usize,
    pub threshold: f64,
    pub dense: usize,
    pub fraction: f64,
    pub counts: Vec<usize>,
    /// Per-cell Chernoff bound `exp(-xi^2 lambda ell^d / 2)` on a sparse cell.
    pub per_cell_bound: f64,
}

/// Counts nodes per cell of `region` (a cube) and marks cells with at least
/// `(1 - xi) lambda ell^d` nodes as dense.
pub fn dense_cell_diagnostic(ens: &NodeEnsemble, region: &Region, ell: f64, xi: f64, lambda: f64) -> Result<DenseCellReport> {
    if !(ell > 0.0) || !(0.0..=1.0).contains(&xi) || !(lambda >= 0.0) {
        return Err(invalid("dense-cell diagnostic needs ell > 0, xi in [0, 1], lambda >= 0"));
    }
    let dim = region.dim();
    let side = region.hi[0] - region.lo[0];
    let m = ((side / ell).round() as usize).max(1);
    let ell = side / m as f64;
    let cells = m.pow(dim as u32);
    let mut counts = vec![0usize; cells];
    for p in ens.positions() {
        if !region.contains(p) {
            continue;
        }
        let mut key = 0;
        for k in (0..dim).rev() {
            let c = (((p[k] - region.lo[k]) / ell).floor() as usize).min(m - 1);
            key = key * m + c;
        }
        counts[key] += 1;
    }
    let volume = ell.powi(dim as i32);
    let threshold = (1.0 - xi) * lambda * volume;
    let dense = counts.iter().filter(|&&c| c as f64 >= threshold).count();
    Ok(DenseCellReport {
        ell,
        cells_per_axis: m,
        cells,
        threshold,
        dense,
        fraction: dense as f64 / cells as f64,
        counts,
        per_cell_bound: (-xi * xi * lambda * volume / 2.0).exp(),
    })
}

/// `(t L^d / (Delta ell^d)) exp(-xi^2 lambda ell^d / 2)`: union bound on a sparse
/// cell among all cells and observation times.
pub fn sparse_cell_bound(t: f64, l: f64, delta: f64, ell: f64, xi: f64, lambda: f64, dim: usize) -> f64 {
    let d = dim as i32;
    t * l.powi(d) / (delta * ell.powi(d)) * (-xi * xi * lambda * ell.powi(d) / 2.0).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscapeReport {
    pub trials: u64,
    pub stayed: u64,
    pub empirical: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `1 - (t/Delta)(12 d s sqrt(t) / (sqrt(2 pi) L)) exp(-L^2 / (72 s^2 t))`.
    pub analytic_lower: f64,
}

/// Probability that a Brownian node never strays more than `L/6` from its
/// start in any coordinate at the observed steps `0, Delta, 2 Delta, ... <= t`.
pub fn escape_diagnostic(s: f64, l: f64, t: u64, delta: u64, dim: usize, trials: u64, policy: &RngPolicy) -> Result<EscapeReport> {
    if !(l > 0.0) || t == 0 || delta == 0 || trials == 0 || !(s >= 0.0) {
        return Err(invalid("escape diagnostic needs L, t, Delta, trials > 0 and s >= 0"));
    }
    let limit = l / 6.0;
    let outcomes = run_trials(trials, |trial| {
        if s == 0.0 {
            return true;
        }
        let mut rng = policy.stream("escape", trial);
        let mut x = vec![0.0; dim];
        for i in 1..=t {
            for c in x.iter_mut() {
                *c += s * rng.sample::<f64, _>(StandardNormal);
            }
            if i % delta == 0 && x.iter().any(|c| c.abs() > limit) {
                return false;
            }
        }
        true
    });
    let stayed = outcomes.iter().filter(|&&b| b).count() as u64;
    let (ci_low, ci_high) = wilson_interval(stayed, trials, 0.95)?;
    let tf = t as f64;
    let analytic_lower = if s == 0.0 {
        1.0
    } else {
        1.0 - (tf / delta as f64) * (12.0 * dim as f64 * s * tf.sqrt() / ((2.0 * std::f64::consts::PI).sqrt() * l))
            * (-l * l / (72.0 * s * s * tf)).exp()
    };
    Ok(EscapeReport { trials, stayed, empirical: stayed as f64 / trials as f64, ci_low, ci_high, analytic_lower })
}
