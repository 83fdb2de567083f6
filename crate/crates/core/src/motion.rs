//! Brownian node motion observed at integer steps, target trajectories,
//! the transition density and mass transport of intensity fields.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::{Point, SimDomain};
use crate::error::{invalid, Error, Result};
use crate::point_process::{IntensityField, NodeEnsemble, Region};
use crate::quadrature::integrate_box;

/// Gaussian tails beyond this many standard deviations are ignored by quadrature.
pub const TRUNCATION_SIGMAS: f64 = 8.0;
pub const QUADRATURE_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MotionModel {
    Stationary,
    Brownian { s: f64 },
    /// Brownian motion plus a per-node constant drift of length `gamma` in a
    /// uniformly random direction.
    BrownianWithDrift { s: f64, gamma: f64 },
}

impl MotionModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MotionModel::Stationary => Ok(()),
            MotionModel::Brownian { s } => check_s(s),
            MotionModel::BrownianWithDrift { s, gamma } => {
                check_s(s)?;
                if !(gamma >= 0.0) || !gamma.is_finite() {
                    return Err(invalid(format!("drift length must be >= 0, got {gamma}")));
                }
                Ok(())
            }
        }
    }

    /// Per-step standard deviation of each coordinate.
    pub fn s(&self) -> f64 {
        match *self {
            MotionModel::Stationary => 0.0,
            MotionModel::Brownian { s } | MotionModel::BrownianWithDrift { s, .. } => s,
        }
    }

    pub fn gamma(&self) -> f64 {
        match *self {
            MotionModel::BrownianWithDrift { gamma, .. } => gamma,
            _ => 0.0,
        }
    }
}

fn check_s(s: f64) -> Result<()> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(invalid(format!("mobility s must be finite and >= 0, got {s}")));
    }
    Ok(())
}

/// Uniform random direction on the unit sphere of `R^dim`.
pub fn random_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 1e-300 {
            return v.into_iter().map(|c| c / n).collect();
        }
    }
}

/// Per-node drift vectors, in ensemble order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Drifts {
    vectors: Vec<f64>,
}

impl Drifts {
    pub fn none() -> Self {
        Drifts::default()
    }

    /// Draws one drift per node for `model`; empty for driftless models.
    pub fn sample<R: Rng + ?Sized>(model: &MotionModel, n: usize, dim: usize, rng: &mut R) -> Self {
        let gamma = match *model {
            MotionModel::BrownianWithDrift { gamma, .. } => gamma,
            _ => return Drifts::none(),
        };
        let mut vectors = Vec::with_capacity(n * dim);
        for _ in 0..n {
            vectors.extend(random_direction(dim, rng).into_iter().map(|c| c * gamma));
        }
        Drifts { vectors }
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, i: usize, dim: usize) -> &[f64] {
        &self.vectors[i * dim..(i + 1) * dim]
    }
}

/// Advances every node of `ens` by one step in place.
pub fn step_in_place<R: Rng + ?Sized>(
    ens: &mut NodeEnsemble,
    model: &MotionModel,
    drifts: &Drifts,
    domain: &SimDomain,
    rng: &mut R,
) -> Result<()> {
    let dim = ens.dim();
    let s = model.s();
    let drifting = !drifts.is_empty();
    if drifting && drifts.vectors.len() != ens.len() * dim {
        return Err(invalid(format!(
            "drift table covers {} nodes, ensemble has {}",
            drifts.vectors.len() / dim.max(1),
            ens.len()
        )));
    }
    if !matches!(model, MotionModel::Stationary) {
        for i in 0..ens.len() {
            let p = ens.position_mut(i);
            for (k, c) in p.iter_mut().enumerate() {
                if s > 0.0 {
                    *c += s * rng.sample::<f64, _>(StandardNormal);
                }
                if drifting {
                    *c += drifts.vectors[i * dim + k];
                }
            }
            domain.wrap_in_place(p);
        }
    }
    ens.timestamp += 1;
    Ok(())
}

/// One observation step: independent Gaussian increments (plus drift), torus wrap,
/// ids kept, timestamp incremented.
pub fn step<R: Rng + ?Sized>(
    ens: &NodeEnsemble,
    model: &MotionModel,
    drifts: &Drifts,
    domain: &SimDomain,
    rng: &mut R,
) -> Result<NodeEnsemble> {
    let mut out = ens.clone();
    step_in_place(&mut out, model, drifts, domain, rng)?;
    Ok(out)
}

/// `f_i(x, y) = (2 pi s^2 i)^{-d/2} exp(-|y - x|^2 / (2 s^2 i))`.
pub fn transition_density(i: u64, x: &Point, y: &Point, s: f64) -> Result<f64> {
    if i == 0 || s <= 0.0 {
        return Err(Error::DegenerateDensity { steps: i, s });
    }
    if x.dim() != y.dim() {
        return Err(invalid("points of different dimension"));
    }
    let var = s * s * i as f64;
    let d = x.dim() as f64;
    let sq = crate::domain::sq_dist(&x.0, &y.0);
    Ok((2.0 * PI * var).powf(-d / 2.0) * (-sq / (2.0 * var)).exp())
}

fn split_points(lo: f64, hi: f64, breaks: &[f64]) -> Vec<f64> {
    let mut pts = vec![lo];
    pts.extend(breaks.iter().copied().filter(|b| *b > lo && *b < hi));
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Mass transport `nu_i(y) = int nu_0(x) f_i(x, y) dx`, evaluated lazily by
/// adaptive quadrature over the part of `nu0`'s box within eight standard
/// deviations of `y`.
pub fn propagate_intensity(nu0: &IntensityField, i: u64, s: f64) -> Result<IntensityField> {
    check_s(s)?;
    if i == 0 || s == 0.0 {
        return Ok(nu0.clone());
    }
    let sigma = s * (i as f64).sqrt();
    let reach = TRUNCATION_SIGMAS * sigma;
    let region = Region {
        lo: nu0.region.lo.iter().map(|a| a - reach).collect(),
        hi: nu0.region.hi.iter().map(|b| b + reach).collect(),
    };
    let src = nu0.clone();
    let dim = region.dim();
    let norm = (2.0 * PI * sigma * sigma).powf(-(dim as f64) / 2.0);
    IntensityField::new(region, nu0.bound, move |y| {
        let axes: Vec<Vec<f64>> = (0..dim)
            .map(|k| {
                let lo = src.region.lo[k].max(y[k] - reach);
                let hi = src.region.hi[k].min(y[k] + reach);
                if lo >= hi {
                    Vec::new()
                } else {
                    split_points(lo, hi, &src.breaks[k])
                }
            })
            .collect();
        if axes.iter().any(|a| a.len() < 2) {
            return 0.0;
        }
        let integrand = |x: &[f64]| {
            let sq = crate::domain::sq_dist(x, y);
            src.eval(x) * norm * (-sq / (2.0 * sigma * sigma)).exp()
        };
        // integrate every sub-box between consecutive breakpoints
        let mut idx = vec![0usize; dim];
        let mut total = 0.0;
        let mut lo = vec![0.0; dim];
        let mut hi = vec![0.0; dim];
        loop {
            for k in 0..dim {
                lo[k] = axes[k][idx[k]];
                hi[k] = axes[k][idx[k] + 1];
            }
            total += integrate_box(integrand, &lo, &hi, QUADRATURE_REL_TOL, 1e-12 * src.bound);
            let mut k = 0;
            loop {
                if k == dim {
                    return total.clamp(0.0, src.bound);
                }
                idx[k] += 1;
                if idx[k] + 1 < axes[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    })
}

/// Target locations `x_0, ..., x_{t-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trajectory(pub Vec<Point>);

impl Trajectory {
    pub fn stationary(start: Point, t: usize) -> Self {
        Trajectory(vec![start; t])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn at(&self, i: usize) -> &[f64] {
        &self.0[i].0
    }

    pub fn dim(&self) -> usize {
        self.0.first().map_or(0, Point::dim)
    }

    /// Largest distance of any point from the first one.
    pub fn spread(&self) -> f64 {
        let x0 = self.at(0);
        self.0.iter().map(|p| crate::domain::sq_dist(&p.0, x0).sqrt()).fold(0.0, f64::max)
    }
}

/// Samples `x_0 = start` followed by `t - 1` increments of `model`.
pub fn sample_target_trajectory<R: Rng + ?Sized>(
    model: &MotionModel,
    t: usize,
    start: &Point,
    rng: &mut R,
) -> Result<Trajectory> {
    if t < 1 {
        return Err(invalid("trajectory length must be at least 1"));
    }
    model.validate()?;
    let dim = start.dim();
    let drift = match *model {
        MotionModel::BrownianWithDrift { gamma, .. } => {
            random_direction(dim, rng).into_iter().map(|c| c * gamma).collect()
        }
        _ => vec![0.0; dim],
    };
    let s = model.s();
    let mut points = Vec::with_capacity(t);
    points.push(start.clone());
    let mut x = start.0.clone();
    for _ in 1..t {
        if !matches!(model, MotionModel::Stationary) {
            for (c, m) in x.iter_mut().zip(&drift) {
                *c += m + s * rng.sample::<f64, _>(StandardNormal);
            }
        }
        points.push(Point(x.clone()));
    }
    Ok(Trajectory(points))
}
