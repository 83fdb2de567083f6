//! Geometry primitives shared by every simulation: points, the simulation
//! domain (open box or torus), model parameters and the normalized
//! transmission range.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A location in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn origin(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DomainKind {
    /// Open cube `[-side/2, side/2]^d` standing in for `R^d`; nodes may leave it.
    Box { side: f64 },
    /// Flat torus `[0, side)^d`.
    Torus { side: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimDomain {
    pub dim: usize,
    pub kind: DomainKind,
}

impl SimDomain {
    pub fn new_box(dim: usize, side: f64) -> Result<Self> {
        Self::validated(dim, DomainKind::Box { side })
    }

    pub fn new_torus(dim: usize, side: f64) -> Result<Self> {
        Self::validated(dim, DomainKind::Torus { side })
    }

    /// Torus of volume `n / lambda`, holding `n` nodes in expectation.
    pub fn torus_for_nodes(dim: usize, n: f64, lambda: f64) -> Result<Self> {
        if !(n > 0.0) || !(lambda > 0.0) {
            return Err(invalid(format!(
                "torus needs n > 0 and lambda > 0 (got n = {n}, lambda = {lambda})"
            )));
        }
        Self::new_torus(dim, (n / lambda).powf(1.0 / dim as f64))
    }

    fn validated(dim: usize, kind: DomainKind) -> Result<Self> {
        if dim < 1 {
            return Err(Error::InvalidDimension(dim));
        }
        let side = match kind {
            DomainKind::Box { side } | DomainKind::Torus { side } => side,
        };
        if !(side > 0.0) || !side.is_finite() {
            return Err(invalid(format!("domain side must be positive and finite, got {side}")));
        }
        Ok(SimDomain { dim, kind })
    }

    pub fn side(&self) -> f64 {
        match self.kind {
            DomainKind::Box { side } | DomainKind::Torus { side } => side,
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.kind, DomainKind::Torus { .. })
    }

    pub fn volume(&self) -> f64 {
        self.side().powi(self.dim as i32)
    }

    /// Lower corner of the sampling region.
    pub fn lower(&self) -> f64 {
        match self.kind {
            DomainKind::Box { side } => -side / 2.0,
            DomainKind::Torus { .. } => 0.0,
        }
    }

    /// Geometric center of the sampling region.
    pub fn center(&self) -> Point {
        Point(vec![self.lower() + self.side() / 2.0; self.dim])
    }

    /// Squared distance under the domain metric.
    #[inline]
    pub fn sq_dist(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            DomainKind::Box { .. } => sq_dist(a, b),
            DomainKind::Torus { side } => torus_sq_dist(a, b, side),
        }
    }

    /// `b - a`, taking the shortest representative on a torus.
    pub fn displacement(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let side = self.side();
        a.iter()
            .zip(b)
            .map(|(x, y)| {
                let diff = y - x;
                if self.is_torus() {
                    diff - side * (diff / side).round()
                } else {
                    diff
                }
            })
            .collect()
    }

    /// Reduces each coordinate in place onto the canonical torus cell; no-op on a box.
    #[inline]
    pub fn wrap_in_place(&self, coords: &mut [f64]) {
        if let DomainKind::Torus { side } = self.kind {
            for c in coords {
                *c = wrap_coord(*c, side);
            }
        }
    }
}

#[inline]
fn wrap_coord(c: f64, side: f64) -> f64 {
    let w = c.rem_euclid(side);
    // rem_euclid can round up to exactly `side` for tiny negative inputs
    if w >= side {
        0.0
    } else {
        w
    }
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn torus_sq_dist(a: &[f64], b: &[f64], side: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let mut diff = (x - y).abs();
            if diff > side / 2.0 {
                diff = side - diff;
            }
            diff * diff
        })
        .sum()
}

/// Wraps `p` onto the canonical torus cell `[0, side)^d`; box domains return `p` unchanged.
pub fn torus_wrap(p: &Point, domain: &SimDomain) -> Point {
    let mut out = p.clone();
    domain.wrap_in_place(&mut out.0);
    out
}

/// Distance between `p` and `q` under the domain metric.
pub fn torus_distance(p: &Point, q: &Point, domain: &SimDomain) -> f64 {
    domain.sq_dist(&p.0, &q.0).sqrt()
}

/// `Gamma(d/2 + 1)` for integer `d`, by exact recurrence from `Gamma(1)` or `Gamma(1/2)`.
fn gamma_half_integer(d: usize) -> f64 {
    let (mut x, mut g) = if d.is_multiple_of(2) { (1.0, 1.0) } else { (0.5, PI.sqrt()) };
    let target = d as f64 / 2.0 + 1.0;
    while x < target - 0.25 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Volume of the `d`-dimensional ball of the given radius.
pub fn ball_volume(dim: usize, radius: f64) -> f64 {
    PI.powf(dim as f64 / 2.0) * radius.powi(dim as i32) / gamma_half_integer(dim)
}

/// Surface area of the unit sphere in `R^d` (`2 pi^{d/2} / Gamma(d/2)`).
pub fn unit_sphere_area(dim: usize) -> f64 {
    dim as f64 * ball_volume(dim, 1.0)
}

/// Transmission range `r(d)`: the radius of the unit-volume ball.
pub fn derive_range(dim: usize) -> Result<f64> {
    if dim < 1 {
        return Err(Error::InvalidDimension(dim));
    }
    Ok((gamma_half_integer(dim) / PI.powf(dim as f64 / 2.0)).powf(1.0 / dim as f64))
}

/// Intensity, mobility and dimension of a mobile geometric graph. The range is
/// always derived, never configured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    pub dim: usize,
    pub lambda: f64,
    pub s: f64,
    pub r: f64,
}

impl ModelParams {
    pub fn new(dim: usize, lambda: f64, s: f64) -> Result<Self> {
        let r = derive_range(dim)?;
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidIntensity(lambda));
        }
        if !(s >= 0.0) || !s.is_finite() {
            return Err(invalid(format!("mobility s must be finite and >= 0, got {s}")));
        }
        Ok(ModelParams { dim, lambda, s, r })
    }
}
