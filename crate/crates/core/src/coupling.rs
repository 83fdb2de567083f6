//! Coupling a cell-dense node set at time 0 with a fresh Poisson process at
//! time `Delta` whose nodes are a subset of the moved nodes.

use std::collections::HashSet;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::domain::{sq_dist, unit_sphere_area};
use crate::error::{invalid, Result};
use crate::harness::run_trials;
use crate::point_process::{sample_ppp, IdSource, NodeEnsemble, NodeId, Region};
use crate::rng::{RngPolicy, TrialRng};

/// Ids of the auxiliary process live in their own trial namespace.
const XI_NAMESPACE: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    /// Outer cube side `K`.
    pub k: f64,
    /// Inner cube side `K'`.
    pub k_inner: f64,
    pub ell: f64,
    pub beta: f64,
    pub eps: f64,
    pub delta: u64,
    pub s: f64,
    pub dim: usize,
    #[serde(default = "default_c1")]
    pub c1: f64,
    #[serde(default = "default_c2")]
    pub c2: f64,
}

fn default_c1() -> f64 {
    16.0
}

fn default_c2() -> f64 {
    8.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecInvariants {
    pub delta_floor: f64,
    pub delta_ok: bool,
    pub inner_ceiling: f64,
    pub inner_ok: bool,
}

impl CouplingSpec {
    /// `Delta = ceil(c1 ell^2 / (s^2 eps^2))`.
    pub fn default_delta(ell: f64, s: f64, eps: f64, c1: f64) -> u64 {
        (c1 * ell * ell / (s * s * eps * eps)).ceil() as u64
    }

    pub fn cells_per_axis(&self) -> usize {
        (self.k / self.ell).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.dim < 1 {
            errs.push(format!("dimension must be at least 1, got {}", self.dim));
        }
        if !(self.k > self.k_inner && self.k_inner > 0.0) {
            errs.push(format!("need K > K' > 0 (K = {}, K' = {})", self.k, self.k_inner));
        }
        if !(self.ell > 0.0) || ((self.k / self.ell) - (self.k / self.ell).round()).abs() > 1e-9 {
            errs.push(format!("cell side {} must divide K = {}", self.ell, self.k));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            errs.push(format!("eps must lie in (0, 1), got {}", self.eps));
        }
        if !(self.beta > 0.0) {
            errs.push(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.s > 0.0) || self.delta < 1 {
            errs.push("s and Delta must be positive".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(crate::error::Error::Config(errs))
        }
    }

    /// The `Delta` and `K'` requirements with the configured constants.
    pub fn invariants(&self) -> SpecInvariants {
        let delta_floor = self.c1 * self.ell * self.ell / (self.s * self.s * self.eps * self.eps);
        let inner_ceiling = self.k - self.c2 * self.s * (self.delta as f64 * (1.0 / self.eps).ln()).sqrt();
        SpecInvariants {
            delta_floor,
            delta_ok: self.delta as f64 >= delta_floor,
            inner_ceiling,
            inner_ok: self.k_inner <= inner_ceiling,
        }
    }

    fn sigma(&self) -> f64 {
        self.s * (self.delta as f64).sqrt()
    }

    /// Radius `(K - K')/2` of the displacement ball that keeps sources inside `Q_K`.
    pub fn radius(&self) -> f64 {
        (self.k - self.k_inner) / 2.0
    }
}

/// `g(z) = (2 pi s^2 Delta)^{-d/2} exp(-(|z| + sqrt(d) ell)^2 / (2 s^2 Delta))`.
pub fn g_density(z: &[f64], ell: f64, s: f64, delta: u64, dim: usize) -> f64 {
    g_radial(sq_dist(z, &vec![0.0; z.len()]).sqrt(), ell, s, delta, dim)
}

fn g_radial(rho: f64, ell: f64, s: f64, delta: u64, dim: usize) -> f64 {
    let var = s * s * delta as f64;
    let a = (dim as f64).sqrt() * ell;
    (2.0 * PI * var).powf(-(dim as f64) / 2.0) * (-(rho + a).powi(2) / (2.0 * var)).exp()
}

/// `int_{B_R} g` by adaptive radial quadrature.
pub fn g_ball_integral(radius: f64, ell: f64, s: f64, delta: u64, dim: usize) -> f64 {
    let sigma = s * (delta as f64).sqrt();
    let upper = radius.min(40.0 * sigma);
    let area = unit_sphere_area(dim);
    crate::quadrature::integrate(
        |rho| area * rho.powi(dim as i32 - 1) * g_radial(rho, ell, s, delta, dim),
        0.0,
        upper,
        1e-10,
        1e-300,
    )
}

/// `psi = 1 - int g`.
pub fn psi(ell: f64, s: f64, delta: u64, dim: usize) -> f64 {
    1.0 - g_ball_integral(f64::INFINITY, ell, s, delta, dim)
}

/// Draws a displacement with density `g / (1 - psi)`.
pub fn sample_g<R: Rng + ?Sized>(ell: f64, s: f64, delta: u64, dim: usize, rng: &mut R) -> Vec<f64> {
    let var = s * s * delta as f64;
    let sigma = var.sqrt();
    let a = (dim as f64).sqrt() * ell;
    loop {
        let z: Vec<f64> = (0..dim).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect();
        let rho = sq_dist(&z, &vec![0.0; dim]).sqrt();
        if rng.random::<f64>() < acceptance_ratio(rho, a, var) {
            // the proposal is isotropic, so the accepted direction is uniform
            return z;
        }
    }
}

/// `exp((rho^2 - (rho + a)^2) / (2 var))`.
pub fn acceptance_ratio(rho: f64, a: f64, var: f64) -> f64 {
    ((rho * rho - (rho + a).powi(2)) / (2.0 * var)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiCheck {
    pub integral: f64,
    pub target: f64,
    pub pass: bool,
    pub margin: f64,
}

/// Checks `int_{B_{(K-K')/2}} g >= 1 - eps/2`.
pub fn psi_mass_check(spec: &CouplingSpec) -> PsiCheck {
    let radius = spec.radius().max(0.0);
    let integral = g_ball_integral(radius, spec.ell, spec.s, spec.delta, spec.dim);
    let target = 1.0 - spec.eps / 2.0;
    PsiCheck { integral, target, pass: integral >= target, margin: integral - target }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureBound {
    pub eps_prime: f64,
    /// Constant `c` of `exp(-c eps^2 beta ell^d)` implied by the Chernoff step.
    pub c: f64,
    pub value: f64,
}

/// Union bound over cells of `P[Poisson((1-eps/2) beta ell^d) >= beta ell^d]`
/// via the upper Chernoff bound; capped at 1.
pub fn failure_bound(spec: &CouplingSpec) -> FailureBound {
    let eps_prime = 1.0 / (1.0 - spec.eps / 2.0) - 1.0;
    let vol = spec.ell.powi(spec.dim as i32);
    let mean = (1.0 - spec.eps / 2.0) * spec.beta * vol;
    let exponent = mean * eps_prime * eps_prime * (1.0 - eps_prime / 3.0) / 2.0;
    let cells = (spec.k / spec.ell).powi(spec.dim as i32);
    FailureBound {
        eps_prime,
        c: exponent / (spec.eps * spec.eps * spec.beta * vol),
        value: (cells * (-exponent).exp()).min(1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Success,
    /// Some cell of `Q_K` had fewer than `beta ell^d` nodes of `Pi_0`.
    PreconditionFailed,
    DominationFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pairing {
    pub xi: NodeId,
    pub pi: NodeId,
    pub cell: usize,
    /// Kept with probability `1 - psi`; otherwise the auxiliary node is thinned.
    pub kept: bool,
    /// Shared displacement from the auxiliary node's start, when kept.
    pub displacement: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingTranscript {
    pub verdict: Verdict,
    pub psi: f64,
    pub inner_integral: f64,
    /// Intensity of the final process on `Q_K'`.
    pub xi_intensity: f64,
    /// Whether the final intensity reaches `(1 - eps) beta`.
    pub floor_met: bool,
    pub cell_dense: Vec<bool>,
    pub cell_dominated: Vec<bool>,
    pub pairings: Vec<Pairing>,
    #[serde(skip)]
    pub pi0: NodeEnsemble,
    #[serde(skip)]
    pub xi0: NodeEnsemble,
    #[serde(skip)]
    pub xi_moved: NodeEnsemble,
    #[serde(skip)]
    pub pi_delta: NodeEnsemble,
    #[serde(skip)]
    pub xi: NodeEnsemble,
    /// Every final node sits exactly on a node of `Pi_Delta`; `None` unless successful.
    pub subset: Option<bool>,
}

fn cell_of(p: &[f64], k: f64, ell: f64, m: usize) -> Option<usize> {
    let mut key = 0;
    for c in p.iter().rev() {
        if c.abs() > k / 2.0 {
            return None;
        }
        let idx = (((c + k / 2.0) / ell).floor() as usize).min(m - 1);
        key = key * m + idx;
    }
    Some(key)
}

fn gaussian_move(p: &[f64], sigma: f64, rng: &mut TrialRng) -> Vec<f64> {
    p.iter().map(|c| c + sigma * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Position with density `(f_Delta(y, .) - g(. - y')) / psi`.
fn residual_move(y: &[f64], y_aux: &[f64], spec: &CouplingSpec, rng: &mut TrialRng) -> Vec<f64> {
    let var = spec.sigma().powi(2);
    let norm = (2.0 * PI * var).powf(-(spec.dim as f64) / 2.0);
    loop {
        let p = gaussian_move(y, spec.sigma(), rng);
        let f = norm * (-sq_dist(&p, y) / (2.0 * var)).exp();
        let diff: Vec<f64> = p.iter().zip(y_aux).map(|(a, b)| a - b).collect();
        let g = g_density(&diff, spec.ell, spec.s, spec.delta, spec.dim);
        if rng.random::<f64>() >= (g / f).min(1.0) {
            return p;
        }
    }
}

/// Runs the construction on `pi0` (nodes in `Q_K`, centered at the origin).
pub fn run_coupling(spec: &CouplingSpec, pi0: &NodeEnsemble, trial: u64, rng: &mut TrialRng) -> Result<CouplingTranscript> {
    spec.validate()?;
    if pi0.dim() != spec.dim {
        return Err(invalid("Pi_0 dimension differs from the spec"));
    }
    let m = spec.cells_per_axis();
    let cells = m.pow(spec.dim as u32);
    let vol = spec.ell.powi(spec.dim as i32);
    let psi_value = psi(spec.ell, spec.s, spec.delta, spec.dim);
    let inner_integral = psi_mass_check(spec).integral;
    let mu_lb = (1.0 - spec.eps / 2.0) * spec.beta * inner_integral;
    let floor = (1.0 - spec.eps) * spec.beta;
    let mut transcript = CouplingTranscript {
        verdict: Verdict::Success,
        psi: psi_value,
        inner_integral,
        xi_intensity: floor.min(mu_lb),
        floor_met: mu_lb >= floor,
        cell_dense: Vec::new(),
        cell_dominated: Vec::new(),
        pairings: Vec::new(),
        pi0: pi0.clone(),
        xi0: NodeEnsemble::empty(spec.dim, 0),
        xi_moved: NodeEnsemble::empty(spec.dim, spec.delta),
        pi_delta: NodeEnsemble::empty(spec.dim, spec.delta),
        xi: NodeEnsemble::empty(spec.dim, spec.delta),
        subset: None,
    };

    let mut pi_cells: Vec<Vec<usize>> = vec![Vec::new(); cells];
    for i in 0..pi0.len() {
        if let Some(c) = cell_of(pi0.position(i), spec.k, spec.ell, m) {
            pi_cells[c].push(i);
        }
    }
    transcript.cell_dense = pi_cells.iter().map(|v| v.len() as f64 >= spec.beta * vol).collect();
    if transcript.cell_dense.iter().any(|d| !d) {
        transcript.verdict = Verdict::PreconditionFailed;
        return Ok(transcript);
    }

    let outer = Region::centered(spec.dim, spec.k);
    let xi0 = sample_ppp((1.0 - spec.eps / 2.0) * spec.beta, &outer, &mut IdSource::new(XI_NAMESPACE | trial), rng)?;
    let mut xi_cells: Vec<Vec<usize>> = vec![Vec::new(); cells];
    for i in 0..xi0.len() {
        if let Some(c) = cell_of(xi0.position(i), spec.k, spec.ell, m) {
            xi_cells[c].push(i);
        }
    }
    transcript.cell_dominated = xi_cells.iter().zip(&pi_cells).map(|(a, b)| a.len() <= b.len()).collect();
    transcript.xi0 = xi0.clone();
    if transcript.cell_dominated.iter().any(|d| !d) {
        transcript.verdict = Verdict::DominationFailed;
        return Ok(transcript);
    }

    let sigma = spec.sigma();
    let mut new_pos: Vec<Option<Vec<f64>>> = vec![None; pi0.len()];
    let mut xi_moved = NodeEnsemble::empty(spec.dim, spec.delta);
    let mut shared: Vec<(usize, Vec<f64>)> = Vec::new();
    for c in 0..cells {
        let mut xs = xi_cells[c].clone();
        let mut ps = pi_cells[c].clone();
        xs.sort_by_key(|&i| xi0.id(i));
        ps.sort_by_key(|&i| pi0.id(i));
        for (&xi_idx, &pi_idx) in xs.iter().zip(&ps) {
            let y_aux = xi0.position(xi_idx);
            let kept = rng.random::<f64>() >= psi_value;
            let displacement = if kept {
                let z = sample_g(spec.ell, spec.s, spec.delta, spec.dim, rng);
                let p: Vec<f64> = y_aux.iter().zip(&z).map(|(a, b)| a + b).collect();
                xi_moved.push(xi0.id(xi_idx), &p);
                new_pos[pi_idx] = Some(p);
                shared.push((xi_moved.len() - 1, z.clone()));
                Some(z)
            } else {
                new_pos[pi_idx] = Some(residual_move(pi0.position(pi_idx), y_aux, spec, rng));
                None
            };
            transcript.pairings.push(Pairing { xi: xi0.id(xi_idx), pi: pi0.id(pi_idx), cell: c, kept, displacement });
        }
    }
    let mut pi_delta = NodeEnsemble::empty(spec.dim, pi0.timestamp + spec.delta);
    for (i, slot) in new_pos.into_iter().enumerate() {
        let p = slot.unwrap_or_else(|| gaussian_move(pi0.position(i), sigma, rng));
        pi_delta.push(pi0.id(i), &p);
    }

    // keep displacements inside B_R so every source lies in Q_K, then thin to the floor
    let inner = Region::centered(spec.dim, spec.k_inner);
    let r2 = spec.radius().powi(2);
    let keep = if mu_lb > 0.0 { (floor / mu_lb).min(1.0) } else { 0.0 };
    let mut xi = NodeEnsemble::empty(spec.dim, spec.delta);
    for (idx, z) in &shared {
        let p = xi_moved.position(*idx);
        if inner.contains(p) && sq_dist(z, &vec![0.0; spec.dim]) <= r2 && rng.random::<f64>() < keep {
            xi.push(xi_moved.id(*idx), p);
        }
    }
    let positions: HashSet<Vec<u64>> =
        pi_delta.positions().map(|p| p.iter().map(|c| c.to_bits()).collect()).collect();
    transcript.subset = Some(
        xi.positions().all(|p| positions.contains(&p.iter().map(|c| c.to_bits()).collect::<Vec<_>>())),
    );
    transcript.xi_moved = xi_moved;
    transcript.pi_delta = pi_delta;
    transcript.xi = xi;
    Ok(transcript)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSet {
    /// Poisson process of the given intensity on `Q_K`, redrawn until every cell is dense.
    PoissonDense { intensity: f64 },
    /// Exactly `ceil(beta ell^d)` uniform nodes in every cell.
    Minimal,
}

/// Draws `Pi_0` per `mode`; returns it with the number of redraws.
pub fn initial_set(spec: &CouplingSpec, mode: &InitialSet, trial: u64, rng: &mut TrialRng) -> Result<(NodeEnsemble, u32)> {
    let m = spec.cells_per_axis();
    let vol = spec.ell.powi(spec.dim as i32);
    match *mode {
        InitialSet::PoissonDense { intensity } => {
            let outer = Region::centered(spec.dim, spec.k);
            for attempt in 0..10_000u32 {
                let ens = sample_ppp(intensity, &outer, &mut IdSource::new(trial), rng)?;
                let mut counts = vec![0usize; m.pow(spec.dim as u32)];
                for p in ens.positions() {
                    if let Some(c) = cell_of(p, spec.k, spec.ell, m) {
                        counts[c] += 1;
                    }
                }
                if counts.iter().all(|&c| c as f64 >= spec.beta * vol) {
                    return Ok((ens, attempt));
                }
            }
            Err(invalid(format!("intensity {intensity} never produced a dense initial set")))
        }
        InitialSet::Minimal => {
            let per_cell = (spec.beta * vol).ceil() as usize;
            let mut ids = IdSource::new(trial);
            let mut ens = NodeEnsemble::empty(spec.dim, 0);
            let cells = m.pow(spec.dim as u32);
            let mut p = vec![0.0; spec.dim];
            for c in 0..cells {
                let mut rem = c;
                let corner: Vec<f64> = (0..spec.dim)
                    .map(|_| {
                        let idx = rem % m;
                        rem /= m;
                        -spec.k / 2.0 + idx as f64 * spec.ell
                    })
                    .collect();
                for _ in 0..per_cell {
                    for (k, slot) in p.iter_mut().enumerate() {
                        *slot = corner[k] + spec.ell * rng.random::<f64>();
                    }
                    ens.push(ids.next_id(), &p);
                }
            }
            Ok((ens, 0))
        }
    }
}

/// Cell counts of `ens` over the cells of side `ell` tiling the centered cube of side `side`.
pub fn cell_counts(ens: &NodeEnsemble, side: f64, ell: f64) -> Vec<usize> {
    let m = (side / ell).round().max(1.0) as usize;
    let mut counts = vec![0usize; m.pow(ens.dim() as u32)];
    for p in ens.positions() {
        if let Some(c) = cell_of(p, side, ell, m) {
            counts[c] += 1;
        }
    }
    counts
}

/// Pearson chi-square of observed counts against `Poisson(mean)`, with
/// value classes merged until each expects at least 5.
pub fn poisson_goodness_of_fit(counts: &[usize], mean: f64) -> (f64, usize, f64) {
    let n = counts.len() as f64;
    let max = counts.iter().copied().max().unwrap_or(0);
    let mut pmf = Vec::new();
    let mut p = (-mean).exp();
    for k in 0..=max + 1 {
        pmf.push(p);
        p *= mean / (k + 1) as f64;
    }
    let mut observed = vec![0usize; max + 2];
    for &c in counts {
        observed[c] += 1;
    }
    // classes {0}, {1}, ..., last class is the upper tail
    let mut classes: Vec<(f64, f64)> = Vec::new();
    let (mut exp_acc, mut obs_acc) = (0.0, 0.0);
    let mut cum = 0.0;
    for k in 0..=max {
        exp_acc += pmf[k] * n;
        cum += pmf[k];
        obs_acc += observed[k] as f64;
        if exp_acc >= 5.0 {
            classes.push((obs_acc, exp_acc));
            exp_acc = 0.0;
            obs_acc = 0.0;
        }
    }
    let tail = (1.0 - cum).max(0.0) * n + exp_acc;
    match classes.last_mut() {
        Some(last) if tail < 5.0 => {
            last.0 += obs_acc;
            last.1 += tail;
        }
        _ => classes.push((obs_acc, tail)),
    }
    let stat: f64 = classes.iter().filter(|(_, e)| *e > 0.0).map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = classes.len().saturating_sub(1).max(1);
    let p_value = 1.0 - ChiSquared::new(dof as f64).map(|d| d.cdf(stat)).unwrap_or(0.0);
    (stat, dof, p_value)
}

fn correlation(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let (mx, my) = pairs.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let cov: f64 = pairs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = pairs.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let vy: f64 = pairs.iter().map(|(_, y)| (y - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingSummary {
    pub spec: CouplingSpec,
    pub initial: InitialSet,
    pub invariants: SpecInvariants,
    pub runs: u64,
    pub successes: u64,
    pub precondition_failures: u64,
    pub domination_failures: u64,
    pub failure_rate: f64,
    pub failure_bound: FailureBound,
    pub psi: f64,
    pub psi_mass: PsiCheck,
    pub xi_intensity: f64,
    pub floor_met: bool,
    pub subset_all: bool,
    /// Per-cell correlation of final counts with initial counts on `Q_K'`.
    pub freshness_correlation: f64,
    pub freshness_sigma: f64,
    pub freshness_chi_square: f64,
    pub freshness_dof: usize,
    pub freshness_p_value: f64,
    /// Mean intensity of the kept auxiliary nodes on `Q_K'`.
    pub moved_intensity_inner: f64,
    pub redraws: u64,
}

struct RunRecord {
    verdict: Verdict,
    subset: Option<bool>,
    pairs: Vec<(f64, f64)>,
    xi_counts: Vec<usize>,
    moved_inner: usize,
    redraws: u32,
}

/// Runs the construction `runs` times on fresh initial sets.
pub fn run_coupling_batch(spec: &CouplingSpec, initial: &InitialSet, runs: u64, policy: &RngPolicy) -> Result<CouplingSummary> {
    spec.validate()?;
    if runs == 0 {
        return Err(invalid("runs must be at least 1"));
    }
    let records = run_trials(runs, |trial| -> Result<RunRecord> {
        let mut rng = policy.stream("coupling", trial);
        let (pi0, redraws) = initial_set(spec, initial, trial, &mut rng)?;
        let tr = run_coupling(spec, &pi0, trial, &mut rng)?;
        let inner_pi = cell_counts(&tr.pi0, spec.k_inner, spec.ell);
        let xi_counts = cell_counts(&tr.xi, spec.k_inner, spec.ell);
        let pairs = xi_counts.iter().zip(&inner_pi).map(|(a, b)| (*a as f64, *b as f64)).collect();
        let inner = Region::centered(spec.dim, spec.k_inner);
        let moved_inner = tr.xi_moved.count_in(&inner);
        Ok(RunRecord { verdict: tr.verdict, subset: tr.subset, pairs, xi_counts, moved_inner, redraws })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let count = |v: Verdict| records.iter().filter(|r| r.verdict == v).count() as u64;
    let successes = count(Verdict::Success);
    let ok: Vec<&RunRecord> = records.iter().filter(|r| r.verdict == Verdict::Success).collect();
    let pairs: Vec<(f64, f64)> = ok.iter().flat_map(|r| r.pairs.iter().copied()).collect();
    let xi_counts: Vec<usize> = ok.iter().flat_map(|r| r.xi_counts.iter().copied()).collect();
    let mass = psi_mass_check(spec);
    let floor = (1.0 - spec.eps) * spec.beta;
    let mu_lb = (1.0 - spec.eps / 2.0) * spec.beta * mass.integral;
    let xi_intensity = floor.min(mu_lb);
    let vol = spec.ell.powi(spec.dim as i32);
    let (chi, dof, p) = if xi_counts.is_empty() {
        (f64::NAN, 0, f64::NAN)
    } else {
        poisson_goodness_of_fit(&xi_counts, xi_intensity * vol)
    };
    let inner_vol = spec.k_inner.powi(spec.dim as i32);
    Ok(CouplingSummary {
        spec: *spec,
        initial: *initial,
        invariants: spec.invariants(),
        runs,
        successes,
        precondition_failures: count(Verdict::PreconditionFailed),
        domination_failures: count(Verdict::DominationFailed),
        failure_rate: count(Verdict::DominationFailed) as f64 / runs as f64,
        failure_bound: failure_bound(spec),
        psi: psi(spec.ell, spec.s, spec.delta, spec.dim),
        psi_mass: mass,
        xi_intensity,
        floor_met: mu_lb >= floor,
        subset_all: ok.iter().all(|r| r.subset == Some(true)),
        freshness_correlation: correlation(&pairs),
        freshness_sigma: 1.0 / (pairs.len().max(1) as f64).sqrt(),
        freshness_chi_square: chi,
        freshness_dof: dof,
        freshness_p_value: p,
        moved_intensity_inner: if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().map(|r| r.moved_inner as f64).sum::<f64>() / (ok.len() as f64 * inner_vol)
        },
        redraws: records.iter().map(|r| r.redraws as u64).sum(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledStep {
    pub spec: CouplingSpec,
    pub success: bool,
    pub verdict: Verdict,
    /// Intensity of the embedded fresh process on `Q_L`.
    pub fresh_intensity: f64,
    /// Whether that intensity exceeds the two-dimensional critical interval.
    pub supercritical: Option<bool>,
    #[serde(skip)]
    pub moved: NodeEnsemble,
    #[serde(skip)]
    pub fresh: NodeEnsemble,
}

/// One tessellation step: the coupling with `beta = (1 - xi) lambda`,
/// `eps = xi`, `K = 2L`, `K' = L` and `Delta = ceil(C^2 ell^2 / s^2)`.
#[allow(clippy::too_many_arguments)]
pub fn percolation_step_coupled(
    prev: &NodeEnsemble,
    xi: f64,
    lambda: f64,
    ell: f64,
    l: f64,
    big_c: f64,
    s: f64,
    trial: u64,
    rng: &mut TrialRng,
) -> Result<CoupledStep> {
    let delta = ((big_c * big_c * ell * ell) / (s * s)).ceil().max(1.0) as u64;
    let spec = CouplingSpec {
        k: 2.0 * l,
        k_inner: l,
        ell,
        beta: (1.0 - xi) * lambda,
        eps: xi,
        delta,
        s,
        dim: prev.dim(),
        c1: default_c1(),
        c2: default_c2(),
    };
    let tr = run_coupling(&spec, prev, trial, rng)?;
    let success = tr.verdict == Verdict::Success;
    let fresh_intensity = tr.xi_intensity;
    let moved = if success { tr.pi_delta } else { NodeEnsemble::empty(spec.dim, prev.timestamp + delta) };
    Ok(CoupledStep {
        spec,
        success,
        verdict: tr.verdict,
        fresh_intensity,
        supercritical: (spec.dim == 2).then_some(fresh_intensity > crate::experiments::percolation::LAMBDA_C_UPPER_2D),
        moved,
        fresh: tr.xi,
    })
}

/// `ell^d Delta / t`, close to a constant when `ell^d` is of order `t / Delta`.
pub fn ell_scaling_ratio(ell: f64, delta: u64, t: f64, dim: usize) -> f64 {
    ell.powi(dim as i32) * delta as f64 / t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::random_direction;
    use statrs::function::erf::erfc;

    fn reference_spec() -> CouplingSpec {
        CouplingSpec {
            k: 40.0,
            k_inner: 20.0,
            ell: 4.0,
            beta: 5.0,
            eps: 0.5,
            delta: CouplingSpec::default_delta(4.0, 1.0, 0.5, 16.0),
            s: 1.0,
            dim: 2,
            c1: 16.0,
            c2: 8.0,
        }
    }

    /// Small spec whose inner ball holds enough of g for the floor to be met.
    fn cheap_spec() -> CouplingSpec {
        CouplingSpec { k: 40.0, k_inner: 18.0, ell: 1.0, beta: 5.0, eps: 0.5, delta: 64, s: 1.0, dim: 1, c1: 16.0, c2: 8.0 }
    }

    #[test]
    fn g_examples() {
        let v = g_density(&[0.0, 0.0], 1.0, 1.0, 4, 2);
        assert!((v - (-0.25f64).exp() / (8.0 * PI)).abs() < 1e-15);
        assert!((v - 0.030_987_498_577_413).abs() < 1e-15);
        let a = g_density(&[3.0, 4.0], 1.0, 1.0, 4, 2);
        let b = g_density(&[5.0, 0.0], 1.0, 1.0, 4, 2);
        assert!((a - b).abs() < 1e-15);
        let ratio = acceptance_ratio(0.0, 2f64.sqrt(), 4.0);
        assert!((ratio - (-2.0 / 8.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn psi_closed_form_in_two_dimensions() {
        for (ell, delta) in [(1.0, 4u64), (4.0, 1024), (0.5, 16)] {
            let sigma = (delta as f64).sqrt();
            let a = 2f64.sqrt() * ell;
            let mass = (-a * a / (2.0 * sigma * sigma)).exp()
                - (a / sigma) * (PI / 2.0).sqrt() * erfc(a / (sigma * 2f64.sqrt()));
            let q = psi(ell, 1.0, delta, 2);
            assert!((q - (1.0 - mass)).abs() < 1e-9, "ell={ell}: {q} vs {}", 1.0 - mass);
            assert!(q > 0.0 && q < 1.0);
        }
        assert!(psi(1e-6, 1.0, 4, 2) < 1e-4);
        let grid: Vec<f64> = [4u64, 16, 64].iter().map(|&d| psi(1.0, 1.0, d, 2)).collect();
        assert!(grid[0] > grid[1] && grid[1] > grid[2]);
    }

    #[test]
    fn ball_integral_limits() {
        let spec = reference_spec();
        assert_eq!(psi_mass_check(&CouplingSpec { k_inner: spec.k, ..spec }).integral, 0.0);
        let far = g_ball_integral(1e6, 0.01, 1.0, 4, 2);
        assert!((far - (1.0 - psi(0.01, 1.0, 4, 2))).abs() < 1e-10);
        assert!(far > 0.99);
    }

    #[test]
    fn constraint_on_random_probes() {
        let mut rng = RngPolicy::new(1).stream("constraint", 0);
        let (ell, s, delta, dim) = (4.0, 1.0, 64u64, 2usize);
        let var = s * s * delta as f64;
        let f = |a: &[f64], b: &[f64]| (2.0 * PI * var).powf(-1.0) * (-sq_dist(a, b) / (2.0 * var)).exp();
        for _ in 0..10_000 {
            let y_aux: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 10.0).collect();
            let rad = rng.random::<f64>() * (dim as f64).sqrt() * ell;
            let dir = random_direction(dim, &mut rng);
            let y: Vec<f64> = y_aux.iter().zip(&dir).map(|(a, b)| a + rad * b).collect();
            let z: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal) * 15.0).collect();
            let target: Vec<f64> = y_aux.iter().zip(&z).map(|(a, b)| a + b).collect();
            let g = g_density(&z, ell, s, delta, dim);
            assert!(g <= f(&y_aux, &target).min(f(&y, &target)) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn sampled_radii_follow_g() {
        let mut rng = RngPolicy::new(2).stream("g", 0);
        let (ell, s, delta, dim) = (1.0, 1.0, 4u64, 2usize);
        let n = 100_000;
        let edges: Vec<f64> = (0..=12).map(|i| i as f64 * 0.5).collect();
        let mut counts = vec![0.0; edges.len()];
        let mut mean_dir = [0.0, 0.0];
        for _ in 0..n {
            let z = sample_g(ell, s, delta, dim, &mut rng);
            let rho = (z[0] * z[0] + z[1] * z[1]).sqrt();
            mean_dir[0] += z[0] / rho / n as f64;
            mean_dir[1] += z[1] / rho / n as f64;
            let b = edges.iter().rposition(|&e| e <= rho).unwrap().min(edges.len() - 1);
            counts[b] += 1.0;
        }
        let mass = 1.0 - psi(ell, s, delta, dim);
        let mut stat = 0.0;
        for b in 0..edges.len() {
            let hi = if b + 1 < edges.len() { edges[b + 1] } else { f64::INFINITY };
            let p = (g_ball_integral(hi, ell, s, delta, dim) - g_ball_integral(edges[b], ell, s, delta, dim)) / mass;
            let e = p * n as f64;
            stat += (counts[b] - e).powi(2) / e;
        }
        let pval = 1.0 - ChiSquared::new((edges.len() - 1) as f64).unwrap().cdf(stat);
        assert!(pval > 0.001, "chi-square p = {pval}");
        assert!((mean_dir[0].hypot(mean_dir[1])) <= 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn transcript_invariants() {
        let spec = cheap_spec();
        let policy = RngPolicy::new(3);
        for trial in 0..20 {
            let mut rng = policy.stream("tr", trial);
            let (pi0, _) = initial_set(&spec, &InitialSet::PoissonDense { intensity: 20.0 }, trial, &mut rng).unwrap();
            let tr = run_coupling(&spec, &pi0, trial, &mut rng).unwrap();
            assert_eq!(tr.verdict, Verdict::Success);
            assert_eq!(tr.subset, Some(true));
            let xs: HashSet<NodeId> = tr.pairings.iter().map(|p| p.xi).collect();
            let ps: HashSet<NodeId> = tr.pairings.iter().map(|p| p.pi).collect();
            assert_eq!(xs.len(), tr.pairings.len());
            assert_eq!(ps.len(), tr.pairings.len());
            for p in &tr.pairings {
                let xi_cell = cell_of(tr.xi0.position(tr.xi0.index_of(p.xi).unwrap()), spec.k, spec.ell, 40);
                let pi_cell = cell_of(pi0.position(pi0.index_of(p.pi).unwrap()), spec.k, spec.ell, 40);
                assert_eq!(xi_cell, Some(p.cell));
                assert_eq!(pi_cell, Some(p.cell));
            }
            assert_eq!(tr.pi_delta.len(), pi0.len());
        }
    }

    #[test]
    fn sparse_cell_fails_precondition() {
        let spec = cheap_spec();
        let pi0 = NodeEnsemble::empty(1, 0);
        let mut rng = RngPolicy::new(4).stream("sp", 0);
        let tr = run_coupling(&spec, &pi0, 0, &mut rng).unwrap();
        assert_eq!(tr.verdict, Verdict::PreconditionFailed);
        assert!(tr.subset.is_none());
    }

    #[test]
    fn unpaired_nodes_move_brownian() {
        // 1-D, dense Pi_0 with many more nodes than the auxiliary process
        let spec = cheap_spec();
        let policy = RngPolicy::new(5);
        let mut disp = Vec::new();
        for trial in 0..40 {
            let mut rng = policy.stream("unp", trial);
            let (pi0, _) = initial_set(&spec, &InitialSet::PoissonDense { intensity: 40.0 }, trial, &mut rng).unwrap();
            let tr = run_coupling(&spec, &pi0, trial, &mut rng).unwrap();
            let paired: HashSet<NodeId> = tr.pairings.iter().map(|p| p.pi).collect();
            for i in 0..pi0.len() {
                if !paired.contains(&pi0.id(i)) {
                    disp.push(tr.pi_delta.position(i)[0] - pi0.position(i)[0]);
                }
            }
        }
        let n = disp.len() as f64;
        let var = disp.iter().map(|d| d * d).sum::<f64>() / n;
        assert!((var - 64.0).abs() < 3.0 * 64.0 * (2.0 / n).sqrt(), "var {var} over {n}");
    }

    #[test]
    fn paired_nodes_keep_brownian_marginal() {
        let spec = cheap_spec();
        let policy = RngPolicy::new(6);
        let mut disp = Vec::new();
        for trial in 0..60 {
            let mut rng = policy.stream("pair", trial);
            let (pi0, _) = initial_set(&spec, &InitialSet::PoissonDense { intensity: 10.0 }, trial, &mut rng).unwrap();
            let tr = run_coupling(&spec, &pi0, trial, &mut rng).unwrap();
            for p in &tr.pairings {
                let i = pi0.index_of(p.pi).unwrap();
                disp.push(tr.pi_delta.position(i)[0] - pi0.position(i)[0]);
            }
        }
        let n = disp.len() as f64;
        let mean = disp.iter().sum::<f64>() / n;
        let var = disp.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 3.0 * (64.0 / n).sqrt(), "mean {mean}");
        assert!((var - 64.0).abs() < 3.0 * 64.0 * (2.0 / n).sqrt(), "var {var}");
    }

    #[test]
    fn freshness_on_cheap_spec() {
        let spec = cheap_spec();
        let summary =
            run_coupling_batch(&spec, &InitialSet::PoissonDense { intensity: 20.0 }, 300, &RngPolicy::new(7)).unwrap();
        assert!(summary.floor_met, "{summary:?}");
        assert!(summary.successes >= 290, "{summary:?}");
        assert!(summary.failure_rate <= summary.failure_bound.value);
        assert!(summary.subset_all);
        assert!(summary.freshness_correlation.abs() < 3.0 * summary.freshness_sigma);
        assert!(summary.freshness_p_value > 0.001, "{summary:?}");
        assert!(summary.moved_intensity_inner >= (1.0 - spec.eps) * spec.beta - 0.1);
    }

    #[test]
    fn failure_bound_value() {
        let b = failure_bound(&reference_spec());
        assert!((b.eps_prime - 1.0 / 3.0).abs() < 1e-15);
        let raw = 100.0 * (-60.0 * (1.0 / 9.0) * (1.0 - 1.0 / 9.0) / 2.0f64).exp();
        assert_eq!(b.value, raw.min(1.0));
    }

    #[test]
    fn coupled_step_flags_sparse() {
        let mut rng = RngPolicy::new(8).stream("step", 0);
        let step = percolation_step_coupled(&NodeEnsemble::empty(2, 0), 0.1, 6.0, 2.0, 10.0, 1.0, 1.0, 0, &mut rng).unwrap();
        assert!(!step.success);
        assert_eq!(step.verdict, Verdict::PreconditionFailed);
    }
}
