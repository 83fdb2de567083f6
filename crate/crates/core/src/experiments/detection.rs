//! Detection of a target by the mobile network: direct simulation, the
//! single-node hitting estimators and the sausage-volume oracle.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::domain::{sq_dist, ModelParams, Point, SimDomain};
use crate::error::{invalid, Result};
use crate::harness::run_trials;
use crate::motion::{
    random_direction, sample_target_trajectory, step_in_place, Drifts, MotionModel, Trajectory,
};
use crate::point_process::{sample_ppp, IdSource, NodeEnsemble, Region};
use crate::rng::{RngPolicy, TrialRng};
use crate::stats::survival::{wilson_interval, SurvivalCurve, SurvivalPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Simulate the whole network in `Q_L` and record the first detection.
    Direct,
    /// For a fixed target path, `-ln S(t) = lambda * int_{Q_L} P_y[tau < t] dy`,
    /// estimated from importance-sampled single-node hitting times.
    PoissonVoid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    /// Fresh path from the origin in every trial.
    Model(MotionModel),
    /// The same path in every trial.
    Fixed(Trajectory),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionTrialSpec {
    pub params: ModelParams,
    /// Side of `Q_L`, centered at the origin.
    pub box_side: f64,
    pub network: MotionModel,
    pub target: Target,
    pub t_max: u64,
}

/// `max(20 s sqrt(t_max), 40 r)`, widened by `2 gamma t_max` for drifting nodes.
pub fn default_box_side(params: &ModelParams, t_max: u64, gamma: f64) -> f64 {
    (20.0 * params.s * (t_max as f64).sqrt() + 2.0 * gamma * t_max as f64).max(40.0 * params.r)
}

impl DetectionTrialSpec {
    /// Brownian network with the params' `s`, default box.
    pub fn new(params: ModelParams, target: Target, t_max: u64) -> Result<Self> {
        let network = MotionModel::Brownian { s: params.s };
        let spec = DetectionTrialSpec {
            params,
            box_side: default_box_side(&params, t_max, 0.0),
            network,
            target,
            t_max,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_network(mut self, network: MotionModel) -> Self {
        self.network = network;
        self.box_side = default_box_side(&self.params, self.t_max, network.gamma());
        self
    }

    pub fn with_box_side(mut self, side: f64) -> Self {
        self.box_side = side;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.box_side > 0.0) || !self.box_side.is_finite() {
            return Err(invalid(format!("box side must be positive, got {}", self.box_side)));
        }
        if self.t_max < 1 {
            return Err(invalid("t_max must be at least 1"));
        }
        self.network.validate()?;
        match &self.target {
            Target::Model(m) => m.validate(),
            Target::Fixed(x) => {
                if (x.len() as u64) < self.t_max {
                    Err(invalid(format!("fixed path has {} points, t_max is {}", x.len(), self.t_max)))
                } else if x.dim() != self.params.dim {
                    Err(invalid("fixed path dimension differs from the model"))
                } else {
                    Ok(())
                }
            }
        }
    }

    fn dim(&self) -> usize {
        self.params.dim
    }

    fn region(&self) -> Region {
        Region::centered(self.dim(), self.box_side)
    }

    fn open_domain(&self) -> SimDomain {
        SimDomain::new_box(self.dim(), self.box_side).expect("validated side")
    }

    fn fixed_path(&self) -> Option<Trajectory> {
        match &self.target {
            Target::Fixed(x) => Some(x.clone()),
            Target::Model(MotionModel::Stationary) => {
                Some(Trajectory::stationary(Point::origin(self.dim()), self.t_max as usize))
            }
            Target::Model(_) => None,
        }
    }

    fn target_path(&self, rng: &mut TrialRng) -> Result<Trajectory> {
        match &self.target {
            Target::Fixed(x) => Ok(x.clone()),
            Target::Model(m) => {
                sample_target_trajectory(m, self.t_max as usize, &Point::origin(self.dim()), rng)
            }
        }
    }
}

/// The network of `trial` at step 0, as drawn by the direct estimator.
pub fn initial_ensemble(spec: &DetectionTrialSpec, policy: &RngPolicy, experiment: &str, trial: u64) -> Result<NodeEnsemble> {
    let mut net_rng = policy.labelled(experiment, "network", trial);
    sample_ppp(spec.params.lambda, &spec.region(), &mut IdSource::new(trial), &mut net_rng)
}

/// Whole-network trial: first step `i` at which a node is within `r` of `x_i`.
fn direct_trial(spec: &DetectionTrialSpec, policy: &RngPolicy, experiment: &str, trial: u64) -> Result<Option<u64>> {
    let mut net_rng = policy.labelled(experiment, "network", trial);
    let mut target_rng = policy.labelled(experiment, "target", trial);
    let path = spec.target_path(&mut target_rng)?;
    let mut ens = sample_ppp(spec.params.lambda, &spec.region(), &mut IdSource::new(trial), &mut net_rng)?;
    let drifts = Drifts::sample(&spec.network, ens.len(), spec.dim(), &mut net_rng);
    let domain = spec.open_domain();
    let r2 = spec.params.r * spec.params.r;
    for i in 0..spec.t_max {
        if i > 0 {
            step_in_place(&mut ens, &spec.network, &drifts, &domain, &mut net_rng)?;
        }
        let x = path.at(i as usize);
        if ens.positions().any(|p| sq_dist(p, x) <= r2) {
            return Ok(Some(i));
        }
    }
    Ok(None)
}

/// First step `< t_max` at which a single node started at `y` is within `r` of the path.
fn single_node_hit(
    y: &mut [f64],
    path: &Trajectory,
    network: &MotionModel,
    r: f64,
    t_max: u64,
    rng: &mut TrialRng,
) -> Option<u64> {
    let dim = y.len();
    let drift: Vec<f64> = match *network {
        MotionModel::BrownianWithDrift { gamma, .. } => {
            random_direction(dim, rng).into_iter().map(|c| c * gamma).collect()
        }
        _ => vec![0.0; dim],
    };
    let s = network.s();
    let r2 = r * r;
    for i in 0..t_max {
        if i > 0 {
            for (c, m) in y.iter_mut().zip(&drift) {
                *c += m + s * rng.sample::<f64, _>(StandardNormal);
            }
        }
        if sq_dist(y, path.at(i as usize)) <= r2 {
            return Some(i);
        }
    }
    None
}

/// Importance density for starting points: two Gaussians around the path
/// center plus a uniform share over `Q_L`.
struct StartSampler {
    center: Vec<f64>,
    sigmas: [f64; 2],
    region: Region,
}

const MIX: [f64; 3] = [0.45, 0.45, 0.10];

impl StartSampler {
    fn new(spec: &DetectionTrialSpec, path: &Trajectory) -> Self {
        let dim = spec.dim();
        let n = path.len() as f64;
        let center: Vec<f64> = (0..dim).map(|k| path.0.iter().map(|p| p.0[k]).sum::<f64>() / n).collect();
        let spread = path.0.iter().map(|p| sq_dist(&p.0, &center).sqrt()).fold(0.0, f64::max);
        let t = spec.t_max as f64;
        let s1 = spec.params.s * t.sqrt() + 2.0 * spec.params.r + spread;
        let gamma = spec.network.gamma();
        let s2 = if gamma > 0.0 { s1 + gamma * t } else { 3.0 * s1 };
        StartSampler { center, sigmas: [s1, s2], region: spec.region() }
    }

    fn density(&self, y: &[f64]) -> f64 {
        let dim = y.len() as f64;
        let sq = sq_dist(y, &self.center);
        let mut h = 0.0;
        for (w, s) in MIX.iter().zip(&self.sigmas) {
            h += w * (2.0 * std::f64::consts::PI * s * s).powf(-dim / 2.0) * (-sq / (2.0 * s * s)).exp();
        }
        if self.region.contains(y) {
            h += MIX[2] / self.region.volume();
        }
        h
    }

    fn sample(&self, rng: &mut TrialRng) -> Vec<f64> {
        let u: f64 = rng.random();
        if u < MIX[0] + MIX[1] {
            let s = if u < MIX[0] { self.sigmas[0] } else { self.sigmas[1] };
            self.center.iter().map(|c| c + s * rng.sample::<f64, _>(StandardNormal)).collect()
        } else {
            self.region.lo.iter().zip(&self.region.hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect()
        }
    }
}

fn void_curve(spec: &DetectionTrialSpec, policy: &RngPolicy, experiment: &str, trials: u64) -> Result<SurvivalCurve> {
    let path = spec.fixed_path().ok_or_else(|| {
        invalid("the poisson-void estimator needs a fixed target path (stationary or given)")
    })?;
    let sampler = StartSampler::new(spec, &path);
    let samples: Vec<(Option<u64>, f64)> = run_trials(trials, |trial| {
        let mut rng = policy.labelled(experiment, "void", trial);
        let mut y = sampler.sample(&mut rng);
        let w = if spec.region().contains(&y) { 1.0 / sampler.density(&y) } else { 0.0 };
        let hit = if w > 0.0 {
            single_node_hit(&mut y, &path, &spec.network, spec.params.r, spec.t_max, &mut rng)
        } else {
            None
        };
        (hit, w)
    });
    let n = trials as f64;
    let t_max = spec.t_max as usize;
    let mut sum = vec![0.0; t_max + 1];
    let mut sum_sq = vec![0.0; t_max + 1];
    let mut hits = vec![0u64; t_max + 1];
    for (hit, w) in &samples {
        if let Some(i) = hit {
            sum[*i as usize] += w;
            sum_sq[*i as usize] += w * w;
            hits[*i as usize] += 1;
        }
    }
    let z = Normal::standard().inverse_cdf(0.975);
    let lambda = spec.params.lambda;
    let never = samples.iter().filter(|(h, _)| h.is_none()).count() as u64;
    let (mut acc, mut acc_sq, mut acc_hits) = (0.0, 0.0, 0u64);
    let mut points = Vec::with_capacity(t_max);
    for t in 1..=spec.t_max {
        let i = t as usize - 1;
        acc += sum[i];
        acc_sq += sum_sq[i];
        acc_hits += hits[i];
        let mean = acc / n;
        let se = ((acc_sq / n - mean * mean).max(0.0) / n).sqrt();
        let neg_log = lambda * mean;
        let log_se = lambda * se;
        points.push(SurvivalPoint {
            t,
            trials,
            survivors: trials - acc_hits,
            estimate: (-neg_log).exp(),
            ci_low: (-(neg_log + z * log_se)).exp(),
            ci_high: (-(neg_log - z * log_se)).exp().min(1.0),
            censored: if t == spec.t_max { never } else { 0 },
            resolution: acc_hits,
            log_se,
        });
    }
    Ok(SurvivalCurve { estimator: "poisson-void".into(), t_max: spec.t_max, points })
}

/// Survival curve of `T_det(Q_L)` over `t = 1..=t_max`.
pub fn run_detection(
    spec: &DetectionTrialSpec,
    estimator: Estimator,
    trials: u64,
    policy: &RngPolicy,
) -> Result<SurvivalCurve> {
    spec.validate()?;
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    match estimator {
        Estimator::Direct => {
            let times = run_trials(trials, |trial| direct_trial(spec, policy, "detect", trial))
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            SurvivalCurve::from_event_times(&times, spec.t_max)
        }
        Estimator::PoissonVoid => void_curve(spec, policy, "detect", trials),
    }
}

/// Per-trial detection times, for callers that aggregate themselves.
pub fn detection_times(spec: &DetectionTrialSpec, trials: u64, policy: &RngPolicy, experiment: &str) -> Result<Vec<Option<u64>>> {
    spec.validate()?;
    run_trials(trials, |trial| direct_trial(spec, policy, experiment, trial)).into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauPoint {
    pub t: u64,
    pub hits: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// `P[tau < t | X]` for one node started uniformly in `Q_L`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauCurve {
    pub trials: u64,
    pub box_side: f64,
    pub points: Vec<TauPoint>,
    /// `P[tau >= t | X]` in survival-curve form.
    pub survival: SurvivalCurve,
}

impl TauCurve {
    pub fn at(&self, t: u64) -> Option<&TauPoint> {
        self.points.iter().find(|p| p.t == t)
    }
}

/// Single uniform node in `Q_L` against the fixed path `x`, `t = 1..=len(x)`.
pub fn run_single_node_tau(
    spec: &DetectionTrialSpec,
    x: &Trajectory,
    trials: u64,
    policy: &RngPolicy,
) -> Result<TauCurve> {
    if trials == 0 || x.is_empty() {
        return Err(invalid("need at least one trial and a non-empty path"));
    }
    let t_max = x.len() as u64;
    let region = spec.region();
    let hits: Vec<Option<u64>> = run_trials(trials, |trial| {
        let mut rng = policy.stream("tau", trial);
        let mut y: Vec<f64> =
            region.lo.iter().zip(&region.hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect();
        single_node_hit(&mut y, x, &spec.network, spec.params.r, t_max, &mut rng)
    });
    let mut counts = vec![0u64; t_max as usize];
    for h in hits.iter().flatten() {
        counts[*h as usize] += 1;
    }
    let mut acc = 0;
    let mut points = Vec::new();
    for t in 1..=t_max {
        acc += counts[t as usize - 1];
        let (ci_low, ci_high) = wilson_interval(acc, trials, 0.95)?;
        points.push(TauPoint { t, hits: acc, estimate: acc as f64 / trials as f64, ci_low, ci_high });
    }
    let mut survival = SurvivalCurve::from_event_times(&hits, t_max)?;
    survival.estimator = "single-node".into();
    Ok(TauCurve { trials, box_side: spec.box_side, points, survival })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountEstimate {
    pub t: u64,
    pub mean: f64,
    pub se: f64,
}

/// `M(0, t-1)`: expected number of steps in `[0, t-1]` at which one uniform
/// node in `Q_L` detects the target, for `t = 1..=len(x)`.
pub fn estimate_m(
    spec: &DetectionTrialSpec,
    x: &Trajectory,
    trials: u64,
    policy: &RngPolicy,
) -> Result<Vec<CountEstimate>> {
    if trials == 0 || x.is_empty() {
        return Err(invalid("need at least one trial and a non-empty path"));
    }
    let t_max = x.len();
    let region = spec.region();
    let r2 = spec.params.r * spec.params.r;
    let s = spec.network.s();
    let per_trial: Vec<Vec<u32>> = run_trials(trials, |trial| {
        let mut rng = policy.stream("mstat", trial);
        let mut y: Vec<f64> =
            region.lo.iter().zip(&region.hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect();
        let mut steps = Vec::new();
        for i in 0..t_max {
            if i > 0 {
                for c in y.iter_mut() {
                    *c += s * rng.sample::<f64, _>(StandardNormal);
                }
            }
            if sq_dist(&y, x.at(i)) <= r2 {
                steps.push(i as u32);
            }
        }
        steps
    });
    cumulative_counts(&per_trial, t_max as u64, 0)
}

/// Mean and standard error of the cumulative count `#{steps < offset + t}`.
fn cumulative_counts(per_trial: &[Vec<u32>], t_max: u64, offset: u64) -> Result<Vec<CountEstimate>> {
    let n = per_trial.len() as f64;
    let mut running: Vec<u32> = vec![0; per_trial.len()];
    let mut cursor: Vec<usize> = vec![0; per_trial.len()];
    let mut out = Vec::with_capacity(t_max as usize);
    for t in 1..=t_max {
        let limit = (offset + t) as u32;
        for (k, steps) in per_trial.iter().enumerate() {
            while cursor[k] < steps.len() && steps[cursor[k]] < limit {
                running[k] += 1;
                cursor[k] += 1;
            }
        }
        let mean = running.iter().map(|&c| c as f64).sum::<f64>() / n;
        let var = running.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        out.push(CountEstimate { t, mean, se: (var / n).sqrt() });
    }
    Ok(out)
}

/// `M'(Y, i+1, i+t)` for windows `t = 1..=t_max`: expected number of
/// detection steps after a step at which the node sits at offset `y` from the
/// target. Both move according to their models.
pub fn estimate_m_prime(
    y: &Point,
    t_max: u64,
    network: &MotionModel,
    target: &MotionModel,
    trials: u64,
    policy: &RngPolicy,
    experiment: &str,
) -> Result<Vec<CountEstimate>> {
    let dim = y.dim();
    let r = crate::domain::derive_range(dim)?;
    if y.norm() > r {
        return Err(crate::error::Error::InvalidOffset { norm: y.norm(), range: r });
    }
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    if t_max == 0 {
        return Ok(Vec::new());
    }
    let r2 = r * r;
    let (s_node, s_target) = (network.s(), target.s());
    let per_trial: Vec<Vec<u32>> = run_trials(trials, |trial| {
        let mut rng = policy.stream(experiment, trial);
        let mut node = y.0.clone();
        let mut u = vec![0.0; dim];
        let mut steps = Vec::new();
        for j in 1..=t_max {
            for c in node.iter_mut() {
                *c += s_node * rng.sample::<f64, _>(StandardNormal);
            }
            if !matches!(target, MotionModel::Stationary) {
                for c in u.iter_mut() {
                    *c += s_target * rng.sample::<f64, _>(StandardNormal);
                }
            }
            if sq_dist(&node, &u) <= r2 {
                steps.push(j as u32);
            }
        }
        steps
    });
    cumulative_counts(&per_trial, t_max, 1)
}

/// Analytic `m_2(t) = sum_{j=1}^t (2 pi s^2 j)^{-d/2}`.
pub fn m2_bound(t: u64, s: f64, dim: usize) -> f64 {
    (1..=t).map(|j| (2.0 * std::f64::consts::PI * s * s * j as f64).powf(-(dim as f64) / 2.0)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SausagePoint {
    pub t: u64,
    pub volume: f64,
    pub se: f64,
}

fn cell_key(p: &[f64], side: f64) -> [i64; 4] {
    let mut key = [0i64; 4];
    for (k, c) in p.iter().enumerate().take(4) {
        key[k] = (c / side).floor() as i64;
    }
    key
}

/// `V(t) = E vol(union_{i<t} B_r(W_i))` for `t = 1..=t_max`, by hit-or-miss
/// probes in the bounding box of each sampled path.
pub fn sausage_oracle(
    t_max: u64,
    s: f64,
    dim: usize,
    paths: u64,
    probes: u64,
    policy: &RngPolicy,
) -> Result<Vec<SausagePoint>> {
    if t_max < 1 || paths == 0 || probes == 0 {
        return Err(invalid("sausage oracle needs t_max, paths and probes >= 1"));
    }
    if dim > 4 {
        return Err(invalid("sausage oracle supports d <= 4"));
    }
    let r = crate::domain::derive_range(dim)?;
    let r2 = r * r;
    let per_path: Vec<Vec<f64>> = run_trials(paths, |trial| {
        let mut rng = policy.stream("sausage", trial);
        let path =
            sample_target_trajectory(&MotionModel::Brownian { s }, t_max as usize, &Point::origin(dim), &mut rng)
                .expect("valid model");
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        let mut grid: HashMap<[i64; 4], Vec<u32>> = HashMap::new();
        for (i, p) in path.0.iter().enumerate() {
            for k in 0..dim {
                lo[k] = lo[k].min(p.0[k] - r);
                hi[k] = hi[k].max(p.0[k] + r);
            }
            grid.entry(cell_key(&p.0, r)).or_default().push(i as u32);
        }
        let vol: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
        let mut first_cover = vec![0u64; t_max as usize];
        let mut q = vec![0.0; dim];
        let offsets = 3usize.pow(dim as u32);
        for _ in 0..probes {
            for k in 0..dim {
                q[k] = lo[k] + (hi[k] - lo[k]) * rng.random::<f64>();
            }
            let base = cell_key(&q, r);
            let mut best = u32::MAX;
            for o in 0..offsets {
                let mut key = base;
                let mut rem = o;
                for slot in key.iter_mut().take(dim) {
                    *slot += (rem % 3) as i64 - 1;
                    rem /= 3;
                }
                if let Some(list) = grid.get(&key) {
                    for &i in list {
                        if i < best && sq_dist(&q, &path.0[i as usize].0) <= r2 {
                            best = i;
                        }
                    }
                }
            }
            if best != u32::MAX {
                first_cover[best as usize] += 1;
            }
        }
        let mut acc = 0u64;
        first_cover
            .iter()
            .map(|c| {
                acc += c;
                vol * acc as f64 / probes as f64
            })
            .collect()
    });
    let n = paths as f64;
    Ok((0..t_max as usize)
        .map(|i| {
            let mean = per_path.iter().map(|v| v[i]).sum::<f64>() / n;
            let var = per_path.iter().map(|v| (v[i] - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            SausagePoint { t: i as u64 + 1, volume: mean, se: (var / n).sqrt() }
        })
        .collect())
}
