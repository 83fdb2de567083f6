//! Percolation time of a tagged node, with the detection time of the same
//! trial recorded alongside.

use log::warn;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::{ModelParams, Point, SimDomain};
use crate::error::{invalid, Result};
use crate::geo_graph::{build_graph, crossing_components, giant_component, SubCube};
use crate::harness::run_trials;
use crate::motion::{step_in_place, Drifts, MotionModel};
use crate::point_process::{sample_ppp, IdSource, NodeEnsemble, NodeId, Region};
use crate::rng::RngPolicy;
use crate::stats::survival::SurvivalCurve;

/// Upper end of the empirical critical-intensity interval in two dimensions.
pub const LAMBDA_C_UPPER_2D: f64 = 4.515;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Proxy {
    /// Member of a crossing component of a randomly shifted sub-cube around the node.
    Crossing,
    /// Member of the largest component of the whole torus.
    Giant,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PercolationTrialSpec {
    pub params: ModelParams,
    pub domain: SimDomain,
    pub proxy: Proxy,
    /// Side of the sub-cube `S_i`.
    pub sub_side: f64,
    /// Observe every `obs_interval` steps.
    pub obs_interval: u64,
    pub t_max: u64,
}

impl PercolationTrialSpec {
    pub fn new(params: ModelParams, domain: SimDomain, proxy: Proxy, t_max: u64) -> Result<Self> {
        let spec = PercolationTrialSpec {
            params,
            domain,
            proxy,
            sub_side: domain.side() / 3.0,
            obs_interval: 1,
            t_max,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.domain.dim != self.params.dim {
            return Err(invalid("domain and model dimensions differ"));
        }
        if !(self.sub_side > 0.0) || self.sub_side > self.domain.side() {
            return Err(invalid(format!(
                "sub-cube side {} must lie in (0, {}]",
                self.sub_side,
                self.domain.side()
            )));
        }
        if self.obs_interval < 1 || self.t_max < 1 {
            return Err(invalid("observation interval and t_max must be at least 1"));
        }
        Ok(())
    }

    /// Warning text when the intensity is not above the critical interval.
    pub fn threshold_warning(&self) -> Option<String> {
        (self.params.dim == 2 && self.params.lambda <= LAMBDA_C_UPPER_2D).then(|| {
            format!(
                "lambda = {} is not above the critical interval (4.508, 4.515); no infinite component is expected",
                self.params.lambda
            )
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PercolationTrial {
    pub t_det: Option<u64>,
    pub t_perc: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PercolationResult {
    pub percolation: SurvivalCurve,
    pub detection: SurvivalCurve,
    /// Trials with `T_det > T_perc`; zero by construction.
    pub domination_violations: u64,
    pub trials: Vec<PercolationTrial>,
}

const TAGGED: NodeId = NodeId { trial: u64::MAX, serial: u64::MAX };

fn tagged_has_neighbour(ens: &NodeEnsemble, u: &[f64], r2: f64, domain: &SimDomain) -> bool {
    ens.positions().any(|p| domain.sq_dist(p, u) <= r2)
}

fn in_crossing(ens: &NodeEnsemble, u: &[f64], spec: &PercolationTrialSpec, offset: &[f64]) -> Result<bool> {
    let dim = spec.params.dim;
    let center: Vec<f64> = u.iter().zip(offset).map(|(a, b)| a - b).collect();
    let half = spec.sub_side / 2.0;
    // nodes of S_i in coordinates relative to its center; the tagged node first
    let mut local = NodeEnsemble::empty(dim, ens.timestamp);
    local.push(TAGGED, &spec.domain.displacement(&center, u));
    for i in 0..ens.len() {
        let d = spec.domain.displacement(&center, ens.position(i));
        if d.iter().all(|c| c.abs() <= half) {
            local.push(ens.id(i), &d);
        }
    }
    let open = SimDomain::new_box(dim, spec.sub_side)?;
    let g = build_graph(&local, spec.params.r, &open)?;
    let q = crossing_components(&g, &SubCube { center: Point::origin(dim), side: spec.sub_side })?;
    Ok(q.contains_index(0))
}

fn in_giant(ens: &NodeEnsemble, u: &[f64], spec: &PercolationTrialSpec) -> Result<bool> {
    let mut all = ens.clone();
    all.push(TAGGED, u);
    let g = build_graph(&all, spec.params.r, &spec.domain)?;
    let giant = giant_component(&g)?;
    Ok(g.label(all.len() - 1) == giant.label)
}

/// The network of `trial` at step 0.
pub fn initial_ensemble(spec: &PercolationTrialSpec, policy: &RngPolicy, trial: u64) -> Result<NodeEnsemble> {
    let mut rng = policy.labelled("percolate", "network", trial);
    sample_ppp(spec.params.lambda, &Region::of_domain(&spec.domain), &mut IdSource::new(trial), &mut rng)
}

fn percolation_trial(spec: &PercolationTrialSpec, policy: &RngPolicy, trial: u64) -> Result<PercolationTrial> {
    let dim = spec.params.dim;
    let mut rng = policy.labelled("percolate", "network", trial);
    let mut u_rng = policy.labelled("percolate", "tagged", trial);
    let mut ens = sample_ppp(spec.params.lambda, &Region::of_domain(&spec.domain), &mut IdSource::new(trial), &mut rng)?;
    let mut u = spec.domain.center().0;
    let model = MotionModel::Brownian { s: spec.params.s };
    let drifts = Drifts::none();
    let r2 = spec.params.r * spec.params.r;
    let mut t_det = None;
    for i in 0..spec.t_max {
        if i > 0 {
            step_in_place(&mut ens, &model, &drifts, &spec.domain, &mut rng)?;
            for c in u.iter_mut() {
                *c += spec.params.s * u_rng.sample::<f64, _>(StandardNormal);
            }
            spec.domain.wrap_in_place(&mut u);
        }
        if i % spec.obs_interval != 0 {
            continue;
        }
        // fresh shift of S_i drawn at every observation, whether or not it is used
        let offset: Vec<f64> =
            (0..dim).map(|_| (u_rng.random::<f64>() - 0.5) * spec.sub_side).collect();
        if !tagged_has_neighbour(&ens, &u, r2, &spec.domain) {
            continue;
        }
        t_det.get_or_insert(i);
        let member = match spec.proxy {
            Proxy::Crossing => in_crossing(&ens, &u, spec, &offset)?,
            Proxy::Giant => in_giant(&ens, &u, spec)?,
        };
        if member {
            return Ok(PercolationTrial { t_det, t_perc: Some(i) });
        }
    }
    Ok(PercolationTrial { t_det, t_perc: None })
}

pub fn run_percolation(spec: &PercolationTrialSpec, trials: u64, policy: &RngPolicy) -> Result<PercolationResult> {
    spec.validate()?;
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    if let Some(w) = spec.threshold_warning() {
        warn!("{w}");
    }
    let results = run_trials(trials, |trial| percolation_trial(spec, policy, trial))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let perc: Vec<Option<u64>> = results.iter().map(|r| r.t_perc).collect();
    let det: Vec<Option<u64>> = results.iter().map(|r| r.t_det).collect();
    let domination_violations = results
        .iter()
        .filter(|r| match (r.t_det, r.t_perc) {
            (None, Some(_)) => true,
            (Some(a), Some(b)) => a > b,
            _ => false,
        })
        .count() as u64;
    Ok(PercolationResult {
        percolation: SurvivalCurve::from_event_times(&perc, spec.t_max)?,
        detection: SurvivalCurve::from_event_times(&det, spec.t_max)?,
        domination_violations,
        trials: results,
    })
}
