//! Broadcast on the torus: a message floods whole components at every step.

use std::collections::HashSet;

use rand::Rng;
use serde::Serialize;

use crate::domain::{ModelParams, SimDomain};
use crate::error::{invalid, Result};
use crate::geo_graph::{build_graph, giant_component};
use crate::harness::run_trials;
use crate::motion::{step_in_place, Drifts, MotionModel};
use crate::point_process::{sample_ppp, IdSource, NodeEnsemble, NodeId, Region};
use crate::rng::{RngPolicy, TrialRng};
use crate::stats::survival::SurvivalCurve;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BroadcastTrialSpec {
    pub params: ModelParams,
    /// Expected number of nodes; the torus has volume `n / lambda`.
    pub n: f64,
    pub t_max: u64,
}

impl BroadcastTrialSpec {
    pub fn new(params: ModelParams, n: f64, t_max: u64) -> Result<Self> {
        let spec = BroadcastTrialSpec { params, n, t_max };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n >= 2.0) {
            return Err(invalid(format!("broadcast needs n >= 2, got {}", self.n)));
        }
        if self.t_max < 1 {
            return Err(invalid("t_max must be at least 1"));
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<SimDomain> {
        SimDomain::torus_for_nodes(self.params.dim, self.n, self.params.lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BroadcastTrial {
    pub t_bc: Option<u64>,
    pub nodes: usize,
    /// Empty ensembles drawn (and redrawn) before this trial's ensemble.
    pub resamples: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BroadcastResult {
    pub trials: Vec<BroadcastTrial>,
    pub curve: SurvivalCurve,
    /// Median of `T_bc` with censored trials counted as infinite; `None` if
    /// half or more are censored.
    pub median: Option<f64>,
    pub resampled_trials: u64,
}

fn nonempty_ppp(spec: &BroadcastTrialSpec, domain: &SimDomain, trial: u64, rng: &mut TrialRng) -> Result<(NodeEnsemble, u32)> {
    let region = Region::of_domain(domain);
    let mut resamples = 0;
    loop {
        let ens = sample_ppp(spec.params.lambda, &region, &mut IdSource::new(trial), rng)?;
        if !ens.is_empty() {
            return Ok((ens, resamples));
        }
        resamples += 1;
    }
}

/// The network of `trial` at step 0.
pub fn initial_ensemble(spec: &BroadcastTrialSpec, policy: &RngPolicy, trial: u64) -> Result<NodeEnsemble> {
    let domain = spec.domain()?;
    let mut rng = policy.stream("broadcast", trial);
    Ok(nonempty_ppp(spec, &domain, trial, &mut rng)?.0)
}

/// Runs the protocol on `ens` from `originator`; first step after whose
/// closure every node is informed.
pub fn broadcast_on(
    mut ens: NodeEnsemble,
    originator: usize,
    params: &ModelParams,
    domain: &SimDomain,
    t_max: u64,
    rng: &mut TrialRng,
) -> Result<Option<u64>> {
    let model = MotionModel::Brownian { s: params.s };
    let mut informed = vec![false; ens.len()];
    informed[originator] = true;
    let mut count = 1;
    for i in 0..t_max {
        if i > 0 {
            step_in_place(&mut ens, &model, &Drifts::none(), domain, rng)?;
        }
        let g = build_graph(&ens, params.r, domain)?;
        let mut hot = vec![false; ens.len()];
        for (v, &inf) in informed.iter().enumerate() {
            if inf {
                hot[g.label(v)] = true;
            }
        }
        for (v, inf) in informed.iter_mut().enumerate() {
            if !*inf && hot[g.label(v)] {
                *inf = true;
                count += 1;
            }
        }
        if count == ens.len() {
            return Ok(Some(i));
        }
    }
    Ok(None)
}

fn broadcast_trial(spec: &BroadcastTrialSpec, domain: &SimDomain, policy: &RngPolicy, trial: u64) -> Result<BroadcastTrial> {
    let mut rng = policy.stream("broadcast", trial);
    let (ens, resamples) = nonempty_ppp(spec, domain, trial, &mut rng)?;
    let originator = rng.random_range(0..ens.len());
    let nodes = ens.len();
    let t_bc = broadcast_on(ens, originator, &spec.params, domain, spec.t_max, &mut rng)?;
    Ok(BroadcastTrial { t_bc, nodes, resamples })
}

/// Median with `None` entries treated as `+inf`.
pub fn censored_median(times: &[Option<u64>]) -> Option<f64> {
    let mut v: Vec<f64> = times.iter().map(|t| t.map_or(f64::INFINITY, |x| x as f64)).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let m = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
    m.is_finite().then_some(m)
}

pub fn run_broadcast(spec: &BroadcastTrialSpec, trials: u64, policy: &RngPolicy) -> Result<BroadcastResult> {
    spec.validate()?;
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    let domain = spec.domain()?;
    let results = run_trials(trials, |trial| broadcast_trial(spec, &domain, policy, trial))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let times: Vec<Option<u64>> = results.iter().map(|r| r.t_bc).collect();
    Ok(BroadcastResult {
        curve: SurvivalCurve::from_event_times(&times, spec.t_max)?,
        median: censored_median(&times),
        resampled_trials: results.iter().filter(|r| r.resamples > 0).count() as u64,
        trials: results,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GiantOverlap {
    pub pairs: u64,
    pub overlapping: u64,
    pub frequency: f64,
}

/// Frequency with which the giant components at consecutive steps share a node.
pub fn giant_overlap(params: &ModelParams, n: f64, steps: u64, trials: u64, policy: &RngPolicy) -> Result<GiantOverlap> {
    if steps < 2 || trials == 0 {
        return Err(invalid("need at least two steps and one trial"));
    }
    let domain = SimDomain::torus_for_nodes(params.dim, n, params.lambda)?;
    let model = MotionModel::Brownian { s: params.s };
    let per_trial: Vec<Result<u64>> = run_trials(trials, |trial| {
        let mut rng = policy.stream("giant-overlap", trial);
        let spec = BroadcastTrialSpec { params: *params, n, t_max: steps };
        let (mut ens, _) = nonempty_ppp(&spec, &domain, trial, &mut rng)?;
        let mut prev: Option<HashSet<NodeId>> = None;
        let mut hits = 0;
        for i in 0..steps {
            if i > 0 {
                step_in_place(&mut ens, &model, &Drifts::none(), &domain, &mut rng)?;
            }
            let g = build_graph(&ens, params.r, &domain)?;
            let giant = giant_component(&g)?;
            let members: HashSet<NodeId> =
                (0..g.len()).filter(|&v| g.label(v) == giant.label).map(|v| g.id(v)).collect();
            if let Some(p) = &prev {
                if !p.is_disjoint(&members) {
                    hits += 1;
                }
            }
            prev = Some(members);
        }
        Ok(hits)
    });
    let overlapping: u64 = per_trial.into_iter().sum::<Result<u64>>()?;
    let pairs = trials * (steps - 1);
    Ok(GiantOverlap { pairs, overlapping, frequency: overlapping as f64 / pairs as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Point;

    #[test]
    fn connected_start_finishes_at_zero() {
        let params = ModelParams::new(2, 1.0, 1.0).unwrap();
        let dom = SimDomain::new_torus(2, 5.0).unwrap();
        let pts: Vec<Point> = (0..4).map(|i| Point(vec![1.0 + 0.3 * i as f64, 1.0])).collect();
        let ens = NodeEnsemble::from_points(2, &pts, &mut IdSource::new(0)).unwrap();
        let mut rng = RngPolicy::new(1).stream("b", 0);
        assert_eq!(broadcast_on(ens, 2, &params, &dom, 10, &mut rng).unwrap(), Some(0));
    }

    #[test]
    fn frozen_disconnected_pair_is_censored() {
        let params = ModelParams::new(2, 1.0, 0.0).unwrap();
        let dom = SimDomain::new_torus(2, 5.0).unwrap();
        let pts = [Point(vec![0.5, 0.5]), Point(vec![3.0, 3.0])];
        let ens = NodeEnsemble::from_points(2, &pts, &mut IdSource::new(0)).unwrap();
        let mut rng = RngPolicy::new(1).stream("b", 0);
        assert_eq!(broadcast_on(ens, 0, &params, &dom, 20, &mut rng).unwrap(), None);
    }

    #[test]
    fn censored_median_rules() {
        assert_eq!(censored_median(&[Some(3), Some(1), Some(2)]), Some(2.0));
        assert_eq!(censored_median(&[Some(3), None, Some(1), None]), None);
        assert_eq!(censored_median(&[Some(3), None, Some(1)]), Some(3.0));
    }

    #[test]
    fn small_broadcast_runs() {
        let params = ModelParams::new(2, 6.0, 1.0).unwrap();
        let spec = BroadcastTrialSpec::new(params, 100.0, 200).unwrap();
        let res = run_broadcast(&spec, 20, &RngPolicy::new(3)).unwrap();
        assert!(res.median.is_some());
        assert!(BroadcastTrialSpec::new(params, 1.0, 10).is_err());
    }
}
