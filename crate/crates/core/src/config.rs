//! Experiment configuration: strict JSON parsing that reports every problem
//! at once.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::coupling::{CouplingSpec, InitialSet};
use crate::domain::{ModelParams, SimDomain};
use crate::error::{Error, Result};
use crate::experiments::detection::Estimator;
use crate::experiments::percolation::{Proxy, LAMBDA_C_UPPER_2D};
use crate::motion::MotionModel;
use crate::stats::fit::Transform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Detect,
    Tau,
    Mstat,
    Sausage,
    Percolate,
    Broadcast,
    Coupling,
    Diagnose,
    Bounds,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::Detect,
        ExperimentKind::Tau,
        ExperimentKind::Mstat,
        ExperimentKind::Sausage,
        ExperimentKind::Percolate,
        ExperimentKind::Broadcast,
        ExperimentKind::Coupling,
        ExperimentKind::Diagnose,
        ExperimentKind::Bounds,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Detect => "detect",
            ExperimentKind::Tau => "tau",
            ExperimentKind::Mstat => "mstat",
            ExperimentKind::Sausage => "sausage",
            ExperimentKind::Percolate => "percolate",
            ExperimentKind::Broadcast => "broadcast",
            ExperimentKind::Coupling => "coupling",
            ExperimentKind::Diagnose => "diagnose",
            ExperimentKind::Bounds => "bounds",
        }
    }

    /// Key of the kind-specific section.
    fn section_key(&self) -> Option<&'static str> {
        match self {
            ExperimentKind::Detect => Some("detection"),
            ExperimentKind::Percolate => Some("percolation"),
            ExperimentKind::Bounds => None,
            other => Some(other.name()),
        }
    }

    fn needs_lambda(&self) -> bool {
        !matches!(self, ExperimentKind::Coupling | ExperimentKind::Bounds | ExperimentKind::Sausage)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DomainSpec {
    Box { side: f64 },
    Torus { side: f64 },
    /// Torus sized to hold `n` nodes in expectation.
    TorusNodes { n: f64 },
}

impl DomainSpec {
    pub fn build(&self, dim: usize, lambda: f64) -> Result<SimDomain> {
        match *self {
            DomainSpec::Box { side } => SimDomain::new_box(dim, side),
            DomainSpec::Torus { side } => SimDomain::new_torus(dim, side),
            DomainSpec::TorusNodes { n } => SimDomain::torus_for_nodes(dim, n, lambda),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetSpec {
    Model { model: MotionModel },
    /// Explicit path, one point per step.
    Fixed { points: Vec<Vec<f64>> },
    /// One Brownian path of mobility `s` drawn from `path_seed` and reused by every trial.
    SampledPath { s: f64, path_seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionSection {
    pub t_max: u64,
    pub target: TargetSpec,
    pub network: Option<MotionModel>,
    pub estimator: Estimator,
    pub box_side: Option<f64>,
    pub doubling_check: bool,
    pub fit: Option<Transform>,
    pub fit_range: Option<(u64, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MPrimeSection {
    pub offsets: Vec<Vec<f64>>,
    pub t_max: u64,
    pub target: MotionModel,
    pub trials: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MstatSection {
    pub detection: DetectionSection,
    pub m_prime: Option<MPrimeSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SausageSection {
    pub t_max: u64,
    pub probes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PercolationSection {
    pub t_max: u64,
    pub proxy: Proxy,
    pub sub_side: Option<f64>,
    pub obs_interval: u64,
    pub fit_range: Option<(u64, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapSection {
    pub steps: u64,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BroadcastSection {
    pub t_max: u64,
    pub giant_overlap: Option<OverlapSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingSection {
    pub spec: CouplingSpec,
    pub initial: InitialSet,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnoseSection {
    pub ell: f64,
    pub xi: f64,
    pub t: u64,
    pub delta: u64,
    pub box_side: Option<f64>,
    pub escape_trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Section {
    Detection(DetectionSection),
    Tau(DetectionSection),
    Mstat(MstatSection),
    Sausage(SausageSection),
    Percolation(PercolationSection),
    Broadcast(BroadcastSection),
    Coupling(CouplingSection),
    Diagnose(DiagnoseSection),
    Bounds,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub dim: usize,
    /// `None` for kinds that do not use an intensity.
    pub params: Option<ModelParams>,
    pub s: f64,
    pub domain: Option<DomainSpec>,
    pub seed: u64,
    pub trials: u64,
    pub section: Section,
    pub warnings: Vec<String>,
    /// The effective configuration document, echoed into the manifest.
    pub document: Value,
}

impl ExperimentConfig {
    pub fn params(&self) -> Result<ModelParams> {
        self.params.ok_or_else(|| Error::Config(vec!["lambda is required for this experiment".into()]))
    }
}

/// Overrides applied on top of the file before validation.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub kind: Option<ExperimentKind>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
}

struct Fields<'a> {
    path: String,
    map: &'a Map<String, Value>,
    seen: Vec<&'static str>,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

impl<'a> Fields<'a> {
    fn new(path: &str, v: &'a Value, errs: &mut Vec<String>) -> Option<Self> {
        match v.as_object() {
            Some(map) => Some(Fields { path: path.to_string(), map, seen: Vec::new() }),
            None => {
                errs.push(format!("{}: expected an object", if path.is_empty() { "<root>" } else { path }));
                None
            }
        }
    }

    fn get(&mut self, key: &'static str) -> Option<&'a Value> {
        self.seen.push(key);
        self.map.get(key).filter(|v| !v.is_null())
    }

    fn at(&self, key: &str) -> String {
        join(&self.path, key)
    }

    fn f64(&mut self, key: &'static str, required: bool, errs: &mut Vec<String>) -> Option<f64> {
        match self.get(key) {
            None => {
                if required {
                    errs.push(format!("{}: missing", self.at(key)));
                }
                None
            }
            Some(v) => match v.as_f64() {
                Some(x) => Some(x),
                None => {
                    errs.push(format!("{}: expected a number, got {v}", self.at(key)));
                    None
                }
            },
        }
    }

    fn u64(&mut self, key: &'static str, required: bool, errs: &mut Vec<String>) -> Option<u64> {
        match self.get(key) {
            None => {
                if required {
                    errs.push(format!("{}: missing", self.at(key)));
                }
                None
            }
            Some(v) => match v.as_u64() {
                Some(x) => Some(x),
                None => {
                    errs.push(format!("{}: expected a non-negative integer, got {v}", self.at(key)));
                    None
                }
            },
        }
    }

    fn count(&mut self, key: &'static str, required: bool, errs: &mut Vec<String>) -> Option<u64> {
        let v = self.u64(key, required, errs);
        if v == Some(0) {
            errs.push(format!("{}: must be at least 1", self.at(key)));
            return None;
        }
        v
    }

    fn positive(&mut self, key: &'static str, required: bool, errs: &mut Vec<String>) -> Option<f64> {
        let v = self.f64(key, required, errs);
        positive(errs, &self.at(key), v)
    }

    fn bool(&mut self, key: &'static str, errs: &mut Vec<String>) -> Option<bool> {
        let v = self.get(key)?;
        let b = v.as_bool();
        if b.is_none() {
            errs.push(format!("{}: expected true or false, got {v}", self.at(key)));
        }
        b
    }

    fn str(&mut self, key: &'static str, required: bool, errs: &mut Vec<String>) -> Option<&'a str> {
        match self.get(key) {
            None => {
                if required {
                    errs.push(format!("{}: missing", self.at(key)));
                }
                None
            }
            Some(v) => {
                let s = v.as_str();
                if s.is_none() {
                    errs.push(format!("{}: expected a string, got {v}", self.at(key)));
                }
                s
            }
        }
    }

    fn object(&mut self, key: &'static str, required: bool, errs: &mut Vec<String>) -> Option<Fields<'a>> {
        let path = self.at(key);
        match self.get(key) {
            None => {
                if required {
                    errs.push(format!("{path}: missing"));
                }
                None
            }
            Some(v) => Fields::new(&path, v, errs),
        }
    }

    fn points(&mut self, key: &'static str, required: bool, errs: &mut Vec<String>) -> Option<Vec<Vec<f64>>> {
        let path = self.at(key);
        let v = match self.get(key) {
            None => {
                if required {
                    errs.push(format!("{path}: missing"));
                }
                return None;
            }
            Some(v) => v,
        };
        let parsed = v.as_array().and_then(|rows| {
            rows.iter()
                .map(|row| row.as_array().and_then(|xs| xs.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>()))
                .collect::<Option<Vec<_>>>()
        });
        if parsed.is_none() {
            errs.push(format!("{path}: expected an array of coordinate arrays"));
        }
        parsed
    }

    fn range(&mut self, key: &'static str, errs: &mut Vec<String>) -> Option<(u64, u64)> {
        let path = self.at(key);
        let v = self.get(key)?;
        match v.as_array().map(|a| a.iter().map(Value::as_u64).collect::<Vec<_>>()) {
            Some(a) if a.len() == 2 && a.iter().all(Option::is_some) && a[0] <= a[1] => Some((a[0]?, a[1]?)),
            _ => {
                errs.push(format!("{path}: expected [t_lo, t_hi] with t_lo <= t_hi"));
                None
            }
        }
    }

    fn finish(self, errs: &mut Vec<String>) {
        let mut unknown: Vec<&String> = self.map.keys().filter(|k| !self.seen.contains(&k.as_str())).collect();
        unknown.sort();
        for k in unknown {
            errs.push(format!("{}: unknown key", join(&self.path, k)));
        }
    }
}

fn positive(errs: &mut Vec<String>, path: &str, v: Option<f64>) -> Option<f64> {
    match v {
        Some(x) if !(x > 0.0) || !x.is_finite() => {
            errs.push(format!("{path}: must be positive, got {x}"));
            None
        }
        other => other,
    }
}

fn parse_motion(f: Option<Fields>, default_s: f64, errs: &mut Vec<String>) -> Option<MotionModel> {
    let mut f = f?;
    let kind = f.str("kind", true, errs);
    let model = match kind {
        Some("stationary") => Some(MotionModel::Stationary),
        Some("brownian") => {
            let s = f.f64("s", false, errs).unwrap_or(default_s);
            Some(MotionModel::Brownian { s })
        }
        Some("brownian-with-drift") => {
            let s = f.f64("s", false, errs).unwrap_or(default_s);
            f.f64("gamma", true, errs).map(|gamma| MotionModel::BrownianWithDrift { s, gamma })
        }
        Some(other) => {
            errs.push(format!(
                "{}: unknown motion '{other}' (stationary, brownian, brownian-with-drift)",
                f.at("kind")
            ));
            None
        }
        None => None,
    };
    let path = f.path.clone();
    f.finish(errs);
    match model {
        Some(m) => match m.validate() {
            Ok(()) => Some(m),
            Err(e) => {
                errs.push(format!("{path}: {e}"));
                None
            }
        },
        None => None,
    }
}

fn parse_target(f: Option<Fields>, s: f64, dim: usize, errs: &mut Vec<String>) -> Option<TargetSpec> {
    let Some(mut f) = f else {
        return Some(TargetSpec::Model { model: MotionModel::Brownian { s } });
    };
    let target = match f.str("kind", true, errs) {
        Some("fixed") => {
            let points = f.points("points", true, errs);
            let path = f.at("points");
            f.finish(errs);
            let points = points?;
            if points.is_empty() || points.iter().any(|p| p.len() != dim) {
                errs.push(format!("{path}: need at least one point, each with {dim} coordinates"));
                return None;
            }
            return Some(TargetSpec::Fixed { points });
        }
        Some("sampled-path") => {
            let ps = f.f64("s", false, errs).unwrap_or(s);
            let seed = f.u64("path_seed", true, errs);
            f.finish(errs);
            return seed.map(|path_seed| TargetSpec::SampledPath { s: ps, path_seed });
        }
        Some(_) => {
            // a motion model; re-walk the same object
            let path = f.path.clone();
            let map = f.map;
            drop(f);
            let inner = Fields { path, map, seen: Vec::new() };
            parse_motion(Some(inner), s, errs).map(|model| TargetSpec::Model { model })
        }
        None => {
            f.finish(errs);
            None
        }
    };
    target
}

fn parse_transform(name: Option<&str>, dim: usize, path: &str, errs: &mut Vec<String>) -> Option<Transform> {
    match name? {
        "t" => Some(Transform::Linear),
        "t/log t" => Some(Transform::TOverLogT),
        "stretched" => Some(Transform::Stretched { dim }),
        other => {
            errs.push(format!("{path}: unknown coordinate '{other}' (t, t/log t, stretched)"));
            None
        }
    }
}

fn parse_detection(mut f: Fields, s: f64, dim: usize, errs: &mut Vec<String>) -> Option<DetectionSection> {
    let t_max = f.count("t_max", true, errs);
    let target_obj = f.object("target", false, errs);
    let target = parse_target(target_obj, s, dim, errs);
    let net_obj = f.object("network", false, errs);
    let network = if net_obj.is_some() { parse_motion(net_obj, s, errs) } else { None };
    let estimator = match f.str("estimator", false, errs) {
        None | Some("direct") => Some(Estimator::Direct),
        Some("poisson-void") => Some(Estimator::PoissonVoid),
        Some(other) => {
            errs.push(format!("{}: unknown estimator '{other}' (direct, poisson-void)", f.at("estimator")));
            None
        }
    };
    let box_side = f.positive("box_side", false, errs);
    let doubling_check = f.bool("doubling_check", errs).unwrap_or(true);
    let fit_path = f.at("fit");
    let fit_name = f.str("fit", false, errs);
    let fit = parse_transform(fit_name, dim, &fit_path, errs);
    let fit_range = f.range("fit_range", errs);
    f.finish(errs);
    Some(DetectionSection {
        t_max: t_max?,
        target: target?,
        network,
        estimator: estimator?,
        box_side,
        doubling_check,
        fit,
        fit_range,
    })
}

fn parse_domain(f: Option<Fields>, errs: &mut Vec<String>) -> Option<DomainSpec> {
    let mut f = f?;
    let kind = f.str("kind", true, errs);
    let side = f.f64("side", false, errs);
    let n = f.f64("n", false, errs);
    let path = f.path.clone();
    f.finish(errs);
    match (kind, side, n) {
        (Some("box"), Some(side), None) => positive(errs, &path, Some(side)).map(|side| DomainSpec::Box { side }),
        (Some("torus"), Some(side), None) => positive(errs, &path, Some(side)).map(|side| DomainSpec::Torus { side }),
        (Some("torus"), None, Some(n)) => positive(errs, &path, Some(n)).map(|n| DomainSpec::TorusNodes { n }),
        (Some("box") | Some("torus"), _, _) => {
            errs.push(format!("{path}: give exactly one of side or n (n only for a torus)"));
            None
        }
        (Some(other), _, _) => {
            errs.push(format!("{path}.kind: unknown domain '{other}' (box, torus)"));
            None
        }
        (None, _, _) => None,
    }
}

fn parse_section(
    kind: ExperimentKind,
    f: Option<Fields>,
    s: f64,
    dim: usize,
    lambda: Option<f64>,
    errs: &mut Vec<String>,
) -> Option<Section> {
    if kind == ExperimentKind::Bounds {
        if let Some(f) = f {
            f.finish(errs);
        }
        return Some(Section::Bounds);
    }
    let mut f = f?;
    let section = match kind {
        ExperimentKind::Detect => parse_detection(f, s, dim, errs).map(Section::Detection),
        ExperimentKind::Tau => parse_detection(f, s, dim, errs).map(Section::Tau),
        ExperimentKind::Mstat => {
            let mp = f.object("m_prime", false, errs);
            let m_prime = match mp {
                None => None,
                Some(mut g) => {
                    let offsets = g.points("offsets", true, errs);
                    let t_max = g.count("t_max", true, errs);
                    let tobj = g.object("target", false, errs);
                    let target = if tobj.is_some() { parse_motion(tobj, s, errs) } else { Some(MotionModel::Stationary) };
                    let trials = g.count("trials", false, errs);
                    let path = g.at("offsets");
                    g.finish(errs);
                    if let Some(o) = &offsets {
                        if o.is_empty() || o.iter().any(|p| p.len() != dim) {
                            errs.push(format!("{path}: need at least one offset with {dim} coordinates"));
                        }
                    }
                    match (offsets, t_max, target) {
                        (Some(offsets), Some(t_max), Some(target)) => Some(MPrimeSection { offsets, t_max, target, trials }),
                        _ => None,
                    }
                }
            };
            // the remaining keys are the detection fields
            let map = f.map;
            let mut seen = f.seen.clone();
            seen.retain(|k| *k == "m_prime");
            let rest = Fields { path: f.path.clone(), map, seen };
            drop(f);
            parse_detection(rest, s, dim, errs).map(|detection| Section::Mstat(MstatSection { detection, m_prime }))
        }
        ExperimentKind::Sausage => {
            let t_max = f.count("t_max", true, errs);
            let probes = f.count("probes", true, errs);
            f.finish(errs);
            Some(Section::Sausage(SausageSection { t_max: t_max?, probes: probes? }))
        }
        ExperimentKind::Percolate => {
            let t_max = f.count("t_max", true, errs);
            let proxy = match f.str("proxy", false, errs) {
                None | Some("crossing") => Some(Proxy::Crossing),
                Some("giant") => Some(Proxy::Giant),
                Some(other) => {
                    errs.push(format!("{}: unknown proxy '{other}' (crossing, giant)", f.at("proxy")));
                    None
                }
            };
            let sub_side = f.positive("sub_side", false, errs);
            let obs_interval = f.count("obs_interval", false, errs).unwrap_or(1);
            let fit_range = f.range("fit_range", errs);
            f.finish(errs);
            Some(Section::Percolation(PercolationSection { t_max: t_max?, proxy: proxy?, sub_side, obs_interval, fit_range }))
        }
        ExperimentKind::Broadcast => {
            let t_max = f.count("t_max", true, errs);
            let giant_overlap = match f.object("giant_overlap", false, errs) {
                None => None,
                Some(mut g) => {
                    let steps = g.u64("steps", true, errs);
                    let trials = g.count("trials", true, errs);
                    if matches!(steps, Some(x) if x < 2) {
                        errs.push(format!("{}: must be at least 2", g.at("steps")));
                    }
                    g.finish(errs);
                    match (steps, trials) {
                        (Some(steps), Some(trials)) if steps >= 2 => Some(OverlapSection { steps, trials }),
                        _ => None,
                    }
                }
            };
            f.finish(errs);
            Some(Section::Broadcast(BroadcastSection { t_max: t_max?, giant_overlap }))
        }
        ExperimentKind::Coupling => {
            let k = f.f64("k", true, errs);
            let k_inner = f.f64("k_inner", true, errs);
            let ell = f.f64("ell", true, errs);
            let beta = f.f64("beta", true, errs);
            let eps = f.f64("eps", true, errs);
            let c1 = f.f64("c1", false, errs).unwrap_or(16.0);
            let c2 = f.f64("c2", false, errs).unwrap_or(8.0);
            let delta = f.count("delta", false, errs);
            let initial = match f.object("initial", false, errs) {
                None => beta.zip(eps).map(|(b, e)| InitialSet::PoissonDense { intensity: b / (1.0 - e) }),
                Some(mut g) => {
                    let out = match g.str("kind", true, errs) {
                        Some("poisson-dense") => g.positive("intensity", true, errs)
                            .map(|intensity| InitialSet::PoissonDense { intensity }),
                        Some("minimal") => Some(InitialSet::Minimal),
                        Some(other) => {
                            errs.push(format!("{}: unknown initial set '{other}' (poisson-dense, minimal)", g.at("kind")));
                            None
                        }
                        None => None,
                    };
                    g.finish(errs);
                    out
                }
            };
            let path = f.path.clone();
            f.finish(errs);
            let (k, k_inner, ell, beta, eps) = (k?, k_inner?, ell?, beta?, eps?);
            let delta = match delta {
                Some(d) => d,
                None if eps > 0.0 && eps < 1.0 && s > 0.0 => CouplingSpec::default_delta(ell, s, eps, c1),
                None => 1,
            };
            let spec = CouplingSpec { k, k_inner, ell, beta, eps, delta, s, dim, c1, c2 };
            if let Err(Error::Config(list)) = spec.validate() {
                errs.extend(list.into_iter().map(|e| format!("{path}: {e}")));
                return None;
            }
            Some(Section::Coupling(CouplingSection { spec, initial: initial? }))
        }
        ExperimentKind::Diagnose => {
            let ell = f.positive("ell", true, errs);
            let xi = f.f64("xi", true, errs);
            if matches!(xi, Some(x) if !(0.0..=1.0).contains(&x)) {
                errs.push(format!("{}: must lie in [0, 1]", f.at("xi")));
            }
            let t = f.count("t", true, errs);
            let delta = f.count("delta", true, errs);
            let box_side = f.positive("box_side", false, errs);
            let escape_trials = f.count("escape_trials", false, errs);
            f.finish(errs);
            let _ = lambda;
            Some(Section::Diagnose(DiagnoseSection {
                ell: ell?,
                xi: xi.filter(|x| (0.0..=1.0).contains(x))?,
                t: t?,
                delta: delta?,
                box_side,
                escape_trials: escape_trials.unwrap_or(1000),
            }))
        }
        ExperimentKind::Bounds => unreachable!(),
    };
    section
}

/// Parses a configuration document, or the `config` member of a manifest.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_with(text, &Overrides::default())
}

pub fn parse_config_with(text: &str, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut doc: Value = serde_json::from_str(text).map_err(|e| Error::Config(vec![format!("not valid JSON: {e}")]))?;
    if let Some(inner) = doc.get("config").filter(|_| doc.get("manifest_version").is_some()) {
        doc = inner.clone();
    }
    let mut errs = Vec::new();
    if let Some(map) = doc.as_object_mut() {
        if let Some(k) = overrides.kind {
            match map.get("experiment").map(|v| v.as_str()) {
                Some(Some(name)) if name != k.name() => {
                    errs.push(format!("experiment: configuration is for '{name}', not '{k}'"));
                }
                _ => {
                    map.insert("experiment".into(), Value::from(k.name()));
                }
            }
        }
        if let Some(t) = overrides.trials {
            map.insert("trials".into(), Value::from(t));
        }
        if let Some(s) = overrides.seed {
            map.insert("seed".into(), Value::from(s));
        }
    }
    let mut warnings = Vec::new();
    let Some(mut root) = Fields::new("", &doc, &mut errs) else {
        return Err(Error::Config(errs));
    };

    let kind_str = root.str("experiment", true, &mut errs);
    let kind = kind_str.and_then(|k| match k.parse::<ExperimentKind>() {
        Ok(k) => Some(k),
        Err(e) => {
            errs.push(format!("experiment: {e}"));
            None
        }
    });
    let dim = match root.u64("dimension", kind != Some(ExperimentKind::Bounds), &mut errs) {
        Some(0) => {
            errs.push("dimension: must be at least 1".into());
            None
        }
        other => other.map(|d| d as usize),
    };
    let lambda = root.f64("lambda", kind.is_some_and(|k| k.needs_lambda()), &mut errs);
    let s = root.f64("s", kind.is_some_and(|k| k != ExperimentKind::Bounds), &mut errs);
    if matches!(s, Some(x) if !(x >= 0.0)) {
        errs.push(format!("s: mobility must be >= 0, got {}", s.unwrap_or_default()));
    }
    if kind == Some(ExperimentKind::Coupling) && !matches!(s, Some(x) if x > 0.0) {
        errs.push("s: the coupling needs s > 0".into());
    }
    let dom_obj = root.object("domain", false, &mut errs);
    let domain = parse_domain(dom_obj, &mut errs);
    let seed = root.u64("seed", false, &mut errs).unwrap_or(0);
    let trials = root.u64("trials", kind != Some(ExperimentKind::Bounds), &mut errs);
    if trials == Some(0) {
        errs.push("trials: must be at least 1".into());
    }

    // every section key is known; only the one for this kind may appear
    let mut section_obj = None;
    for k in ExperimentKind::ALL {
        if let Some(key) = k.section_key() {
            let present = root.map.contains_key(key);
            let obj = root.object(key, false, &mut errs);
            if Some(k) == kind {
                section_obj = obj;
                if !present {
                    errs.push(format!("{key}: missing section for experiment '{k}'"));
                }
            } else if present && kind.is_some() {
                errs.push(format!("{key}: section does not apply to experiment '{}'", kind.unwrap()));
            }
        }
    }

    let params = match (lambda, dim, s) {
        (Some(l), Some(d), Some(sv)) => match ModelParams::new(d, l, sv) {
            Ok(p) => Some(p),
            Err(e) => {
                errs.push(format!("lambda: {e}"));
                None
            }
        },
        _ => None,
    };
    let section = match (kind, dim) {
        (Some(ExperimentKind::Bounds), _) => parse_section(ExperimentKind::Bounds, None, 0.0, 0, None, &mut errs),
        (Some(k), Some(d)) => parse_section(k, section_obj, s.unwrap_or(0.0), d, lambda, &mut errs),
        _ => None,
    };
    root.finish(&mut errs);

    if let (Some(k), Some(p)) = (kind, params) {
        match k {
            ExperimentKind::Percolate => {
                if p.dim == 2 && p.lambda <= LAMBDA_C_UPPER_2D {
                    warnings.push(format!(
                        "lambda = {} is not above the critical interval (4.508, 4.515); no infinite component is expected",
                        p.lambda
                    ));
                }
                if !matches!(domain, Some(DomainSpec::Torus { .. } | DomainSpec::TorusNodes { .. })) {
                    errs.push("domain: percolate needs a torus".into());
                }
            }
            ExperimentKind::Broadcast => {
                if !matches!(domain, Some(DomainSpec::Torus { .. } | DomainSpec::TorusNodes { .. })) {
                    errs.push("domain: broadcast needs a torus".into());
                }
            }
            ExperimentKind::Detect | ExperimentKind::Tau | ExperimentKind::Mstat => {
                if matches!(domain, Some(DomainSpec::Torus { .. } | DomainSpec::TorusNodes { .. })) {
                    errs.push("domain: detection experiments run in an open box".into());
                }
            }
            _ => {}
        }
    }
    if let Some(Section::Coupling(c)) = &section {
        let inv = c.spec.invariants();
        if !inv.delta_ok {
            warnings.push(format!("Delta = {} is below c1 ell^2/(s^2 eps^2) = {}", c.spec.delta, inv.delta_floor));
        }
        if !inv.inner_ok {
            warnings.push(format!("K' = {} exceeds K - c2 s sqrt(Delta ln(1/eps)) = {}", c.spec.k_inner, inv.inner_ceiling));
        }
    }

    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    Ok(ExperimentConfig {
        kind: kind.expect("checked"),
        dim: dim.unwrap_or(0),
        params,
        s: s.unwrap_or(0.0),
        domain,
        seed,
        trials: trials.unwrap_or(1),
        section: section.expect("checked"),
        warnings,
        document: doc,
    })
}
