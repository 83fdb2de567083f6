//! Dispatch of a parsed configuration to the experiments and writing of the
//! result files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{DetectionSection, DomainSpec, ExperimentConfig, ExperimentKind, Section, TargetSpec};
use crate::coupling::{initial_set, run_coupling_batch};
use crate::domain::{ModelParams, Point, SimDomain};
use crate::error::{Error, Result};
use crate::experiments::broadcast::{self, giant_overlap, run_broadcast, BroadcastTrialSpec};
use crate::experiments::detection::{
    self, estimate_m, estimate_m_prime, m2_bound, run_detection, run_single_node_tau, sausage_oracle,
    DetectionTrialSpec, Estimator, Target,
};
use crate::experiments::diagnostics::{dense_cell_diagnostic, escape_diagnostic, sparse_cell_bound};
use crate::experiments::percolation::{self, run_percolation, PercolationTrialSpec};
use crate::geo_graph::build_graph;
use crate::harness::with_threads;
use crate::motion::{sample_target_trajectory, MotionModel, Trajectory};
use crate::point_process::{sample_ppp, IdSource, NodeEnsemble, Region};
use crate::rng::RngPolicy;
use crate::stats::bounds::bounds_table;
use crate::stats::fit::{fit_exponent, fit_tail, ols, Transform};
use crate::stats::survival::SurvivalCurve;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
    pub dump_ensemble: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub experiment: ExperimentKind,
    pub config: Value,
    pub derived: Value,
    pub code_version: String,
    pub wall_clock_seconds: f64,
    pub seed: u64,
    pub seed_derivation: String,
    pub threads: Option<usize>,
    pub warnings: Vec<String>,
    pub outputs: Vec<String>,
}

struct Writer {
    dir: PathBuf,
    outputs: Vec<String>,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(Writer { dir: dir.to_path_buf(), outputs: Vec::new() })
    }

    fn bytes(&mut self, name: &str, data: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, data).map_err(|e| io_err(&path, e))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.bytes(name, text.as_bytes())
    }

    fn csv(&mut self, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        fill(&mut buf).map_err(|e| io_err(&self.dir.join(name), e))?;
        self.bytes(name, &buf)
    }

    fn survival(&mut self, name: &str, curve: &SurvivalCurve) -> Result<()> {
        self.csv(name, |b| curve.write_csv(b))
    }

    fn ensemble(&mut self, ens: &NodeEnsemble, r: f64, domain: &SimDomain) -> Result<()> {
        self.csv("ensemble.csv", |b| ens.write_csv(b))?;
        let g = build_graph(ens, r, domain)?;
        self.csv("edges.csv", |b| g.write_edges_csv(b))
    }
}

fn fit_json(curve: &SurvivalCurve, transform: Transform, range: Option<(u64, u64)>) -> Value {
    match fit_tail(curve, transform, range) {
        Ok(f) => json!({
            "coordinate": f.coordinate,
            "slope": f.slope,
            "intercept": f.intercept,
            "r_squared": f.r_squared,
            "t_lo": f.t_lo,
            "t_hi": f.t_hi,
            "points": f.points,
            "available": true,
        }),
        Err(e) => json!({
            "coordinate": transform.name(),
            "slope": null,
            "intercept": null,
            "r_squared": null,
            "available": false,
            "reason": e.to_string(),
        }),
    }
}

fn section_mismatch() -> Error {
    Error::Config(vec!["configuration section does not match the experiment".into()])
}

fn path_from_seed(model: &MotionModel, t_max: u64, dim: usize, policy: &RngPolicy) -> Result<Trajectory> {
    let mut rng = policy.stream("path", 0);
    sample_target_trajectory(model, t_max as usize, &Point::origin(dim), &mut rng)
}

fn detection_spec(p: ModelParams, sec: &DetectionSection, domain: Option<DomainSpec>) -> Result<DetectionTrialSpec> {
    let target = match &sec.target {
        TargetSpec::Model { model } => Target::Model(*model),
        TargetSpec::Fixed { points } => Target::Fixed(Trajectory(points.iter().cloned().map(Point).collect())),
        TargetSpec::SampledPath { s, path_seed } => Target::Fixed(path_from_seed(
            &MotionModel::Brownian { s: *s },
            sec.t_max,
            p.dim,
            &RngPolicy::new(*path_seed),
        )?),
    };
    let mut spec = DetectionTrialSpec::new(p, target, sec.t_max)?;
    if let Some(n) = sec.network {
        spec = spec.with_network(n);
    }
    let side = sec.box_side.or(match domain {
        Some(DomainSpec::Box { side }) => Some(side),
        _ => None,
    });
    if let Some(side) = side {
        spec = spec.with_box_side(side);
    }
    spec.validate()?;
    Ok(spec)
}

/// The fixed path for single-node estimators; a random target model is
/// sampled once from the run's seed.
fn fixed_path(spec: &DetectionTrialSpec, policy: &RngPolicy) -> Result<Trajectory> {
    match &spec.target {
        Target::Fixed(x) => Ok(Trajectory(x.0[..spec.t_max as usize].to_vec())),
        Target::Model(m) => path_from_seed(m, spec.t_max, spec.params.dim, policy),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoublingCheck {
    pub box_side: f64,
    pub doubled_side: f64,
    pub max_z: f64,
    pub worst_t: u64,
    pub pass: bool,
}

/// Compares the curve against an independent run in a box of twice the side.
pub fn doubling_check(spec: &DetectionTrialSpec, estimator: Estimator, base: &SurvivalCurve, trials: u64, policy: &RngPolicy) -> Result<DoublingCheck> {
    let doubled = spec.clone().with_box_side(2.0 * spec.box_side);
    let other = run_detection(&doubled, estimator, trials, &policy.derived("doubling"))?;
    let mut max_z: f64 = 0.0;
    let mut worst_t = 0;
    for (a, b) in base.points.iter().zip(&other.points) {
        let var = |p: &crate::stats::survival::SurvivalPoint| {
            if p.log_se.is_finite() {
                (p.estimate * p.log_se).powi(2)
            } else {
                0.0
            }
        };
        let sd = (var(a) + var(b)).sqrt();
        if sd > 0.0 {
            let z = (a.estimate - b.estimate).abs() / sd;
            if z > max_z {
                max_z = z;
                worst_t = a.t;
            }
        }
    }
    Ok(DoublingCheck { box_side: spec.box_side, doubled_side: doubled.box_side, max_z, worst_t, pass: max_z < 3.0 })
}

fn default_transform(p: &ModelParams, spec: &DetectionTrialSpec) -> Transform {
    let drift = spec.network.gamma() > 0.0 || matches!(spec.target, Target::Model(MotionModel::BrownianWithDrift { .. }));
    if p.dim == 2 && !drift {
        Transform::TOverLogT
    } else {
        Transform::Linear
    }
}

struct Outcome {
    derived: Value,
}

fn run_kind(cfg: &ExperimentConfig, opts: &RunOptions, w: &mut Writer) -> Result<Outcome> {
    let policy = RngPolicy::new(cfg.seed);
    let trials = cfg.trials;
    match cfg.kind {
        ExperimentKind::Detect => {
            let Section::Detection(sec) = &cfg.section else { return Err(section_mismatch()) };
            let p = cfg.params()?;
            let spec = detection_spec(p, sec, cfg.domain)?;
            let curve = run_detection(&spec, sec.estimator, trials, &policy)?;
            let doubling = if sec.doubling_check {
                Some(doubling_check(&spec, sec.estimator, &curve, trials, &policy)?)
            } else {
                None
            };
            w.survival("survival.csv", &curve)?;
            let transform = sec.fit.unwrap_or_else(|| default_transform(&p, &spec));
            w.json("fit.json", &fit_json(&curve, transform, sec.fit_range))?;
            w.json(
                "summary.json",
                &json!({
                    "experiment": "detect",
                    "params": p,
                    "spec": spec,
                    "estimator": sec.estimator,
                    "trials": trials,
                    "seed": cfg.seed,
                    "doubling_check": doubling,
                    "warnings": cfg.warnings,
                }),
            )?;
            if opts.dump_ensemble {
                let ens = detection::initial_ensemble(&spec, &policy, "detect", 0)?;
                w.ensemble(&ens, p.r, &SimDomain::new_box(p.dim, spec.box_side)?)?;
            }
            Ok(Outcome { derived: json!({"r": p.r, "L": spec.box_side}) })
        }
        ExperimentKind::Tau => {
            let Section::Tau(sec) = &cfg.section else { return Err(section_mismatch()) };
            let p = cfg.params()?;
            let spec = detection_spec(p, sec, cfg.domain)?;
            let x = fixed_path(&spec, &policy)?;
            let tau = run_single_node_tau(&spec, &x, trials, &policy)?;
            w.survival("survival.csv", &tau.survival)?;
            let volume = spec.box_side.powi(p.dim as i32);
            w.csv("tau.csv", |b| {
                use std::io::Write;
                writeln!(b, "t,hits,estimate,ci_low,ci_high,predicted_survival")?;
                for q in &tau.points {
                    let pred = (-p.lambda * volume * q.estimate).exp();
                    writeln!(b, "{},{},{},{},{},{}", q.t, q.hits, q.estimate, q.ci_low, q.ci_high, pred)?;
                }
                Ok(())
            })?;
            w.json(
                "summary.json",
                &json!({
                    "experiment": "tau",
                    "params": p,
                    "box_side": spec.box_side,
                    "network": spec.network,
                    "path": x,
                    "trials": trials,
                    "seed": cfg.seed,
                    "warnings": cfg.warnings,
                }),
            )?;
            Ok(Outcome { derived: json!({"r": p.r, "L": spec.box_side}) })
        }
        ExperimentKind::Mstat => {
            let Section::Mstat(sec) = &cfg.section else { return Err(section_mismatch()) };
            let p = cfg.params()?;
            let spec = detection_spec(p, &sec.detection, cfg.domain)?;
            let x = fixed_path(&spec, &policy)?;
            let m = estimate_m(&spec, &x, trials, &policy)?;
            let volume = spec.box_side.powi(p.dim as i32);
            w.csv("mstat.csv", |b| {
                use std::io::Write;
                writeln!(b, "t,mean,se,upper,scaled")?;
                for e in &m {
                    writeln!(b, "{},{},{},{},{}", e.t, e.mean, e.se, e.t as f64 / volume, e.mean * volume / e.t as f64)?;
                }
                Ok(())
            })?;
            let mut prime_fit = Value::Null;
            if let Some(mp) = &sec.m_prime {
                let mut rows = Vec::new();
                for (k, off) in mp.offsets.iter().enumerate() {
                    let est = estimate_m_prime(
                        &Point(off.clone()),
                        mp.t_max,
                        &spec.network,
                        &mp.target,
                        mp.trials.unwrap_or(trials),
                        &policy,
                        &format!("mstat-prime-{k}"),
                    )?;
                    if k == 0 {
                        let pts: Vec<(f64, f64)> =
                            est.iter().filter(|e| e.t >= 10).map(|e| ((e.t as f64).ln(), e.mean)).collect();
                        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
                        prime_fit = match ols(&xs, &ys) {
                            Ok(f) => json!({"coordinate": "log t", "slope": f.slope, "intercept": f.intercept,
                                             "r_squared": f.r_squared, "available": true}),
                            Err(e) => json!({"coordinate": "log t", "available": false, "reason": e.to_string()}),
                        };
                    }
                    rows.push((k, est));
                }
                let s = spec.network.s();
                w.csv("m_prime.csv", |b| {
                    use std::io::Write;
                    writeln!(b, "offset,t,mean,se,m2_bound")?;
                    for (k, est) in &rows {
                        for e in est {
                            let bound = if s > 0.0 { m2_bound(e.t, s, p.dim) } else { f64::NAN };
                            writeln!(b, "{},{},{},{},{}", k, e.t, e.mean, e.se, bound)?;
                        }
                    }
                    Ok(())
                })?;
                w.json("fit.json", &prime_fit)?;
            }
            w.json(
                "summary.json",
                &json!({
                    "experiment": "mstat",
                    "params": p,
                    "box_side": spec.box_side,
                    "network": spec.network,
                    "m_prime": sec.m_prime,
                    "m_prime_fit": prime_fit,
                    "trials": trials,
                    "seed": cfg.seed,
                    "warnings": cfg.warnings,
                }),
            )?;
            Ok(Outcome { derived: json!({"r": p.r, "L": spec.box_side}) })
        }
        ExperimentKind::Sausage => {
            let Section::Sausage(sec) = &cfg.section else { return Err(section_mismatch()) };
            let pts = sausage_oracle(sec.t_max, cfg.s, cfg.dim, trials, sec.probes, &policy)?;
            let lambda = cfg.params.map(|p| p.lambda);
            w.csv("sausage.csv", |b| {
                use std::io::Write;
                writeln!(b, "t,volume,se,predicted_survival")?;
                for q in &pts {
                    let pred = lambda.map_or(f64::NAN, |l| (-l * q.volume).exp());
                    writeln!(b, "{},{},{},{}", q.t, q.volume, q.se, pred)?;
                }
                Ok(())
            })?;
            w.json(
                "summary.json",
                &json!({
                    "experiment": "sausage",
                    "dimension": cfg.dim,
                    "s": cfg.s,
                    "lambda": lambda,
                    "t_max": sec.t_max,
                    "paths": trials,
                    "probes": sec.probes,
                    "seed": cfg.seed,
                    "warnings": cfg.warnings,
                }),
            )?;
            Ok(Outcome { derived: json!({"r": crate::domain::derive_range(cfg.dim)?}) })
        }
        ExperimentKind::Percolate => {
            let Section::Percolation(sec) = &cfg.section else { return Err(section_mismatch()) };
            let p = cfg.params()?;
            let domain = cfg.domain.ok_or_else(section_mismatch)?.build(p.dim, p.lambda)?;
            let mut spec = PercolationTrialSpec::new(p, domain, sec.proxy, sec.t_max)?;
            if let Some(side) = sec.sub_side {
                spec.sub_side = side;
            }
            spec.obs_interval = sec.obs_interval;
            spec.validate()?;
            let res = run_percolation(&spec, trials, &policy)?;
            w.survival("survival.csv", &res.percolation)?;
            w.survival("detection.csv", &res.detection)?;
            let exponent = match fit_exponent(&res.percolation, sec.fit_range) {
                Ok(f) => json!({"slope": f.slope, "intercept": f.intercept, "r_squared": f.r_squared, "available": true}),
                Err(e) => json!({"available": false, "reason": e.to_string()}),
            };
            let mut fit = fit_json(&res.percolation, Transform::Stretched { dim: p.dim }, sec.fit_range);
            fit["exponent_fit"] = exponent;
            w.json("fit.json", &fit)?;
            w.json(
                "summary.json",
                &json!({
                    "experiment": "percolate",
                    "params": p,
                    "spec": spec,
                    "domination_violations": res.domination_violations,
                    "trials": trials,
                    "seed": cfg.seed,
                    "warnings": cfg.warnings,
                }),
            )?;
            if opts.dump_ensemble {
                let ens = percolation::initial_ensemble(&spec, &policy, 0)?;
                w.ensemble(&ens, p.r, &domain)?;
            }
            Ok(Outcome { derived: json!({"r": p.r, "side": domain.side(), "sub_side": spec.sub_side}) })
        }
        ExperimentKind::Broadcast => {
            let Section::Broadcast(sec) = &cfg.section else { return Err(section_mismatch()) };
            let p = cfg.params()?;
            let n = match cfg.domain {
                Some(DomainSpec::TorusNodes { n }) => n,
                Some(DomainSpec::Torus { side }) => p.lambda * side.powi(p.dim as i32),
                _ => return Err(section_mismatch()),
            };
            let spec = BroadcastTrialSpec::new(p, n, sec.t_max)?;
            let res = run_broadcast(&spec, trials, &policy)?;
            let overlap = match &sec.giant_overlap {
                Some(o) => Some(giant_overlap(&p, n, o.steps, o.trials, &policy)?),
                None => None,
            };
            w.survival("survival.csv", &res.curve)?;
            let nodes: Vec<usize> = res.trials.iter().map(|t| t.nodes).collect();
            w.json(
                "summary.json",
                &json!({
                    "experiment": "broadcast",
                    "params": p,
                    "n": n,
                    "t_max": sec.t_max,
                    "median": res.median,
                    "median_over_log2_n": res.median.map(|m| m / n.ln().powi(2)),
                    "resampled_trials": res.resampled_trials,
                    "mean_nodes": nodes.iter().sum::<usize>() as f64 / nodes.len() as f64,
                    "giant_overlap": overlap,
                    "trials": trials,
                    "seed": cfg.seed,
                    "warnings": cfg.warnings,
                }),
            )?;
            let domain = spec.domain()?;
            if opts.dump_ensemble {
                let ens = broadcast::initial_ensemble(&spec, &policy, 0)?;
                w.ensemble(&ens, p.r, &domain)?;
            }
            Ok(Outcome { derived: json!({"r": p.r, "side": domain.side()}) })
        }
        ExperimentKind::Coupling => {
            let Section::Coupling(sec) = &cfg.section else { return Err(section_mismatch()) };
            let summary = run_coupling_batch(&sec.spec, &sec.initial, trials, &policy)?;
            let mut value = serde_json::to_value(&summary)?;
            value["warnings"] = json!(cfg.warnings);
            value["seed"] = json!(cfg.seed);
            w.json("summary.json", &value)?;
            if opts.dump_ensemble {
                let mut rng = policy.stream("coupling", 0);
                let (ens, _) = initial_set(&sec.spec, &sec.initial, 0, &mut rng)?;
                let r = crate::domain::derive_range(sec.spec.dim)?;
                w.ensemble(&ens, r, &SimDomain::new_box(sec.spec.dim, sec.spec.k)?)?;
            }
            Ok(Outcome {
                derived: json!({"delta": sec.spec.delta, "ell": sec.spec.ell, "psi": summary.psi,
                                 "inner_integral": summary.psi_mass.integral}),
            })
        }
        ExperimentKind::Diagnose => {
            let Section::Diagnose(sec) = &cfg.section else { return Err(section_mismatch()) };
            let p = cfg.params()?;
            let side = sec.box_side.unwrap_or(sec.t as f64 * (1.0 + p.s));
            let region = Region::centered(p.dim, side);
            let mut rng = policy.stream("diagnose", 0);
            let ens = sample_ppp(p.lambda, &region, &mut IdSource::new(0), &mut rng)?;
            let rep = dense_cell_diagnostic(&ens, &region, sec.ell, sec.xi, p.lambda)?;
            let bound = sparse_cell_bound(sec.t as f64, side, sec.delta as f64, rep.ell, sec.xi, p.lambda, p.dim);
            let escape = escape_diagnostic(p.s, side, sec.t, sec.delta, p.dim, sec.escape_trials, &policy)?;
            w.csv("cells.csv", |b| {
                use std::io::Write;
                writeln!(b, "cell,count,dense")?;
                for (i, c) in rep.counts.iter().enumerate() {
                    writeln!(b, "{},{},{}", i, c, *c as f64 >= rep.threshold)?;
                }
                Ok(())
            })?;
            let mut dense = serde_json::to_value(&rep)?;
            if let Some(m) = dense.as_object_mut() {
                m.remove("counts");
            }
            w.json(
                "summary.json",
                &json!({
                    "experiment": "diagnose",
                    "params": p,
                    "box_side": side,
                    "dense_cells": dense,
                    "sparse_cell_bound": bound,
                    "escape": escape,
                    "seed": cfg.seed,
                    "warnings": cfg.warnings,
                }),
            )?;
            if opts.dump_ensemble {
                w.ensemble(&ens, p.r, &SimDomain::new_box(p.dim, side)?)?;
            }
            Ok(Outcome { derived: json!({"r": p.r, "L": side, "ell": rep.ell, "delta": sec.delta}) })
        }
        ExperimentKind::Bounds => {
            let rows = bounds_table();
            w.csv("bounds.csv", |b| {
                use std::io::Write;
                writeln!(b, "kind,params,bound,exact,holds")?;
                for r in &rows {
                    writeln!(b, "{},\"{}\",{},{},{}", r.kind, r.params, r.bound, r.exact, r.holds)?;
                }
                Ok(())
            })?;
            w.json("summary.json", &json!({"experiment": "bounds", "rows": rows, "all_hold": rows.iter().all(|r| r.holds)}))?;
            Ok(Outcome { derived: json!({}) })
        }
    }
}

/// Runs `cfg`, writes its files into `opts.out_dir` and returns the manifest
/// (also written as `manifest.json`).
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunManifest> {
    if cfg.trials == 0 {
        return Err(Error::Config(vec!["trials: must be at least 1".into()]));
    }
    let start = Instant::now();
    let mut w = Writer::new(&opts.out_dir)?;
    let outcome = with_threads(opts.threads, || run_kind(cfg, opts, &mut w))??;
    let mut outputs = std::mem::take(&mut w.outputs);
    outputs.push("manifest.json".into());
    let manifest = RunManifest {
        manifest_version: MANIFEST_VERSION,
        experiment: cfg.kind,
        config: cfg.document.clone(),
        derived: outcome.derived,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        seed: cfg.seed,
        seed_derivation: RngPolicy::DERIVATION.to_string(),
        threads: opts.threads,
        warnings: cfg.warnings.clone(),
        outputs,
    };
    w.json("manifest.json", &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn opts(dir: &Path) -> RunOptions {
        RunOptions { out_dir: dir.to_path_buf(), threads: Some(1), dump_ensemble: true }
    }

    #[test]
    fn detect_writes_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config(
            r#"{"experiment": "detect", "dimension": 2, "lambda": 1, "s": 1, "seed": 1, "trials": 200,
                "detection": {"t_max": 6, "doubling_check": true}}"#,
        )
        .unwrap();
        let m = run_experiment(&cfg, &opts(dir.path())).unwrap();
        for f in ["survival.csv", "fit.json", "summary.json", "manifest.json", "ensemble.csv", "edges.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
            assert!(m.outputs.iter().any(|o| o == f));
        }
        let csv = fs::read_to_string(dir.path().join("survival.csv")).unwrap();
        assert!(csv.starts_with("t,trials,survivors,estimate,ci_low,ci_high,censored\n"));
        assert_eq!(csv.lines().count(), 7);
    }

    #[test]
    fn bounds_table_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config(r#"{"experiment": "bounds"}"#).unwrap();
        run_experiment(&cfg, &opts(dir.path())).unwrap();
        let csv = fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
        assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")));
    }

    #[test]
    fn io_error_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, b"x").unwrap();
        let cfg = parse_config(r#"{"experiment": "bounds"}"#).unwrap();
        let err = run_experiment(&cfg, &opts(&blocker.join("sub"))).unwrap_err().to_string();
        assert!(err.contains("file"), "{err}");
    }
}
