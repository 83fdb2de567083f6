//! Poisson point processes on bounded boxes: homogeneous sampling, thinning,
//! superposition and rejection sampling of non-homogeneous intensities.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use crate::domain::{Point, SimDomain};
use crate::error::{invalid, Error, Result};

/// Stable node identity: the trial that created the node and a running counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct NodeId {
    pub trial: u64,
    pub serial: u64,
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.trial, self.serial)
    }
}

/// Hands out unique ids within one trial.
#[derive(Debug, Clone)]
pub struct IdSource {
    trial: u64,
    next: u64,
}

impl IdSource {
    pub fn new(trial: u64) -> Self {
        IdSource { trial, next: 0 }
    }

    pub fn next_id(&mut self) -> NodeId {
        let id = NodeId { trial: self.trial, serial: self.next };
        self.next += 1;
        id
    }
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(invalid("region corners must have the same non-zero dimension"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite()) {
            return Err(invalid("region must be bounded with lo <= hi"));
        }
        Ok(Region { lo, hi })
    }

    /// Cube of side `side` centered at `center`.
    pub fn cube(center: &[f64], side: f64) -> Self {
        Region {
            lo: center.iter().map(|c| c - side / 2.0).collect(),
            hi: center.iter().map(|c| c + side / 2.0).collect(),
        }
    }

    /// The cube `Q_side` centered at the origin.
    pub fn centered(dim: usize, side: f64) -> Self {
        Self::cube(&vec![0.0; dim], side)
    }

    /// The sampling region of a domain.
    pub fn of_domain(domain: &SimDomain) -> Self {
        let lo = domain.lower();
        Region { lo: vec![lo; domain.dim], hi: vec![lo + domain.side(); domain.dim] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(c, (a, b))| *a <= *c && *c <= *b)
    }

    fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        for (a, b) in self.lo.iter().zip(&self.hi) {
            out.push(a + (b - a) * rng.random::<f64>());
        }
    }
}

/// Positions and identities of all nodes at one observation step.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEnsemble {
    dim: usize,
    coords: Vec<f64>,
    ids: Vec<NodeId>,
    pub timestamp: u64,
}

impl NodeEnsemble {
    pub fn empty(dim: usize, timestamp: u64) -> Self {
        NodeEnsemble { dim, coords: Vec::new(), ids: Vec::new(), timestamp }
    }

    /// Builds an ensemble from explicit points, ids assigned from `ids`.
    pub fn from_points(dim: usize, points: &[Point], ids: &mut IdSource) -> Result<Self> {
        let mut ens = Self::empty(dim, 0);
        for p in points {
            if p.dim() != dim {
                return Err(invalid(format!("point {:?} is not {dim}-dimensional", p.0)));
            }
            ens.push(ids.next_id(), &p.0);
        }
        Ok(ens)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn push(&mut self, id: NodeId, coords: &[f64]) {
        debug_assert_eq!(coords.len(), self.dim);
        self.ids.push(id);
        self.coords.extend_from_slice(coords);
    }

    #[inline]
    pub fn position(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn position_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn point(&self, i: usize) -> Point {
        Point(self.position(i).to_vec())
    }

    pub fn id(&self, i: usize) -> NodeId {
        self.ids[i]
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }

    pub fn positions(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim.max(1))
    }

    /// Number of nodes inside `region`.
    pub fn count_in(&self, region: &Region) -> usize {
        self.positions().filter(|p| region.contains(p)).count()
    }

    /// The nodes inside `region`, ids and timestamp preserved.
    pub fn restrict(&self, region: &Region) -> NodeEnsemble {
        let mut out = NodeEnsemble::empty(self.dim, self.timestamp);
        for i in 0..self.len() {
            if region.contains(self.position(i)) {
                out.push(self.ids[i], self.position(i));
            }
        }
        out
    }

    /// Writes `id,x0,...,x{d-1}` followed by one row per node.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> =
            std::iter::once("id".to_string()).chain((0..self.dim).map(|k| format!("x{k}"))).collect();
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.len() {
            write!(w, "{}", self.ids[i])?;
            for c in self.position(i) {
                write!(w, ",{c}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
}

/// Homogeneous PPP of intensity `lambda` on `region`.
pub fn sample_ppp<R: Rng + ?Sized>(
    lambda: f64,
    region: &Region,
    ids: &mut IdSource,
    rng: &mut R,
) -> Result<NodeEnsemble> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidIntensity(lambda));
    }
    let n = poisson_count(lambda * region.volume(), rng);
    let mut ens = NodeEnsemble::empty(region.dim(), 0);
    ens.coords.reserve(n as usize * region.dim());
    ens.ids.reserve(n as usize);
    for _ in 0..n {
        ens.ids.push(ids.next_id());
        region.sample_uniform(rng, &mut ens.coords);
    }
    Ok(ens)
}

/// Deletes each node independently with probability `p_delete`.
pub fn thin<R: Rng + ?Sized>(
    ens: &NodeEnsemble,
    p_delete: f64,
    rng: &mut R,
) -> Result<(NodeEnsemble, NodeEnsemble)> {
    if !(0.0..=1.0).contains(&p_delete) {
        return Err(Error::InvalidProbability(p_delete));
    }
    let mut kept = NodeEnsemble::empty(ens.dim, ens.timestamp);
    let mut deleted = NodeEnsemble::empty(ens.dim, ens.timestamp);
    for i in 0..ens.len() {
        let target = if rng.random::<f64>() < p_delete { &mut deleted } else { &mut kept };
        target.push(ens.ids[i], ens.position(i));
    }
    Ok((kept, deleted))
}

/// Union of two ensembles observed at the same step.
pub fn superpose(a: &NodeEnsemble, b: &NodeEnsemble) -> Result<NodeEnsemble> {
    if a.timestamp != b.timestamp {
        return Err(Error::IncompatibleEnsembles(format!(
            "timestamps differ ({} vs {})",
            a.timestamp, b.timestamp
        )));
    }
    if a.dim != b.dim {
        return Err(Error::IncompatibleEnsembles(format!(
            "dimensions differ ({} vs {})",
            a.dim, b.dim
        )));
    }
    let seen: HashSet<NodeId> = a.ids.iter().copied().collect();
    if let Some(dup) = b.ids.iter().find(|id| seen.contains(id)) {
        return Err(Error::IncompatibleEnsembles(format!("node id {dup} appears in both")));
    }
    let mut out = a.clone();
    out.ids.extend_from_slice(&b.ids);
    out.coords.extend_from_slice(&b.coords);
    Ok(out)
}

type Rule = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A bounded intensity `x -> nu(x)` on a box.
#[derive(Clone)]
pub struct IntensityField {
    pub region: Region,
    pub bound: f64,
    /// Per-axis coordinates where the field may jump; quadrature splits there.
    pub breaks: Vec<Vec<f64>>,
    rule: Rule,
}

impl fmt::Debug for IntensityField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntensityField")
            .field("region", &self.region)
            .field("bound", &self.bound)
            .finish_non_exhaustive()
    }
}

impl IntensityField {
    pub fn new<F>(region: Region, bound: f64, rule: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if !(bound >= 0.0) || !bound.is_finite() {
            return Err(Error::InvalidIntensity(bound));
        }
        let breaks = vec![Vec::new(); region.dim()];
        Ok(IntensityField { region, bound, breaks, rule: Arc::new(rule) })
    }

    pub fn constant(region: Region, lambda: f64) -> Result<Self> {
        Self::new(region, lambda, move |_| lambda)
    }

    /// `lambda` on `inner`, zero elsewhere in `region`.
    pub fn indicator(region: Region, inner: Region, lambda: f64) -> Result<Self> {
        let breaks = inner.lo.iter().zip(&inner.hi).map(|(a, b)| vec![*a, *b]).collect();
        let mut field =
            Self::new(region, lambda, move |x| if inner.contains(x) { lambda } else { 0.0 })?;
        field.breaks = breaks;
        Ok(field)
    }

    /// Evaluates the field; zero outside its region.
    pub fn eval(&self, x: &[f64]) -> f64 {
        if self.region.contains(x) {
            (self.rule)(x)
        } else {
            0.0
        }
    }
}

/// Non-homogeneous PPP by thinning a PPP of intensity `field.bound`.
pub fn sample_nonhomogeneous<R: Rng + ?Sized>(
    field: &IntensityField,
    ids: &mut IdSource,
    rng: &mut R,
) -> Result<NodeEnsemble> {
    let dim = field.region.dim();
    let n = poisson_count(field.bound * field.region.volume(), rng);
    let mut out = NodeEnsemble::empty(dim, 0);
    let mut x = Vec::with_capacity(dim);
    for _ in 0..n {
        x.clear();
        field.region.sample_uniform(rng, &mut x);
        let value = field.eval(&x);
        if !(value >= 0.0) || value > field.bound {
            return Err(Error::InvalidBound { value, bound: field.bound, location: x });
        }
        if rng.random::<f64>() * field.bound < value {
            out.push(ids.next_id(), &x);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngPolicy;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (m, xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn ppp_count_mean_and_variance() {
        let policy = RngPolicy::new(11);
        let region = Region::centered(2, 5.0);
        let trials = 20_000;
        let counts: Vec<f64> = (0..trials)
            .map(|t| {
                let mut rng = policy.stream("ppp", t);
                sample_ppp(2.0, &region, &mut IdSource::new(t), &mut rng).unwrap().len() as f64
            })
            .collect();
        let (m, v) = mean_var(&counts);
        let se_mean = (50.0 / trials as f64).sqrt();
        assert!((m - 50.0).abs() < 3.0 * se_mean, "mean {m}");
        // var of sample variance for Poisson(mu) ~ (mu + 2 mu^2) / n
        let se_var = ((50.0 + 2.0 * 2500.0) / trials as f64).sqrt();
        assert!((v - 50.0).abs() < 3.0 * se_var, "var {v}");
    }

    #[test]
    fn zero_intensity_is_empty_and_negative_rejected() {
        let mut rng = RngPolicy::new(1).stream("ppp", 0);
        let region = Region::centered(2, 3.0);
        assert!(sample_ppp(0.0, &region, &mut IdSource::new(0), &mut rng).unwrap().is_empty());
        assert!(matches!(
            sample_ppp(-1.0, &region, &mut IdSource::new(0), &mut rng),
            Err(Error::InvalidIntensity(_))
        ));
    }

    #[test]
    fn positions_inside_region_and_ids_unique() {
        let mut rng = RngPolicy::new(2).stream("ppp", 0);
        let region = Region::new(vec![1.0, -2.0, 0.0], vec![2.0, 3.0, 0.5]).unwrap();
        let ens = sample_ppp(10.0, &region, &mut IdSource::new(0), &mut rng).unwrap();
        assert!(!ens.is_empty());
        assert!(ens.positions().all(|p| region.contains(p)));
        let ids: HashSet<_> = ens.ids().iter().collect();
        assert_eq!(ids.len(), ens.len());
    }

    #[test]
    fn thin_edge_cases() {
        let mut rng = RngPolicy::new(3).stream("thin", 0);
        let ens = sample_ppp(5.0, &Region::centered(2, 2.0), &mut IdSource::new(0), &mut rng).unwrap();
        let (kept, deleted) = thin(&ens, 0.0, &mut rng).unwrap();
        assert_eq!(kept, ens);
        assert!(deleted.is_empty());
        let (kept, deleted) = thin(&ens, 1.0, &mut rng).unwrap();
        assert!(kept.is_empty());
        assert_eq!(deleted.len(), ens.len());
        assert!(matches!(thin(&ens, 1.5, &mut rng), Err(Error::InvalidProbability(_))));
    }

    #[test]
    fn thinned_mean() {
        // PPP(4) on the unit square thinned with p = 0.25 keeps mean 3.
        let policy = RngPolicy::new(4);
        let region = Region::centered(2, 1.0);
        let trials = 10_000;
        let kept: Vec<f64> = (0..trials)
            .map(|t| {
                let mut rng = policy.stream("thin", t);
                let ens = sample_ppp(4.0, &region, &mut IdSource::new(t), &mut rng).unwrap();
                thin(&ens, 0.25, &mut rng).unwrap().0.len() as f64
            })
            .collect();
        let (m, _) = mean_var(&kept);
        assert!((m - 3.0).abs() < 3.0 * (3.0 / trials as f64).sqrt(), "mean {m}");
    }

    #[test]
    fn superpose_examples() {
        let mut rng = RngPolicy::new(5).stream("sup", 0);
        let mut ids = IdSource::new(0);
        let region = Region::centered(2, 1.0);
        let a = NodeEnsemble::empty(2, 0);
        let b = sample_ppp(3.0, &region, &mut ids, &mut rng).unwrap();
        assert_eq!(superpose(&a, &b).unwrap(), b);

        let c = sample_ppp(3.0, &region, &mut ids, &mut rng).unwrap();
        let u = superpose(&b, &c).unwrap();
        let set: HashSet<_> = u.ids().iter().collect();
        assert_eq!(set.len(), b.len() + c.len());

        let mut later = c.clone();
        later.timestamp = 1;
        assert!(matches!(superpose(&b, &later), Err(Error::IncompatibleEnsembles(_))));
        assert!(matches!(superpose(&b, &b), Err(Error::IncompatibleEnsembles(_))));
    }

    #[test]
    fn superposed_mean() {
        let policy = RngPolicy::new(6);
        let region = Region::centered(2, 1.0);
        let trials = 10_000;
        let counts: Vec<f64> = (0..trials)
            .map(|t| {
                let mut rng = policy.stream("sup", t);
                let mut ids = IdSource::new(t);
                let a = sample_ppp(1.0, &region, &mut ids, &mut rng).unwrap();
                let b = sample_ppp(2.0, &region, &mut ids, &mut rng).unwrap();
                superpose(&a, &b).unwrap().len() as f64
            })
            .collect();
        let (m, _) = mean_var(&counts);
        assert!((m - 3.0).abs() < 3.0 * (3.0 / trials as f64).sqrt(), "mean {m}");
    }

    #[test]
    fn thin_then_superpose_restores_positions() {
        let mut rng = RngPolicy::new(7).stream("rt", 0);
        let ens = sample_ppp(20.0, &Region::centered(2, 2.0), &mut IdSource::new(0), &mut rng).unwrap();
        let (kept, deleted) = thin(&ens, 0.4, &mut rng).unwrap();
        let merged = superpose(&kept, &deleted).unwrap();
        let key = |e: &NodeEnsemble| {
            let mut v: Vec<(NodeId, Vec<u64>)> = (0..e.len())
                .map(|i| (e.id(i), e.position(i).iter().map(|c| c.to_bits()).collect()))
                .collect();
            v.sort();
            v
        };
        assert_eq!(key(&merged), key(&ens));
    }

    #[test]
    fn nonhomogeneous_cases() {
        let policy = RngPolicy::new(8);
        let region = Region::centered(2, 4.0);
        let zero = IntensityField::constant(region.clone(), 0.0).unwrap();
        let mut rng = policy.stream("nh", 0);
        assert!(sample_nonhomogeneous(&zero, &mut IdSource::new(0), &mut rng).unwrap().is_empty());

        // Half-box indicator: expected count lambda * vol(A) = 2 * 8 = 16.
        let half = Region::new(vec![-2.0, -2.0], vec![0.0, 2.0]).unwrap();
        let field = IntensityField::indicator(region.clone(), half.clone(), 2.0).unwrap();
        let trials = 10_000;
        let mut total = 0.0;
        for t in 0..trials {
            let mut rng = policy.stream("nh", t);
            let ens = sample_nonhomogeneous(&field, &mut IdSource::new(t), &mut rng).unwrap();
            assert!(ens.positions().all(|p| half.contains(p)));
            total += ens.len() as f64;
        }
        let m = total / trials as f64;
        assert!((m - 16.0).abs() < 3.0 * (16.0 / trials as f64).sqrt(), "mean {m}");

        let liar = IntensityField::new(region, 1.0, |_| 2.0).unwrap();
        assert!(matches!(
            sample_nonhomogeneous(&liar, &mut IdSource::new(0), &mut rng),
            Err(Error::InvalidBound { .. })
        ));
    }

    #[test]
    fn constant_field_matches_homogeneous_mean() {
        let policy = RngPolicy::new(9);
        let region = Region::centered(2, 3.0);
        let field = IntensityField::constant(region.clone(), 1.5).unwrap();
        let trials = 5_000;
        let total: usize = (0..trials)
            .map(|t| {
                let mut rng = policy.stream("c", t);
                sample_nonhomogeneous(&field, &mut IdSource::new(t), &mut rng).unwrap().len()
            })
            .sum();
        let m = total as f64 / trials as f64;
        assert!((m - 13.5).abs() < 3.0 * (13.5 / trials as f64).sqrt(), "mean {m}");
    }

    #[test]
    fn void_probability_and_count_independence() {
        // PPP(1) on the unit square: P[empty] = e^-1; counts in the two halves uncorrelated.
        let policy = RngPolicy::new(10);
        let region = Region::centered(2, 1.0);
        let left = Region::new(vec![-0.5, -0.5], vec![0.0, 0.5]).unwrap();
        let right = Region::new(vec![0.0, -0.5], vec![0.5, 0.5]).unwrap();
        let trials = 100_000u64;
        let mut empty = 0u64;
        let mut pairs = Vec::with_capacity(trials as usize);
        for t in 0..trials {
            let mut rng = policy.stream("void", t);
            let ens = sample_ppp(1.0, &region, &mut IdSource::new(t), &mut rng).unwrap();
            if ens.is_empty() {
                empty += 1;
            }
            pairs.push((ens.count_in(&left) as f64, ens.count_in(&right) as f64));
        }
        let p = (-1.0f64).exp();
        let phat = empty as f64 / trials as f64;
        assert!((phat - p).abs() < 3.0 * (p * (1.0 - p) / trials as f64).sqrt(), "phat {phat}");

        let n = pairs.len() as f64;
        let (mx, my) = pairs.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
        let cov = pairs.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / n;
        let vx = pairs.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>() / n;
        let vy = pairs.iter().map(|(_, y)| (y - my).powi(2)).sum::<f64>() / n;
        let corr = cov / (vx * vy).sqrt();
        assert!(corr.abs() < 3.0 / n.sqrt(), "corr {corr}");
    }

    #[test]
    fn csv_layout() {
        let mut ids = IdSource::new(2);
        let ens = NodeEnsemble::from_points(
            2,
            &[Point(vec![0.5, 1.0]), Point(vec![-1.0, 2.5])],
            &mut ids,
        )
        .unwrap();
        let mut buf = Vec::new();
        ens.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "id,x0,x1\n2:0,0.5,1\n2:1,-1,2.5\n");
    }
}
