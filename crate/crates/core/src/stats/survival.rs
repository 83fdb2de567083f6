use std::io::Write;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "t,trials,survivors,estimate,ci_low,ci_high,censored";

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::UndefinedInterval);
    }
    if successes > trials {
        return Err(Error::InvalidParameter(format!("{successes} successes out of {trials} trials")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidProbability(confidence));
    }
    let z = Normal::standard().inverse_cdf(1.0 - (1.0 - confidence) / 2.0);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let low = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let high = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    Ok((low, high))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalPoint {
    pub t: u64,
    pub trials: u64,
    pub survivors: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub censored: u64,
    /// Number of trials that carry the information at this `t`: survivors for
    /// a direct estimate, single-node hits for a void estimate.
    pub resolution: u64,
    /// Standard error of `-ln estimate` (infinite when the estimate is 0).
    pub log_se: f64,
}

/// Empirical `t -> P[T >= t]` for `t = 1..=t_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalCurve {
    pub estimator: String,
    pub t_max: u64,
    pub points: Vec<SurvivalPoint>,
}

impl SurvivalCurve {
    /// Direct estimate from per-trial event steps; `None` means no event in
    /// steps `0..t_max` (censored at the horizon).
    pub fn from_event_times(times: &[Option<u64>], t_max: u64) -> Result<Self> {
        let trials = times.len() as u64;
        if trials == 0 {
            return Err(Error::UndefinedInterval);
        }
        let mut events = vec![0u64; t_max as usize + 1];
        let mut censored = 0u64;
        for t in times {
            match t {
                Some(step) if *step < t_max => events[*step as usize] += 1,
                _ => censored += 1,
            }
        }
        let mut points = Vec::with_capacity(t_max as usize);
        let mut survivors = trials;
        for t in 1..=t_max {
            survivors -= events[t as usize - 1];
            let estimate = survivors as f64 / trials as f64;
            let (ci_low, ci_high) = wilson_interval(survivors, trials, 0.95)?;
            let log_se = if survivors == 0 {
                f64::INFINITY
            } else {
                ((1.0 - estimate) / (trials as f64 * estimate)).sqrt()
            };
            points.push(SurvivalPoint {
                t,
                trials,
                survivors,
                estimate,
                ci_low,
                ci_high,
                censored: if t == t_max { censored } else { 0 },
                resolution: survivors,
                log_se,
            });
        }
        Ok(SurvivalCurve { estimator: "direct".into(), t_max, points })
    }

    pub fn at(&self, t: u64) -> Option<&SurvivalPoint> {
        self.points.iter().find(|p| p.t == t)
    }

    pub fn estimate(&self, t: u64) -> Option<f64> {
        self.at(t).map(|p| p.estimate)
    }

    /// `-ln S(t)` with its standard error.
    pub fn neg_log(&self, t: u64) -> Option<(f64, f64)> {
        self.at(t).map(|p| (-p.estimate.ln(), p.log_se))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                p.t, p.trials, p.survivors, p.estimate, p.ci_low, p.ci_high, p.censored
            )?;
        }
        Ok(())
    }
}
