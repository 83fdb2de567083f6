use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::survival::SurvivalCurve;

/// Minimum resolution (survivors or hits) for a point to enter a fit.
pub const MIN_RESOLUTION: u64 = 50;
pub const MIN_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    /// `t`
    Linear,
    /// `t / ln t`
    TOverLogT,
    /// `t^{d/(d+2)}`
    Stretched { dim: usize },
}

impl Transform {
    pub fn apply(&self, t: f64) -> Option<f64> {
        match *self {
            Transform::Linear => Some(t),
            Transform::TOverLogT => (t > 1.0).then(|| t / t.ln()),
            Transform::Stretched { dim } => Some(t.powf(dim as f64 / (dim as f64 + 2.0))),
        }
    }

    pub fn name(&self) -> String {
        match *self {
            Transform::Linear => "t".into(),
            Transform::TOverLogT => "t/log t".into(),
            Transform::Stretched { dim } => format!("t^({dim}/{})", dim + 2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn ols(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::FitUnavailable(format!("{} points", x.len().min(y.len()))));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::FitUnavailable("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - (slope * a + intercept)).collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(LineFit { slope, intercept, r_squared, residuals })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailFit {
    pub coordinate: String,
    pub transform: Transform,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
    pub t_lo: u64,
    pub t_hi: u64,
    pub points: usize,
}

fn usable(curve: &SurvivalCurve, range: Option<(u64, u64)>) -> Vec<(u64, f64)> {
    let (lo, hi) = range.unwrap_or((1, curve.t_max));
    curve
        .points
        .iter()
        .filter(|p| p.t >= lo && p.t <= hi && p.estimate > 0.0 && p.resolution >= MIN_RESOLUTION)
        .map(|p| (p.t, -p.estimate.ln()))
        .collect()
}

/// Least squares of `-ln S(t)` against `transform(t)` over `range`, using only
/// points with positive estimate and at least 50 resolution.
pub fn fit_tail(curve: &SurvivalCurve, transform: Transform, range: Option<(u64, u64)>) -> Result<TailFit> {
    let pts: Vec<(u64, f64, f64)> = usable(curve, range)
        .into_iter()
        .filter_map(|(t, y)| transform.apply(t as f64).map(|x| (t, x, y)))
        .collect();
    if pts.len() < MIN_POINTS {
        return Err(Error::FitUnavailable(format!(
            "{} usable points in range, need {MIN_POINTS}",
            pts.len()
        )));
    }
    let x: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.2).collect();
    let line = ols(&x, &y)?;
    Ok(TailFit {
        coordinate: transform.name(),
        transform,
        slope: line.slope,
        intercept: line.intercept,
        r_squared: line.r_squared,
        residuals: line.residuals,
        t_lo: pts[0].0,
        t_hi: pts[pts.len() - 1].0,
        points: pts.len(),
    })
}

/// Fitted exponent `a` in `-ln S(t) ~ c t^a` (log-log least squares).
pub fn fit_exponent(curve: &SurvivalCurve, range: Option<(u64, u64)>) -> Result<LineFit> {
    let pts: Vec<(f64, f64)> = usable(curve, range)
        .into_iter()
        .filter(|(_, y)| *y > 0.0)
        .map(|(t, y)| ((t as f64).ln(), y.ln()))
        .collect();
    if pts.len() < MIN_POINTS {
        return Err(Error::FitUnavailable(format!(
            "{} usable points in range, need {MIN_POINTS}",
            pts.len()
        )));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    ols(&x, &y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::survival::SurvivalPoint;

    fn synthetic(f: impl Fn(f64) -> f64, t_max: u64) -> SurvivalCurve {
        let points = (1..=t_max)
            .map(|t| {
                let s = f(t as f64);
                SurvivalPoint {
                    t,
                    trials: 1_000_000,
                    survivors: 1_000_000,
                    estimate: s,
                    ci_low: s,
                    ci_high: s,
                    censored: 0,
                    resolution: 1_000_000,
                    log_se: 0.0,
                }
            })
            .collect();
        SurvivalCurve { estimator: "synthetic".into(), t_max, points }
    }

    #[test]
    fn exact_exponential() {
        let c = synthetic(|t| (-0.3 * t).exp(), 40);
        let fit = fit_tail(&c, Transform::Linear, None).unwrap();
        assert!((fit.slope - 0.3).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn t_over_log_t_shape() {
        let c = synthetic(|t| (-t / t.ln()).exp(), 200);
        let right = fit_tail(&c, Transform::TOverLogT, Some((2, 200))).unwrap();
        let wrong = fit_tail(&c, Transform::Linear, Some((2, 200))).unwrap();
        assert!((right.r_squared - 1.0).abs() < 1e-12);
        assert!(wrong.r_squared < 1.0);
    }

    #[test]
    fn constant_curve_has_zero_slope() {
        let c = synthetic(|_| 0.4, 20);
        assert!(fit_tail(&c, Transform::Linear, None).unwrap().slope.abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        let c = synthetic(|t| (-t).exp(), 4);
        assert!(matches!(fit_tail(&c, Transform::Linear, None), Err(Error::FitUnavailable(_))));
    }

    #[test]
    fn exponent_of_power_law() {
        let c = synthetic(|t| (-0.2 * t.powf(0.5)).exp(), 100);
        let fit = fit_exponent(&c, None).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-9);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn slope_scales_with_log_survival(a in 0.1..5.0f64, rate in 0.01..0.3f64) {
                let base = synthetic(|t| (-rate * t - 0.01 * t.sqrt()).exp(), 30);
                let scaled = synthetic(|t| (-a * (rate * t + 0.01 * t.sqrt())).exp(), 30);
                let f1 = fit_tail(&base, Transform::Linear, None).unwrap();
                let f2 = fit_tail(&scaled, Transform::Linear, None).unwrap();
                prop_assert!((f2.slope - a * f1.slope).abs() <= 1e-9 * f2.slope.abs().max(1.0));
            }
        }
    }
}
