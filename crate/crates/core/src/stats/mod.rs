//! Survival curves, tail-shape fits and the concentration bounds.

pub mod bounds;
pub mod fit;
pub mod survival;

pub use bounds::{normal_tail_bound, poisson_chernoff, Side};
pub use fit::{fit_exponent, fit_tail, ols, TailFit, Transform};
pub use survival::{wilson_interval, SurvivalCurve, SurvivalPoint};
