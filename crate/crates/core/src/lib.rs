//! Monte Carlo laboratory for mobile geometric graphs: Poisson nodes moving
//! by Brownian motion, connected within the unit-volume transmission range.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod coupling;
pub mod domain;
pub mod error;
pub mod experiments;
pub mod geo_graph;
pub mod harness;
pub mod motion;
pub mod point_process;
pub mod quadrature;
pub mod rng;
pub mod runner;
pub mod stats;
pub mod union_find;

pub use error::{Error, Result};
