pub mod broadcast;
pub mod detection;
pub mod diagnostics;
pub mod percolation;

pub use broadcast::{giant_overlap, run_broadcast, BroadcastResult, BroadcastTrialSpec};
pub use detection::{
    estimate_m, estimate_m_prime, run_detection, run_single_node_tau, sausage_oracle, DetectionTrialSpec,
    Estimator, Target,
};
pub use diagnostics::{dense_cell_diagnostic, escape_diagnostic, sparse_cell_bound};
pub use percolation::{run_percolation, PercolationResult, PercolationTrialSpec, Proxy};
