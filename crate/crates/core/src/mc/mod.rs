//! Monte Carlo engine: replicated samples, summaries and the checks built
//! on them.
//!
//! Replication `r` at intensity index `j` draws its sample from stream `r`
//! of a key derived from the master seed and `j`, so every output is a pure
//! function of the plan and independent of the worker count.

mod checks;
mod distance;
mod lower_bound;
mod replicate;
mod standardize;
pub mod stats;
mod summary;

pub use checks::{
    bias_from_predictions, concentration_check, estimate_bias, estimate_l_moments, variance_floor_check,
    BiasEstimate, Concentration, LMoments, VarianceFloor, FLOOR_FACTOR, MIN_CONCENTRATION_K, MIN_MOMENT_REPS,
};
pub use distance::{
    ecdf_kolmogorov, kolmogorov_distance, marginal_kolmogorov, multivariate_rect_kolmogorov, z_scores,
    DistanceEstimate, GRID_HALF_WIDTH, MAX_GRID, MAX_RECT_DIM, MIN_SAMPLES,
};
pub use lower_bound::{lower_bound_exponent_fit, LowerBoundFit, LowerBoundPlan};
pub use replicate::{run_replications, run_replications_with_workers, CellData, RawReplications, ReplicationPlan};
pub use standardize::{column_means, covariance, min_eigenvalue, standardize, Standardized, RIDGE};
pub use summary::{summarize, summarize_cell, CellSummary, SummaryOptions, SummaryReport};
