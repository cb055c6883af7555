//! k-potential-nearest-neighbour geometry, random-forest predictors built on
//! it, and Monte Carlo tools for studying their distributional behaviour.

pub mod error;
pub mod forest;
pub mod geometry;
pub mod mc;
pub mod process;
pub mod quad;
pub mod rng;
pub mod stabilization;

pub use error::{Error, Result};
pub use forest::{predict_multi, predict_uniform, predict_weighted, predict_weighted_at, Prediction, SchemeKind, WeightScheme};
pub use geometry::{is_kpnn, kpnn_set, kpnn_set_fast, pnn_counts, HyperRect, Point, PointConfig};
pub use process::{sample_marked, sample_poisson_config, DensitySpec, MarkedSample, Model};
pub use rng::SeedSpec;
