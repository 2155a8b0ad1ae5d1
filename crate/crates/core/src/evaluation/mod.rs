//! Sample-quality metrics for the toy benchmarks plus the independent
//! numerical oracles (grid quadrature, transition-kernel stationarity,
//! self-normalized importance sampling) used to verify the samplers and
//! the reparametrized gradient estimator.

pub mod histogram;
pub mod metrics;
pub mod quadrature;
pub mod snis;

pub use histogram::{histogram_divergence, HistogramSpec};
pub use metrics::{high_quality_fraction, modes_captured, ModeSpec};
pub use quadrature::{
    discrete_chain_stationary_moments, quadrature_tilted_moments, GridSpec, OracleMethod,
    OracleResult, TiltedMoments,
};
pub use snis::snis_expectation;
