//! Reproducible machine-learning experiment tooling.
//!
//! The crate covers the whole lifecycle of a desk-scale experiment:
//!
//! * [`integrity`]: dataset footprints and quick/deep verification
//! * [`provenance`]: component seeds, version-control policy, code snapshots, rerun scripts
//! * [`runstore`]: run directory layout and the wall-clock-free metric log
//! * [`datatools`]: seeded dataset splits and streaming per-channel statistics
//! * [`analysis`]: multi-run aggregation, confusion matrices, PCA, SVG/CSV rendering
//! * [`demo2d`]: a deterministic 2D classification task exercising all of the above
//! * [`sweep`]: local random and grid hyper-parameter search
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below name the common instantiations.

pub mod analysis;
pub mod canonical;
pub mod datatools;
pub mod demo2d;
pub mod error;
pub mod integrity;
pub mod linalg;
pub mod provenance;
pub mod rng;
pub mod runstore;
pub mod scalar;
pub mod stats;
pub mod sweep;

pub use error::{Error, Result};
pub use provenance::derive_component_seed;
pub use rng::SplitMix64;
pub use scalar::Scalar;

pub type Welford64 = stats::Welford<f64>;
pub type Welford32 = stats::Welford<f32>;
pub type Matrix64 = linalg::Matrix<f64>;
pub type Matrix32 = linalg::Matrix<f32>;
pub type AggregateCurve64 = analysis::AggregateCurve<f64>;
pub type AggregateCurve32 = analysis::AggregateCurve<f32>;
pub type PcaResult64 = analysis::PcaResult<f64>;
pub type PcaResult32 = analysis::PcaResult<f32>;
pub type ModelParams64 = demo2d::ModelParams<f64>;
pub type ModelParams32 = demo2d::ModelParams<f32>;
pub type DatasetStats64 = datatools::DatasetStats<f64>;
pub type DatasetStats32 = datatools::DatasetStats<f32>;
