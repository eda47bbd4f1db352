//! Preprocessing, simulation and forecasting toolkit for weekly
//! search-interest panels: triage and clustering of sparse keywords,
//! look-ahead-free spline denoising, unit-root-guided detrending, a
//! rolling-origin forecasting harness and a generative simulator of the
//! reporting mechanism.
//!
//! Numeric kernels are generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the pipeline's working precision to `f64`.

pub mod cluster;
pub mod config;
pub mod denoise;
pub mod detrend;
pub mod error;
pub mod evalstats;
pub mod features;
pub mod forecast;
pub mod ingest;
pub mod pipeline;
pub mod scalar;
pub mod select;
pub mod stats;
pub mod synthgen;
pub mod triage;

pub use error::{Error, Result};
pub use ingest::{align_panels, parse_trends_csv, zero_fraction, ReplicateStore, SeriesPanel};
pub use scalar::Real;

/// Working-precision dendrogram.
pub type Dendrogram = cluster::Dendrogram<f64>;
/// Working-precision spline fit.
pub type SplineFit = denoise::SplineFit<f64>;
/// Working-precision dense matrix.
pub type Matrix = stats::Matrix<f64>;
