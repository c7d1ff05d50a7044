//! Depth-infused gaze target detection toolkit.
//!
//! Geometry and pseudo-label generation ([`geometry`], [`binning`],
//! [`dism`]), heatmaps and evaluation ([`heatmap`], [`metrics`]), a toy
//! multi-modal fusion forward pass ([`fusion`], [`weights`]) and on-disk
//! formats ([`dataset`], [`io`]).
//!
//! Batch entry points take an [`Execution`] policy. With the `parallel`
//! feature (on by default) records are spread over a rayon pool; results
//! are identical to the sequential path.

pub mod binning;
pub mod dataset;
pub mod dism;
pub mod error;
pub mod exec;
pub mod fusion;
pub mod geometry;
pub mod heatmap;
pub mod io;
pub mod metrics;
pub mod synth;
pub mod weights;

pub use error::{Error, Result};
pub use exec::Execution;
