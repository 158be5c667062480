//! Dynamic optical contrast imaging (DOCI) toolkit.
//!
//! * [`lifetime`]: gated emission physics and the DOCI ratio.
//! * [`phantom`] and [`camera`]: synthetic scenes and the gated camera.
//! * [`pipeline`]: frame triplets to DOCI maps, ROI statistics, heatmaps.
//! * [`classifier`]: LDA, block scoring and channel sweeps.
//! * [`characterize`]: calibration and resolution procedures.
//! * [`format`] and [`archive`]: the raster file format and stack directories.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod archive;
pub mod camera;
pub mod channels;
pub mod characterize;
pub mod classifier;
pub mod error;
pub mod format;
pub mod lifetime;
pub mod phantom;
pub mod pipeline;

pub use error::{DociError, Result};
