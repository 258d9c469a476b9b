//! Radiometric thermal-camera toolkit.
//!
//! * [`radiometry`]: emission physics and the gray-level acquisition model.
//! * [`calibration`]: per-pixel polynomial calibration, radial
//!   regularization and frame synthesis.
//! * [`burst`]: homography paths, warping, fixed-pattern noise, noise and
//!   burst assembly.
//! * [`fusion`]: temperature estimation from registered bursts.
//! * [`metrics`]: losses and error reports.
//! * [`cli`]: the `thermofuse` command-line driver.

pub mod burst;
pub mod calibration;
pub mod cli;
pub mod error;
pub mod fusion;
pub mod grid;
pub mod io;
pub mod lstsq;
pub mod metrics;
pub mod pipeline;
pub mod radiometry;
pub mod scene;

pub use error::{Error, Result};
pub use grid::{GrayFrame, Grid, Mask, TemperatureMap};
