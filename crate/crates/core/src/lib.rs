//! Spline networks: neural layers applied directly to the coefficients of
//! piecewise-polynomial interpolants of irregular, partially observed time
//! series.
//!
//! The crate is layered bottom-up:
//! - [`polynomial`] / [`fft`]: dense polynomial arithmetic, FFT products and
//!   Taylor shifts.
//! - [`spline`]: multi-channel splines on a shared knot grid, fitting,
//!   knot alignment, arithmetic, integration and ReLU.
//! - [`layers`]: affine, integration, area normalization, kernel layers and
//!   their adjoints.
//! - [`model`]: the classifier, gradients, training and evaluation.
//! - [`data`]: JSONL/CSV ingestion, normalization, augmentation, synthetic
//!   data and splits.

pub mod data;
pub mod error;
pub mod fft;
pub mod layers;
pub mod model;
pub mod polynomial;
pub mod spline;

pub use error::{Error, Result};
pub use polynomial::Polynomial;
pub use spline::{fit, FitKind, Spline, TimeSeries};
