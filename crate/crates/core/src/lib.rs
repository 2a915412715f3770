//! Core library for the variance constancy loss (VCL) stack.
//!
//! The crate bundles the pieces needed to study and train with the VCL
//! regularizer end to end:
//!
//! - [`stats`]: sample-moment statistics, the closed-form variance of sample
//!   variances, and Monte-Carlo/Chebyshev verification machinery.
//! - [`tensor`]: a minimal reverse-mode autodiff engine over dense `f64`
//!   tensors.
//! - [`nn`]: dense layers, batch/layer normalization baselines, and dropout.
//! - [`vcl`]: the two-subset variance constancy loss with learnable
//!   per-neuron stabilizers.
//! - [`gmm`]: closed-form projection kurtosis of two-component Gaussian
//!   mixtures, the separate/merge phase predicate, and single-unit
//!   experiments.
//! - [`data`]: CSV ingestion, deterministic stratified splits,
//!   standardization, and synthetic generators.
//! - [`train`]: a deterministic SGD loop with momentum, weight decay,
//!   per-layer gradient clipping, and smoothed validation selection.

pub mod data;
pub mod error;
pub mod gmm;
pub mod nn;
pub mod stats;
pub mod tensor;
pub mod train;
pub mod vcl;

pub use error::{CoreError, Result};
pub use tensor::Tensor;
