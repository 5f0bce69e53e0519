//! Data augmentation and benchmarking toolkit for network-flow time series.
//!
//! A flow is summarized by its first `N` packets (size, direction and
//! inter-arrival time). The crate provides hand-crafted augmentations over
//! such samples, a class-weighted batch sampler with batch doubling, a small
//! MLP classifier as the measurement instrument, and a Friedman/Nemenyi
//! pipeline for comparing methods across seeds.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod augment;
pub mod bench;
pub mod dataio;
pub mod flow;
pub mod model;
pub mod rng;
pub mod sampling;
pub mod stats;

pub use augment::{apply, AugError, AugKind, AugmentationSpec, FeaturePolicy};
pub use flow::{
    preprocess, validate, validate_relaxed, Dataset, FeatureVector, FlowError, FlowSample,
    NormConfig, Violation,
};
pub use rng::RngStream;

/// Toolkit version reported by the CLI and the run manifest.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
