//! Deterministic evaluation toolkit and pipeline harness for video
//! panoptic and video semantic segmentation.
//!
//! The crate computes windowed video panoptic quality (VPQ), segmentation
//! and tracking quality (STQ), mean and weighted IoU, and n-frame video
//! consistency (VC) over datasets of (prediction, ground-truth) video
//! pairs. It also implements the track-association and window-stitching
//! stages of a decoupled segment-track-refine pipeline, a synthetic scene
//! generator with analytically predictable corruption operators, and a
//! report renderer for leaderboard fixtures.
//!
//! Start with the runnable examples (`cargo run --example ...`) or the
//! `vidseg` binary for the command-line surface.

pub mod data;
pub mod error;
pub mod eval;
pub mod matching;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod synth;

pub use error::{Error, Result};
