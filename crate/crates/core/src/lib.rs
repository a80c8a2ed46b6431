//! Scene-text detection for Urdu signage.
//!
//! The detector runs four stages over an RGB image:
//!
//! 1. channel-enhanced MSER region extraction ([`mser`]),
//! 2. geometric and patch-SVM filtering of the regions ([`features`], [`filtering`]),
//! 3. centroid-rule linking of surviving characters into lines ([`linking`]),
//! 4. HOG + SVM verification of each line ([`hog`], [`filtering`]).
//!
//! [`pipeline`] wires the stages together, [`eval`] scores detections against
//! ground truth by overlap ratio, and [`dataset`]/[`synth`] provide the file
//! formats, patch mining and a synthetic scene generator for training.

pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod filtering;
pub mod hog;
pub mod imaging;
pub mod linking;
pub mod mser;
pub mod pipeline;
pub mod svm;
pub mod synth;

pub use error::{Error, Result};
