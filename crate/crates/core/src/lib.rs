//! Universal adversarial perturbations for differentiable classifiers.
//!
//! The crate builds a single image-agnostic vector that flips the
//! predictions of most inputs of a classifier, by aggregating per-sample
//! minimal perturbations and projecting onto an lp ball. Around that core
//! live the pieces a robustness study needs: per-sample attacks, baseline
//! perturbations, decision-boundary geometry probes, cross-model transfer,
//! and fine-tuning with a perturbation pool.

pub mod analysis;
pub mod attacks;
pub mod defense;
mod error;
pub mod models;
pub mod numerics;
pub mod universal;

pub use error::{Error, Result};
