//! Continual-learning library and experiment harness.
//!
//! A shared-encoder multi-head classifier learns a sequence of text
//! classification tasks. Each stage freezes the current model as a teacher,
//! clones a student, adds a head for the new task, and trains under one of
//! seven regimes: single-task (ST), multi-task (MTL), output-layer only (OL),
//! entire model (EM), elastic weight consolidation (EWC), distillation on the
//! new task's inputs (TKD), or distillation on unlabeled streams from each
//! old task's own distribution (UKD).
//!
//! The crate is desk-scale by design: hashed n-gram features feed a small
//! ReLU MLP, everything is `f64`, single-threaded per run, and bit-exactly
//! reproducible from a seed.

pub mod data;
pub mod error;
pub mod harness;
pub mod model;
pub mod nn;
pub mod strategies;

pub use error::{Error, Result};
