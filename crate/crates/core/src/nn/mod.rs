//! Deterministic small-scale differentiable math: matrices, affine/ReLU
//! stacks with inverted dropout, temperature-softmax losses, Adam, and a
//! finite-difference gradient oracle.
//!
//! Everything here is plain `f64` on the CPU and bit-deterministic for a
//! given seed.

mod adam;
mod gradcheck;
mod layers;
mod losses;
mod matrix;

pub use adam::{AdamParams, AdamState};
pub use gradcheck::grad_check;
pub use layers::{AffineGrad, AffineLayer, LayerStack, StackGradients};
pub use losses::{
    cross_entropy, entropy, kd_loss, kd_loss_grad, softmax_t, LogitVector, ProbabilityVector,
    Temperature,
};
pub use matrix::Matrix;

/// Splitmix64 finalizer; used to derive independent seeds and salts.
pub(crate) fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58476d1ce4e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d049bb133111eb);
    x ^= x >> 31;
    x
}

/// Derives a child seed from a parent seed and a stream tag.
pub(crate) fn derive_seed(parent: u64, tag: u64) -> u64 {
    mix64(parent ^ mix64(tag))
}
