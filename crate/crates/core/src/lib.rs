//! Optimal lambda-calculus reduction with token-passing interaction nets and
//! in-net read-back, plus a normal-order reference normalizer.

pub mod harness;
pub mod inet;
pub mod lambda;
pub mod optimal;
pub mod readback;
pub mod system;
pub mod token;
