//! Robust deterministic policy gradient: a min-max twin-critic actor-critic
//! trained against an adversarial disturbance policy, with exact
//! linear-quadratic game oracles and a quadrotor tracking environment.

// Validation is written as `!(x > 0.0)` so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod checkpoint;
pub mod config;
pub mod diffnet;
pub mod envs;
pub mod gradcheck;
pub mod harness;
pub mod linalg;
pub mod oracle;
pub mod rng;
pub mod scalar;

pub use scalar::Scalar;

pub type Mlp64 = diffnet::Mlp<f64>;
pub type Mlp32 = diffnet::Mlp<f32>;
pub type Matrix64 = linalg::Matrix<f64>;
