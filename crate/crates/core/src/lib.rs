//! Tabular average-reward MDP toolkit: exact evaluation, approximate policy
//! iteration with error certificates, TD(λ) policy evaluation, policy-update
//! rules and regret accounting.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the bottom of this file fix the scalar to `f64` for everyday use.

// `!(x >= y)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod api;
pub mod bellman;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod mdp;
pub mod regret;
pub mod rl;
pub mod rng;
pub mod scalar;
pub mod transforms;

pub use error::{Error, ErrorClass, Result};
pub use scalar::Real;

pub type Mdp64 = mdp::Mdp<f64>;
pub type Mdp32 = mdp::Mdp<f32>;
pub type Policy64 = mdp::StochasticPolicy<f64>;
pub type Policy32 = mdp::StochasticPolicy<f32>;
pub type Matrix64 = linalg::Matrix<f64>;
pub type Matrix32 = linalg::Matrix<f32>;
pub type FeatureMap64 = rl::FeatureMap<f64>;
pub type FeatureMap32 = rl::FeatureMap<f32>;
pub type ApiTrace64 = api::ApiTrace<f64>;
pub type ApiTrace32 = api::ApiTrace<f32>;
pub type RlTrace64 = rl::RlTrace<f64>;
pub type RlTrace32 = rl::RlTrace<f32>;
