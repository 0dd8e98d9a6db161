//! Risk-averse adversarial imitation learning on toy continuous-control
//! tasks.
//!
//! The crate trains an expert by trust-region policy optimization on an
//! environment's true cost, distills it into an adversarially trained
//! imitation policy, and optionally augments the adversarial objective with
//! a conditional-value-at-risk term that suppresses rare high-cost
//! trajectories. Tail-risk metrics compare the resulting policies.
//!
//! Everything is deterministic given a config and seed; batch work runs in
//! parallel under the `parallel` feature with bit-identical results.

pub mod config;
pub mod disc;
pub mod envs;
pub mod error;
pub mod io;
pub mod metrics;
pub mod numerics;
pub mod parallel;
pub mod policy;
pub mod risk;
pub mod rng;
pub mod trainer;
pub mod trpo;

pub use error::{Error, Result};
