//! Non-atomic routing games under network-agnostic tolls.
//!
//! Computes optimal and Nash flows for single-commodity networks with
//! polynomial latencies and populations of finitely many toll-sensitivity
//! classes, and evaluates the price of anarchy and perversity index of
//! generalized marginal-cost tolls.

pub mod equilibrium;
mod error;
pub mod game;
pub mod mechanism;
pub mod metrics;
pub mod scenarios;

pub use error::{Error, Result};
