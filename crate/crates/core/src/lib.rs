//! Simulation and closed-form analysis of decentralized stochastic gradient
//! methods on gossip networks.

// Negated float comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::type_complexity)]

pub mod algorithms;
pub mod analysis;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod netgraph;
pub mod noise;
pub mod objectives;
pub mod oracles;
pub mod quadratic_exact;

pub use error::{Error, Result};
