//! Configuration, sweep orchestration, output and the command-line front end.

pub mod cli;
pub mod config;
pub mod output;
pub mod selftest;
pub mod sweep;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::netgraph::{build_mixing, shift_mixing, MixingMatrix, Topology, WeightRule};
use crate::objectives::{random_aligned_quadratic, ObjectiveSuite};

/// Seed of the reference quadratic suite.
pub const REFERENCE_SEED: u64 = 7;

/// Three-node ring with Metropolis weights shifted by `τ = 1` (spectrum
/// `{1, 1/2, 1/2}`) and an aligned quadratic suite with `d = 2`, `μ = 1`,
/// `L = 4`.
pub fn reference_instance() -> Result<(MixingMatrix, ObjectiveSuite)> {
    let w = shift_mixing(&build_mixing(&Topology::Ring { n: 3 }, WeightRule::Metropolis)?, 1.0)?;
    let suite = random_aligned_quadratic(3, 2, 1.0, 4.0, &mut ChaCha8Rng::seed_from_u64(REFERENCE_SEED))?;
    Ok((w, suite))
}
