//! Shared fixtures for the criterion benchmarks.

use mfpc_core::{ChannelDistribution, Population};

/// Rayleigh population with `σ = 5`, the reference benchmark workload.
pub fn rayleigh_population(n: usize, seed: u64) -> Population {
    Population::sample(&ChannelDistribution::RayleighSquared { sigma: 5.0 }, n, seed)
        .expect("valid reference distribution")
}
