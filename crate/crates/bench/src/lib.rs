//! Shared fixtures for the benchmarks.

use binsmooth::{generate, Dataset, DgpSpec};

/// Quartic design with one uniform covariate.
pub fn quartic(n: usize, seed: u64) -> Dataset {
    generate(&DgpSpec { n, seed, ..DgpSpec::default() }).expect("simulated data")
}
