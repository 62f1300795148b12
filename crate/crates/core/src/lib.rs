//! Clustering of multi-layer networks whose layers come from a two-component
//! mixture of stochastic block models, plus the scalar Binomial and Poisson
//! mixture counterparts.
//!
//! The pipeline is: a spectral initializer ([`init_cluster`]) labels layers
//! and estimates node communities, then [`refine`] re-labels each layer by
//! likelihood under plug-in block estimates. [`harness`] runs the simulation
//! scenarios and handles file formats.

pub mod discrete;
pub mod error;
pub mod fixtures;
pub mod harness;
pub mod init_cluster;
pub mod metrics;
pub mod models;
pub mod refine;
pub mod tensor_core;

pub use error::{Error, Result};

/// Mixes a seed with a tag into an independent-looking seed (SplitMix64
/// finalizer).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
