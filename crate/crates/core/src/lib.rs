//! Approximate nearest neighbour search over fixed-width binary descriptors.
//!
//! The main index is [`RbtForest`], a forest of fixed-depth random binary
//! trees. Each internal node tests a single bit of the descriptor with an AND
//! mask and routes it left or right; leaves hold descriptor ids. A query walks
//! every tree to one leaf, unions the leaf contents and re-ranks the union by
//! exact Hamming distance.
//!
//! Three bit-sampling LSH baselines ([`LshIndex`]) share the same
//! [`AnnIndex`] interface, and [`bit_metrics`] computes per-bit statistics
//! that can bias the node bit selection.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, timing and the
//! command line live in the `rbt-bench` crate.

#![no_std]
#![warn(missing_debug_implementations, rust_2018_idioms, unused_qualifications)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bit_metrics;
mod dataset;
mod descriptor;
mod error;
pub mod eval;
mod index;
pub mod lsh;
pub mod rbt;
pub mod rng;
pub mod snapshot;
pub mod synth;
mod topn;

pub use dataset::{DescriptorId, LabeledDataset, PointLabel};
pub use descriptor::{hamming, BinaryDescriptor, DEFAULT_DIM};
pub use error::{Error, Result};
pub use index::{AnnIndex, ExactIndex, QueryStats};
pub use lsh::{LshIndex, LshParams, LshVariant};
pub use rbt::{RbtForest, RbtParams};
pub use topn::{select_top_n, select_top_n_counted, Neighbour};
