//! Treeplication: an XOR binary-tree erasure code for distributed full
//! recovery under random-multiset availability.
//!
//! A data unit of `k = 2^(d-1)` fragments is placed at the leaves of a perfect
//! binary tree with `d` layers; every internal vertex stores the XOR of its two
//! children. Storage nodes hold copies of tree vertices, so the fragments
//! available at recovery time form a *multiset* of vertices.
//!
//! The crate is organised by concern:
//!
//! - [`tree`]: tree addressing, subsets/multisets, XOR encoding and decoding,
//!   ground-truth decodability.
//! - [`combinatorics`]: exact decodable-subset counts and decoding
//!   probabilities under uniform selection, plus the replication baseline.
//! - [`nonuniform`]: the per-layer inclusion model and its decoding
//!   probability recursion.
//! - [`optimizer`]: search for the best per-layer selection distribution.
//! - [`recovery`]: minimal-communication recovery schedules.
//! - [`cost`]: exact distribution of recovery communication cost.
//! - [`health`]: diagonal covers and the principal l-health measure.
//! - [`augmentation`]: distributed augmentation policies.
//! - [`simulator`]: seeded Monte-Carlo engine and churn process.
//! - [`report`]: reproduction tables with reference values.
//! - [`codec`]: on-disk codeword format.
//! - [`oracle`]: brute-force reference implementations used for verification.

pub mod augmentation;
pub mod codec;
pub mod combinatorics;
pub mod cost;
mod error;
pub mod health;
pub mod nonuniform;
pub mod optimizer;
pub mod oracle;
pub mod recovery;
pub mod report;
pub mod simulator;
pub mod tree;

pub use crate::error::{Error, Result};
pub use crate::tree::{Codeword, Fragment, Multiset, Subset, TreeShape, VertexId};
