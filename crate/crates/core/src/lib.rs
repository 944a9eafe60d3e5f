//! Allocation-only core of the TESMR multimodal recipe recommender.
//!
//! Everything here is pure computation over in-memory data: the bipartite
//! interaction graph, symmetric-normalized message propagation with layer
//! averaging, the dual-branch model with BPR, cross-view InfoNCE and L2
//! losses (all with hand-derived gradients), Adam, negative sampling, top-k
//! ranking metrics, prompt templates, the offline fallback summarizer and
//! encoder, and the binary embedding/checkpoint codecs.
//!
//! File IO, network clients and the command line live in the `tesmr` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod dataset;
pub mod encode;
mod error;
pub mod evaluate;
pub mod experiments;
pub mod graph;
pub mod hyper;
pub mod matrix;
pub mod propagate;
pub mod summarize;
pub mod synthetic;
pub mod train;

pub use error::{Error, FormatError, Result};
pub use graph::{EntityIndex, EntityKind, InteractionGraph};
pub use hyper::Hyperparams;
pub use matrix::{EmbeddingMatrix, Matrix};
