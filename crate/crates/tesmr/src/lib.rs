//! File formats, service clients and pipeline stages for the TESMR recipe
//! recommender. The numerical core is [`tesmr_core`]; this crate adds
//! everything that touches the file system, the network or the command line.

pub mod cli;
pub mod config;
pub mod embed;
mod error;
pub mod ingest;
pub mod pipeline;
pub mod run;
pub mod service;
pub mod store;
pub mod summary;

pub use error::{Error, IoContext, Result};
pub use tesmr_core as core;
