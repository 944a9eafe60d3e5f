use alloc::string::String;

use crate::graph::EntityKind;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid hyperparameter `{name}`: {reason}")]
    InvalidHyperparam { name: &'static str, reason: String },
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },
    #[error("edge ({user}, {recipe}) is outside a {n_users}x{n_recipes} graph")]
    EdgeOutOfRange {
        user: u32,
        recipe: u32,
        n_users: usize,
        n_recipes: usize,
    },
    #[error("{kind} {index} has zero degree")]
    ZeroDegree { kind: EntityKind, index: usize },
    #[error("{kind} {index} has a zero-norm embedding, cosine similarity is undefined")]
    ZeroNorm { kind: EntityKind, index: usize },
    #[error("user {user} has interacted with every recipe, no negative can be sampled")]
    NoNegative { user: u32 },
    #[error("non-finite loss: {0}")]
    NonFinite(String),
    #[error("invalid split config: {0}")]
    InvalidSplit(String),
    #[error("dataset is empty after filtering: {0}")]
    EmptyDataset(String),
    #[error("empty review history (cold-start user)")]
    EmptyHistory,
    #[error("the {0} split has no users to evaluate")]
    EmptySplit(&'static str),
    #[error("unknown variant `{0}`")]
    UnknownVariant(String),
    #[error("content embeddings are required for this variant but none were provided")]
    MissingContent,
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Decoding failures for the binary embedding and checkpoint formats.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported version {found} (expected {expected})")]
    UnsupportedVersion { expected: u32, found: u32 },
    #[error("truncated `{field}`: need {needed} bytes, {available} available")]
    Truncated {
        field: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("`{field}` length mismatch: header implies {expected} bytes, found {actual}")]
    Length {
        field: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value in `{field}` at element {index}")]
    NonFinite { field: &'static str, index: usize },
    #[error("`{field}` out of range: {detail}")]
    Invalid { field: &'static str, detail: String },
}
