use std::path::PathBuf;

use thiserror::Error;

use crate::kg::Triple;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum CkrlError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: file contains no triples")]
    EmptyInput { path: PathBuf },

    #[error("unknown token {token:?} in {path}:{line}")]
    UnknownToken {
        path: PathBuf,
        line: usize,
        token: String,
    },

    #[error("triple {0} is not a training triple")]
    UnknownTriple(Triple),

    #[error("id out of range: {what} {id} (size {size})")]
    IdOutOfRange {
        what: &'static str,
        id: u32,
        size: usize,
    },

    #[error(
        "noise generation exhausted its retry budget: requested {requested}, achieved {achieved}"
    )]
    NoiseExhausted { requested: usize, achieved: usize },

    #[error(
        "negative sampling exhausted {budget} retries for triple ({}, {}, {})",
        .triple.head, .triple.relation, .triple.tail
    )]
    NegativeSamplingExhausted { triple: Triple, budget: usize },

    #[error("{path}: bad cache file: {msg}; regenerate it with `ckrl precompute-paths`")]
    CacheFormat { path: PathBuf, msg: String },

    #[error("checkpoint dimension mismatch: {msg}")]
    CheckpointMismatch { msg: String },

    #[error("{path}: bad checkpoint: {msg}")]
    CheckpointFormat { path: PathBuf, msg: String },

    #[error("variant {variant} needs a path index and path stats; run `ckrl precompute-paths` first")]
    MissingPathCache { variant: String },

    #[error("non-finite loss at epoch {epoch}; lower the learning rate or check the input data")]
    NonFiniteLoss { epoch: usize },

    #[error("path statistics are inconsistent with the path index: {0}")]
    InconsistentStats(String),

    #[error("noise detection needs at least one labeled noise triple")]
    NoNoiseLabeled,

    #[error("threshold fitting needs a non-empty validation set")]
    EmptyValidation,

    #[error("{0}")]
    InvalidConfig(String),
}

impl CkrlError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CkrlError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CkrlError>;
