use alloc::string::String;

use crate::snapshot::SnapshotError;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} bits, got {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("bit position {pos} out of range for a {dim}-bit descriptor")]
    BitOutOfRange { pos: usize, dim: usize },
    #[error("descriptor id {id} out of range for a dataset of {len}")]
    InvalidId { id: u32, len: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("descriptor count {descriptors} does not match label count {labels}")]
    LengthMismatch { descriptors: usize, labels: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid bit weights: {0}")]
    InvalidWeights(String),
    #[error("index was built over a different dataset ({expected} descriptors, got {actual})")]
    DatasetMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
}
