use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::lang::StmtId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error at {line}:{col}: {message}")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("type error at statement {stmt:?}: {message}")]
pub struct TypeError {
    /// `None` for declaration-level errors (schema, members).
    pub stmt: Option<StmtId>,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("decode error at byte {offset}: {message}")]
    Decode { offset: u64, message: String },
    #[error("unsorted input: key at record {index} regresses")]
    UnsortedInput { index: u64 },
    #[error("dictionary full: more than 2^32 distinct values")]
    DictionaryFull,
    #[error("catalog lock {path} could not be acquired")]
    Lock { path: PathBuf },
    #[error("invalid index spec: {0}")]
    InvalidSpec(String),
}

impl StorageError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        StorageError::Io { path: path.into(), source }
    }

    pub fn decode(offset: u64, message: impl Into<String>) -> Self {
        StorageError::Decode { offset, message: message.into() }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("index {index} is stale: input {input} hash changed")]
    StaleIndex { index: PathBuf, input: PathBuf },
    #[error("plan does not match job: {0}")]
    PlanMismatch(String),
    #[error("invalid descriptor: {0}")]
    InvalidDescriptor(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum JobError {
    #[error("runtime error at statement {stmt}: {message}")]
    Runtime { stmt: StmtId, message: String },
    #[error("direct-operation rewrite refused: {0}")]
    Rewrite(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WorkloadError {
    #[error("URL pool is empty")]
    EmptyPool,
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Job(#[from] JobError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
}
