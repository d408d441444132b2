use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("syntax error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("undeclared domain `{0}`")]
    UndeclaredDomain(String),

    #[error("undeclared logvar `{0}`")]
    UndeclaredLogvar(String),

    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("parfactor `{parfactor}`: table has {found} rows, expected {expected}")]
    TableSize {
        parfactor: String,
        expected: usize,
        found: usize,
    },

    #[error("duplicate parfactor name `{0}`")]
    DuplicateParfactor(String),

    #[error("parfactor `{0}` has no strictly positive potential")]
    AllZeroTable(String),

    #[error("invalid model: {0}")]
    Validation(String),

    #[error("count per instance is not uniform; count-normalise first")]
    NonUniformCount,

    #[error("misaligned parfactors: {0}")]
    Misaligned(String),

    #[error("operator precondition violated: {0}")]
    Precondition(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("argument is not a counting randvar")]
    NotCountingArg,

    #[error("evidence has probability zero")]
    ZeroEvidence,

    #[error("resource guard exceeded: {0}")]
    Guard(String),

    #[error("unknown ground randvar `{0}`")]
    UnknownRandvar(String),

    #[error("engine only answers single-term queries")]
    MultiTermQuery,

    #[error("query term `{0}` is not covered by any parcluster")]
    Uncovered(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unknown model family `{0}`")]
    UnknownFamily(String),

    #[error("internal invariant breached: {0}")]
    Internal(String),
}

impl Error {
    /// Errors caused by malformed or inconsistent input text.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::UndeclaredDomain(_)
                | Error::UndeclaredLogvar(_)
                | Error::UnknownRelation(_)
                | Error::TableSize { .. }
                | Error::DuplicateParfactor(_)
                | Error::AllZeroTable(_)
                | Error::Validation(_)
                | Error::UnknownRandvar(_)
        )
    }
}
