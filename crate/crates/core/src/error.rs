use std::io;

use thiserror::Error;

/// Errors raised by the state-vector core, the protocol drivers and the
/// scenario runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid quantum state: {0}")]
    InvalidState(String),
    #[error("key length mismatch: expected {expected} bits, got {actual}")]
    KeyLength { expected: usize, actual: usize },
    #[error("length mismatch: {left} vs {right} qubits")]
    Length { left: usize, right: usize },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("protocol stalled: {0}")]
    ProtocolStall(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("request denied: session {0} has no registered receiver")]
    DeniedUnregistered(u64),
    #[error("transcript parse error on line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
