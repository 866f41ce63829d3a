//! Multi-node runtime for veriquery: configuration, message framing, the
//! querier / computing node / data provider / verifying node roles, two
//! schedulers, a TCP transport, and an experiment runner.

pub mod config;
pub mod data;
pub mod experiment;
pub mod frame;
pub mod keys;
pub mod plot;
pub mod roles;
pub mod runtime;
pub mod system;
pub mod tcp;

pub use config::{Config, ConfigError};
pub use roles::{QueryFailure, QueryResult};
pub use system::{AnySystem, QueryOutcome, System};

use veriquery::elgamal::ElGamalError;
use veriquery::ledger::LedgerError;
use veriquery::protocols::ProtocolError;
use veriquery::query::QueryError;
use veriquery::zkp::ZkpError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("computing node unavailable: {0}")]
    CnUnavailable(String),
    #[error("decoding failed: {0}")]
    DecodeFailure(String),
    #[error("no records contributed to the result")]
    ZeroCount,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] data::DataError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("transport closed: {0}")]
    TransportClosed(String),
    #[error(transparent)]
    ElGamal(#[from] ElGamalError),
    #[error(transparent)]
    Zkp(#[from] ZkpError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Invalid(String),
}

impl From<QueryFailure> for HarnessError {
    fn from(f: QueryFailure) -> Self {
        match f {
            QueryFailure::CnUnavailable(m) => HarnessError::CnUnavailable(m),
            QueryFailure::ZeroCount => HarnessError::ZeroCount,
            QueryFailure::Decode(m) => HarnessError::DecodeFailure(m),
        }
    }
}
