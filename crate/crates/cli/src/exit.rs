//! Process exit codes and the error classification behind them.

use std::fmt;

use ssu_client::ClientError;
use ssu_core::api::{ApiError, ApiErrorKind};

pub const SUCCESS: u8 = 0;
/// `validate` judged the stream invalid.
pub const INVALID: u8 = 1;
pub const INPUT: u8 = 2;
pub const SCORER: u8 = 3;

/// An error carrying the exit code it should produce.
#[derive(Debug)]
pub struct Coded {
    pub code: u8,
    pub error: anyhow::Error,
}

impl fmt::Display for Coded {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl std::error::Error for Coded {}

pub fn coded(code: u8, error: impl Into<anyhow::Error>) -> anyhow::Error {
    Coded {
        code,
        error: error.into(),
    }
    .into()
}

pub fn input_error(error: impl Into<anyhow::Error>) -> anyhow::Error {
    coded(INPUT, error)
}

fn api_code(kind: ApiErrorKind) -> u8 {
    match kind {
        ApiErrorKind::ScorerUnavailable | ApiErrorKind::ScorerProtocol => SCORER,
        ApiErrorKind::BadRequest | ApiErrorKind::Internal => INPUT,
    }
}

pub fn from_api(e: ApiError) -> anyhow::Error {
    coded(api_code(e.kind), e)
}

pub fn from_client(e: ClientError) -> anyhow::Error {
    let code = match &e {
        ClientError::Api { error, .. } => api_code(error.kind),
        ClientError::Unreachable { .. } | ClientError::Malformed { .. } => SCORER,
        ClientError::Setup(_) => INPUT,
    };
    coded(code, e)
}

/// Exit code for an error; unclassified errors are input errors.
pub fn code_of(e: &anyhow::Error) -> u8 {
    e.chain()
        .find_map(|c| c.downcast_ref::<Coded>())
        .map_or(INPUT, |c| c.code)
}
