//! Adapters for external services (domain categorisation, web-archive
//! first capture, face attributes, DNS) behind a record/replay fixture store.

mod key;
mod services;
mod store;
mod transport;

use thiserror::Error;

pub use key::{RequestKey, Service};
pub use services::{
    parse_categories, parse_dns, parse_face_details, parse_wayback, Client, Coverage, FaceAttributes, FaceRegion,
};
pub use store::{FixtureMeta, FixtureStore};
pub use transport::{FailingTransport, LiveTransport, TokenBucket, Transport};

pub const MODE_ENV: &str = "POOLAUDIT_MODE";

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("fixture missing for {service}: {key}")]
    FixtureMissing { service: String, key: String },
    #[error("{service}: HTTP status {status}: {message}")]
    Http { service: String, status: u16, message: String },
    #[error("{service}: transport failure: {message}")]
    Transport { service: String, message: String },
    #[error("{service}: malformed response: {reason}")]
    Malformed { service: String, reason: String },
    #[error("{service}: not configured for live access: {reason}")]
    NotConfigured { service: String, reason: String },
    #[error("unknown fetch mode {0:?} (expected replay, record or live)")]
    BadMode(String),
    #[error("fixture store {path}: {source}")]
    Store {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FetchMode {
    #[default]
    Replay,
    Record,
    Live,
}

impl FetchMode {
    /// Mode from `POOLAUDIT_MODE`, defaulting to replay when unset.
    pub fn from_env() -> Result<Self, ClientError> {
        match std::env::var(MODE_ENV) {
            Ok(v) => v.parse(),
            Err(_) => Ok(FetchMode::Replay),
        }
    }

    pub fn touches_network(self) -> bool {
        self != FetchMode::Replay
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FetchMode::Replay => "replay",
            FetchMode::Record => "record",
            FetchMode::Live => "live",
        }
    }
}

impl std::str::FromStr for FetchMode {
    type Err = ClientError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "replay" => Ok(FetchMode::Replay),
            "record" => Ok(FetchMode::Record),
            "live" => Ok(FetchMode::Live),
            _ => Err(ClientError::BadMode(s.to_string())),
        }
    }
}
