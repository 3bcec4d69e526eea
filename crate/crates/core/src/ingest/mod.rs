//! Upstream ingestion: rate limiting, polling, payload normalization and
//! dataset replay.

pub mod clock;
pub mod fetch;
pub mod limiter;
pub mod payload;
pub mod poller;
pub mod replay;

use std::path::PathBuf;

use thiserror::Error;

pub use clock::{Clock, ManualClock, ScaledClock, SystemClock};
pub use fetch::{FetchError, Fetcher, HttpFetcher};
pub use limiter::{Permit, RateLimiter};
pub use payload::{parse_payload, ParsedPayload, RawPayload};
pub use poller::{FetchOutcome, Poller, UpstreamConfig};
pub use replay::{Dataset, ReplayReport, ReplaySpeed};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("sensor {sensor_id}: unparseable payload: {message}")]
    Parse { sensor_id: String, message: String },
    #[error("sensor {sensor_id}: invalid reading: {message}")]
    Validation { sensor_id: String, message: String },
    #[error(transparent)]
    Fetch(#[from] FetchError),
    #[error("dataset {path}: {source}")]
    Dataset {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("upstream config: {0}")]
    Config(String),
}
