//! Durable state: community pollution reports and hazardous-waste sites.

pub mod hazards;
pub mod journal;
pub mod reports;

use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

use crate::geo::{BoundingBox, GeoPoint};

pub use hazards::{parse_hazard_csv, HazardSite, HazardStore, ImportReport, RowError, HAZARD_CSV_COLUMNS};
pub use journal::{Journal, JournalError, Recovered, TornLine};
pub use reports::{
    write_reports_csv, PollutionReport, ReportCandidate, ReportCategory, ReportFilter, ReportStatus, ReportStore,
    DEFAULT_SERVICE_AREA,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("invalid report: {}", .0.iter().map(|e| format!("{}: {}", e.field, e.message)).collect::<Vec<_>>().join("; "))]
    Validation(Vec<FieldError>),
    #[error(
        "location ({}, {}) is outside the service area (lat {}..{}, lon {}..{}); reports are accepted only for the area this service covers",
        .location.lat, .location.lon, .area.min_lat, .area.max_lat, .area.min_lon, .area.max_lon
    )]
    OutOfArea { location: GeoPoint, area: BoundingBox },
    #[error("unknown report {0}")]
    UnknownReport(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("hazard CSV: {0}")]
    Csv(String),
    #[error(transparent)]
    Journal(#[from] JournalError),
}
