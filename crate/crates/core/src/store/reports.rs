use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::journal::{Journal, TornLine};
use super::{FieldError, StoreError};
use crate::geo::{BoundingBox, GeoPoint};

pub const MAX_DESCRIPTION_CHARS: usize = 2000;
pub const MAX_CONTACT_CHARS: usize = 320;

/// Kansas City, KS/MO metro area.
pub const DEFAULT_SERVICE_AREA: BoundingBox =
    BoundingBox { min_lon: -94.95, min_lat: 38.8, max_lon: -94.35, max_lat: 39.4 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportCategory {
    Smoke,
    Odor,
    Dust,
    IndustrialEmission,
    Other,
}

impl ReportCategory {
    pub const ALL: [ReportCategory; 5] = [
        ReportCategory::Smoke,
        ReportCategory::Odor,
        ReportCategory::Dust,
        ReportCategory::IndustrialEmission,
        ReportCategory::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReportCategory::Smoke => "smoke",
            ReportCategory::Odor => "odor",
            ReportCategory::Dust => "dust",
            ReportCategory::IndustrialEmission => "industrial_emission",
            ReportCategory::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for ReportCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportStatus {
    New,
    Reviewed,
}

impl ReportStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ReportStatus::New => "new",
            ReportStatus::Reviewed => "reviewed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "new" => Some(ReportStatus::New),
            "reviewed" => Some(ReportStatus::Reviewed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PollutionReport {
    pub id: String,
    pub location: GeoPoint,
    pub category: ReportCategory,
    pub description: String,
    pub reporter_contact: Option<String>,
    pub created_at: DateTime<Utc>,
    pub status: ReportStatus,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
pub struct CandidateLocation {
    pub lat: Option<f64>,
    pub lon: Option<f64>,
}

/// Client-supplied report fields. Anything else the client sends (ids,
/// timestamps, status) is ignored.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
pub struct ReportCandidate {
    pub location: Option<CandidateLocation>,
    pub category: Option<String>,
    pub description: Option<String>,
    pub reporter_contact: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportFilter {
    pub status: Option<ReportStatus>,
    pub bbox: Option<BoundingBox>,
    pub from: Option<DateTime<Utc>>,
    pub to: Option<DateTime<Utc>>,
}

impl ReportFilter {
    pub fn matches(&self, r: &PollutionReport) -> bool {
        self.status.is_none_or(|s| r.status == s)
            && self.bbox.is_none_or(|b| b.contains(r.location))
            && self.from.is_none_or(|f| r.created_at >= f)
            && self.to.is_none_or(|t| r.created_at <= t)
    }
}

/// Community pollution reports, optionally backed by a journal.
#[derive(Debug)]
pub struct ReportStore {
    reports: BTreeMap<String, PollutionReport>,
    journal: Option<Journal<PollutionReport>>,
    service_area: BoundingBox,
}

impl ReportStore {
    pub fn in_memory(service_area: BoundingBox) -> Self {
        Self { reports: BTreeMap::new(), journal: None, service_area }
    }

    /// Replays `path`; each line is a full report and later lines for the
    /// same id supersede earlier ones.
    pub fn open(path: impl AsRef<Path>, service_area: BoundingBox) -> Result<(Self, Option<TornLine>), StoreError> {
        let (journal, recovered) = Journal::open(path)?;
        let mut reports = BTreeMap::new();
        for r in recovered.records {
            let r: PollutionReport = r;
            reports.insert(r.id.clone(), r);
        }
        Ok((Self { reports, journal: Some(journal), service_area }, recovered.torn))
    }

    pub fn service_area(&self) -> BoundingBox {
        self.service_area
    }

    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&PollutionReport> {
        self.reports.get(id)
    }

    /// Every stored report, keyed by id.
    pub fn snapshot(&self) -> BTreeMap<String, PollutionReport> {
        self.reports.clone()
    }

    fn validate(&self, c: &ReportCandidate) -> Result<(GeoPoint, ReportCategory, String, Option<String>), StoreError> {
        let mut errors = Vec::new();
        let mut err = |field: &str, message: String| errors.push(FieldError { field: field.into(), message });

        let location = match &c.location {
            None => {
                err("location", "location is required".into());
                None
            }
            Some(loc) => match (loc.lat, loc.lon) {
                (Some(lat), Some(lon)) => {
                    let mut ok = true;
                    if !(-90.0..=90.0).contains(&lat) {
                        err("location.lat", format!("latitude {lat} must be within -90..=90"));
                        ok = false;
                    }
                    if !(-180.0..=180.0).contains(&lon) {
                        err("location.lon", format!("longitude {lon} must be within -180..=180"));
                        ok = false;
                    }
                    ok.then_some(GeoPoint { lat, lon })
                }
                (lat, lon) => {
                    if lat.is_none() {
                        err("location.lat", "latitude is required".into());
                    }
                    if lon.is_none() {
                        err("location.lon", "longitude is required".into());
                    }
                    None
                }
            },
        };

        let category = match c.category.as_deref() {
            None => {
                err("category", "category is required".into());
                None
            }
            Some(s) => ReportCategory::parse(s).or_else(|| {
                let allowed: Vec<&str> = ReportCategory::ALL.iter().map(|c| c.as_str()).collect();
                err("category", format!("unknown category {s:?}; expected one of {}", allowed.join(", ")));
                None
            }),
        };

        let description = c.description.as_deref().map(str::trim).unwrap_or_default();
        if description.is_empty() {
            err("description", "description must not be empty".into());
        } else if description.chars().count() > MAX_DESCRIPTION_CHARS {
            err("description", format!("description exceeds {MAX_DESCRIPTION_CHARS} characters"));
        }

        let contact = c.reporter_contact.as_deref().map(str::trim).filter(|s| !s.is_empty());
        if contact.is_some_and(|s| s.chars().count() > MAX_CONTACT_CHARS) {
            err("reporter_contact", format!("reporter_contact exceeds {MAX_CONTACT_CHARS} characters"));
        }

        if !errors.is_empty() {
            return Err(StoreError::Validation(errors));
        }
        let location = location.expect("no errors means location parsed");
        if !self.service_area.contains(location) {
            return Err(StoreError::OutOfArea { location, area: self.service_area });
        }
        Ok((location, category.expect("validated"), description.to_owned(), contact.map(str::to_owned)))
    }

    /// Validates and durably stores a new report. Id, timestamp and status
    /// are assigned here.
    pub fn submit(&mut self, candidate: &ReportCandidate, now: DateTime<Utc>) -> Result<PollutionReport, StoreError> {
        let (location, category, description, reporter_contact) = self.validate(candidate)?;
        let mut id = uuid::Uuid::new_v4().to_string();
        while self.reports.contains_key(&id) {
            id = uuid::Uuid::new_v4().to_string();
        }
        let report = PollutionReport {
            id,
            location,
            category,
            description,
            reporter_contact,
            created_at: now,
            status: ReportStatus::New,
        };
        if let Some(j) = &mut self.journal {
            j.append(&report)?;
        }
        self.reports.insert(report.id.clone(), report.clone());
        Ok(report)
    }

    /// Moves a report from `new` to `reviewed`. Reviewing twice is a no-op.
    pub fn mark_reviewed(&mut self, id: &str) -> Result<PollutionReport, StoreError> {
        let current = self.reports.get(id).ok_or_else(|| StoreError::UnknownReport(id.to_owned()))?;
        if current.status == ReportStatus::Reviewed {
            return Ok(current.clone());
        }
        let mut updated = current.clone();
        updated.status = ReportStatus::Reviewed;
        if let Some(j) = &mut self.journal {
            j.append(&updated)?;
        }
        self.reports.insert(id.to_owned(), updated.clone());
        Ok(updated)
    }

    /// Matching reports, newest first, ties broken by id.
    pub fn list(&self, filter: &ReportFilter) -> Vec<PollutionReport> {
        let mut out: Vec<PollutionReport> = self.reports.values().filter(|r| filter.matches(r)).cloned().collect();
        out.sort_by(|a, b| b.created_at.cmp(&a.created_at).then_with(|| a.id.cmp(&b.id)));
        out
    }
}

/// Writes reports as CSV, one row per report, location split into two columns.
pub fn write_reports_csv<W: io::Write>(reports: &[PollutionReport], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "id",
        "latitude",
        "longitude",
        "category",
        "description",
        "reporter_contact",
        "created_at",
        "status",
    ])?;
    for r in reports {
        w.write_record([
            r.id.clone(),
            r.location.lat.to_string(),
            r.location.lon.to_string(),
            r.category.as_str().to_owned(),
            r.description.clone(),
            r.reporter_contact.clone().unwrap_or_default(),
            crate::format_timestamp(r.created_at),
            r.status.as_str().to_owned(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, TimeZone};
    use rand::{Rng, SeedableRng};

    fn now() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2021, 6, 1, 12, 0, 0).unwrap()
    }

    fn candidate(lat: f64, lon: f64, category: &str, description: &str) -> ReportCandidate {
        ReportCandidate {
            location: Some(CandidateLocation { lat: Some(lat), lon: Some(lon) }),
            category: Some(category.into()),
            description: Some(description.into()),
            reporter_contact: None,
        }
    }

    fn field_names(err: StoreError) -> Vec<String> {
        match err {
            StoreError::Validation(v) => v.into_iter().map(|e| e.field).collect(),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn valid_report_is_stored_as_new() {
        let mut store = ReportStore::in_memory(DEFAULT_SERVICE_AREA);
        let r = store.submit(&candidate(39.08, -94.64, "smoke", "black smoke from the yard"), now()).unwrap();
        assert_eq!(r.status, ReportStatus::New);
        assert_eq!(r.category, ReportCategory::Smoke);
        assert_eq!(r.created_at, now());
        assert_eq!(store.get(&r.id), Some(&r));
    }

    #[test]
    fn out_of_area_is_rejected() {
        let mut store = ReportStore::in_memory(DEFAULT_SERVICE_AREA);
        let err = store.submit(&candidate(0.0, 0.0, "smoke", "x"), now()).unwrap_err();
        assert!(matches!(err, StoreError::OutOfArea { .. }));
        assert!(err.to_string().contains("service area"));
        assert!(store.is_empty());
    }

    #[test]
    fn field_level_errors() {
        let mut store = ReportStore::in_memory(DEFAULT_SERVICE_AREA);
        let err = store.submit(&candidate(39.08, -94.64, "smoke", "   "), now()).unwrap_err();
        assert_eq!(field_names(err), vec!["description"]);
        let err = store.submit(&candidate(39.08, -94.64, "fog", "x"), now()).unwrap_err();
        assert_eq!(field_names(err), vec!["category"]);
        let err = store.submit(&candidate(95.0, -194.0, "smoke", "x"), now()).unwrap_err();
        assert_eq!(field_names(err), vec!["location.lat", "location.lon"]);
        let long = "x".repeat(MAX_DESCRIPTION_CHARS + 1);
        let err = store.submit(&candidate(39.08, -94.64, "smoke", &long), now()).unwrap_err();
        assert_eq!(field_names(err), vec!["description"]);
        let err = store.submit(&ReportCandidate::default(), now()).unwrap_err();
        assert_eq!(field_names(err), vec!["location", "category", "description"]);
    }

    #[test]
    fn review_transition() {
        let mut store = ReportStore::in_memory(DEFAULT_SERVICE_AREA);
        let r = store.submit(&candidate(39.08, -94.64, "odor", "sulfur smell"), now()).unwrap();
        assert_eq!(store.mark_reviewed(&r.id).unwrap().status, ReportStatus::Reviewed);
        assert_eq!(store.mark_reviewed(&r.id).unwrap().status, ReportStatus::Reviewed);
        assert!(matches!(store.mark_reviewed("nope"), Err(StoreError::UnknownReport(_))));
    }

    #[test]
    fn random_submissions_and_filters() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let mut store = ReportStore::in_memory(DEFAULT_SERVICE_AREA);
        let mut all = Vec::new();
        for i in 0..100 {
            let c = candidate(
                rng.gen_range(38.8..39.4),
                rng.gen_range(-94.95..-94.35),
                ReportCategory::ALL[i % 5].as_str(),
                &format!("report {i}"),
            );
            let r = store.submit(&c, now() + Duration::minutes(rng.gen_range(0..1000))).unwrap();
            if rng.gen_bool(0.3) {
                all.push(store.mark_reviewed(&r.id).unwrap());
            } else {
                all.push(r);
            }
        }
        let ids: std::collections::HashSet<&str> = all.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids.len(), 100);
        assert_eq!(store.list(&ReportFilter::default()).len(), 100);

        for _ in 0..50 {
            let (a, b): (f64, f64) = (rng.gen_range(38.8..39.4), rng.gen_range(38.8..39.4));
            let filter = ReportFilter {
                status: [None, Some(ReportStatus::New), Some(ReportStatus::Reviewed)][rng.gen_range(0..3)],
                bbox: rng.gen_bool(0.5).then(|| BoundingBox::new(-94.95, a.min(b), -94.6, a.max(b)).unwrap()),
                from: rng.gen_bool(0.5).then(|| now() + Duration::minutes(rng.gen_range(0..500))),
                to: rng.gen_bool(0.5).then(|| now() + Duration::minutes(rng.gen_range(500..1000))),
            };
            let mut want: Vec<&PollutionReport> = all
                .iter()
                .filter(|r| {
                    filter.status.is_none_or(|s| r.status == s)
                        && filter.bbox.is_none_or(|b| {
                            r.location.lat >= b.min_lat
                                && r.location.lat <= b.max_lat
                                && r.location.lon >= b.min_lon
                                && r.location.lon <= b.max_lon
                        })
                        && filter.from.is_none_or(|f| r.created_at >= f)
                        && filter.to.is_none_or(|t| r.created_at <= t)
                })
                .collect();
            want.sort_by(|x, y| y.created_at.cmp(&x.created_at).then(x.id.cmp(&y.id)));
            let got = store.list(&filter);
            assert_eq!(got.iter().collect::<Vec<_>>(), want);
        }
    }

    #[test]
    fn journal_round_trip_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("reports.jsonl");
        let (mut store, _) = ReportStore::open(&path, DEFAULT_SERVICE_AREA).unwrap();
        for i in 0..10 {
            store.submit(&candidate(39.0, -94.6, "dust", &format!("dust {i}")), now()).unwrap();
        }
        let before = store.snapshot();
        drop(store);
        let (store, torn) = ReportStore::open(&path, DEFAULT_SERVICE_AREA).unwrap();
        assert!(torn.is_none());
        assert_eq!(store.snapshot(), before);
        drop(store);

        let len = std::fs::metadata(&path).unwrap().len();
        std::fs::OpenOptions::new().write(true).open(&path).unwrap().set_len(len - 20).unwrap();
        let (store, torn) = ReportStore::open(&path, DEFAULT_SERVICE_AREA).unwrap();
        assert!(torn.is_some());
        assert_eq!(store.len(), 9);
    }

    #[test]
    fn csv_export() {
        let mut store = ReportStore::in_memory(DEFAULT_SERVICE_AREA);
        store.submit(&candidate(39.0, -94.6, "smoke", "a, \"quoted\" note"), now()).unwrap();
        let mut buf = Vec::new();
        write_reports_csv(&store.list(&ReportFilter::default()), &mut buf).unwrap();
        let mut rdr = csv::Reader::from_reader(buf.as_slice());
        let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
        assert_eq!(rows.len(), 1);
        assert_eq!(&rows[0][4], "a, \"quoted\" note");
        assert_eq!(&rows[0][6], "2021-06-01T12:00:00Z");
    }
}
