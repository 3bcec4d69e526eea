use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};
use url::Url;

use super::journal::{Journal, TornLine};
use super::StoreError;
use crate::geo::GeoPoint;

pub const HAZARD_CSV_COLUMNS: [&str; 7] =
    ["site_id", "name", "contact_name", "address", "latitude", "longitude", "epa_url"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardSite {
    pub site_id: String,
    pub name: String,
    pub contact_name: String,
    pub address: String,
    pub location: GeoPoint,
    pub epa_url: Url,
}

/// A rejected CSV row. `row` is the 1-based line number in the file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowError {
    pub row: u64,
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ImportReport {
    /// Distinct sites accepted from the file.
    pub imported: usize,
    pub errors: Vec<RowError>,
    pub warnings: Vec<String>,
}

#[derive(Debug)]
pub struct HazardStore {
    sites: BTreeMap<String, HazardSite>,
    journal: Option<Journal<HazardSite>>,
}

impl Default for HazardStore {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl HazardStore {
    pub fn in_memory() -> Self {
        Self { sites: BTreeMap::new(), journal: None }
    }

    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Option<TornLine>), StoreError> {
        let (journal, recovered) = Journal::open(path)?;
        let mut sites = BTreeMap::new();
        for s in recovered.records {
            let s: HazardSite = s;
            sites.insert(s.site_id.clone(), s);
        }
        Ok((Self { sites, journal: Some(journal) }, recovered.torn))
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn get(&self, site_id: &str) -> Option<&HazardSite> {
        self.sites.get(site_id)
    }

    /// All sites in id order.
    pub fn sites(&self) -> Vec<HazardSite> {
        self.sites.values().cloned().collect()
    }

    pub fn snapshot(&self) -> BTreeMap<String, HazardSite> {
        self.sites.clone()
    }

    /// Inserts or replaces a site. Unchanged records are not re-journaled.
    pub fn upsert(&mut self, site: HazardSite) -> Result<(), StoreError> {
        match self.sites.entry(site.site_id.clone()) {
            Entry::Occupied(e) if *e.get() == site => Ok(()),
            entry => {
                if let Some(j) = &mut self.journal {
                    j.append(&site)?;
                }
                match entry {
                    Entry::Occupied(mut e) => {
                        e.insert(site);
                    }
                    Entry::Vacant(e) => {
                        e.insert(site);
                    }
                }
                Ok(())
            }
        }
    }

    /// Imports `site_id,name,contact_name,address,latitude,longitude,epa_url`
    /// rows. Bad rows are reported and skipped; when a site id repeats, the
    /// last row wins.
    pub fn import_csv(&mut self, path: impl AsRef<Path>) -> Result<ImportReport, StoreError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| StoreError::Io { path: path.to_path_buf(), source })?;
        let (sites, mut report) = parse_hazard_csv(file)?;
        report.imported = sites.len();
        for site in sites.into_values() {
            self.upsert(site)?;
        }
        Ok(report)
    }
}

/// Parses hazard CSV text into valid sites keyed by id plus the row report.
/// `imported` is left at zero for the caller to fill in.
pub fn parse_hazard_csv<R: std::io::Read>(
    input: R,
) -> Result<(BTreeMap<String, HazardSite>, ImportReport), StoreError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(input);
    let mut report = ImportReport::default();
    let mut sites: BTreeMap<String, (u64, HazardSite)> = BTreeMap::new();

    let headers = rdr.headers().map_err(|e| StoreError::Csv(e.to_string()))?.clone();
    if headers.iter().all(str::is_empty) {
        return Ok((BTreeMap::new(), report));
    }
    let mut idx = [0usize; 7];
    for (slot, col) in idx.iter_mut().zip(HAZARD_CSV_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| StoreError::Csv(format!("header is missing column {col:?}")))?;
    }

    for record in rdr.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let row = e.position().map_or(0, |p| p.line());
                report.errors.push(RowError { row, field: "row".into(), message: e.to_string() });
                continue;
            }
        };
        let row = record.position().map_or(0, |p| p.line());
        let get = |i: usize| record.get(idx[i]).unwrap_or("");
        let mut fail = |field: &str, message: String| {
            report.errors.push(RowError { row, field: field.into(), message });
        };

        let site_id = get(0);
        if site_id.is_empty() {
            fail("site_id", "missing site_id".into());
            continue;
        }
        let lat = match get(4).parse::<f64>() {
            Ok(v) if (-90.0..=90.0).contains(&v) => v,
            _ => {
                fail("latitude", format!("latitude {:?} is not a number within -90..=90", get(4)));
                continue;
            }
        };
        let lon = match get(5).parse::<f64>() {
            Ok(v) if (-180.0..=180.0).contains(&v) => v,
            _ => {
                fail("longitude", format!("longitude {:?} is not a number within -180..=180", get(5)));
                continue;
            }
        };
        let epa_url = match Url::parse(get(6)) {
            Ok(u) => u,
            Err(e) => {
                fail("epa_url", format!("epa_url {:?} is not a valid URL: {e}", get(6)));
                continue;
            }
        };
        let site = HazardSite {
            site_id: site_id.to_owned(),
            name: get(1).to_owned(),
            contact_name: get(2).to_owned(),
            address: get(3).to_owned(),
            location: GeoPoint { lat, lon },
            epa_url,
        };
        if let Some((prev_row, _)) = sites.insert(site_id.to_owned(), (row, site)) {
            let msg = format!("site {site_id} on line {row} replaces the row on line {prev_row}");
            tracing::warn!("{msg}");
            report.warnings.push(msg);
        }
    }
    Ok((sites.into_iter().map(|(k, (_, s))| (k, s)).collect(), report))
}
