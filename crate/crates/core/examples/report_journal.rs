//! Community reports survive a restart. The store journals every accepted
//! report before acknowledging it, and a half-written last line left by a
//! crash is dropped on the next open.

use std::error::Error;
use std::io::Write;

use aqmap::store::reports::CandidateLocation;
use aqmap::store::{ReportCandidate, ReportFilter, ReportStore, StoreError, DEFAULT_SERVICE_AREA};
use chrono::Utc;

pub fn run() -> Result<(), Box<dyn Error>> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("reports.jsonl");

    let (mut store, _) = ReportStore::open(&path, DEFAULT_SERVICE_AREA)?;
    let smoke = ReportCandidate {
        location: Some(CandidateLocation { lat: Some(39.0951), lon: Some(-94.6213) }),
        category: Some("smoke".into()),
        description: Some("Dark plume from the rail yard since 7am".into()),
        reporter_contact: None,
    };
    let saved = store.submit(&smoke, Utc::now())?;
    println!("accepted {} ({})", saved.id, saved.category);

    let bad = ReportCandidate { category: Some("glitter".into()), ..ReportCandidate::default() };
    if let Err(StoreError::Validation(fields)) = store.submit(&bad, Utc::now()) {
        for f in fields {
            println!("rejected {}: {}", f.field, f.message);
        }
    }
    store.mark_reviewed(&saved.id)?;
    drop(store);

    // Simulate a crash halfway through writing a line.
    std::fs::OpenOptions::new().append(true).open(&path)?.write_all(b"{\"id\":\"partial")?;

    let (store, torn) = ReportStore::open(&path, DEFAULT_SERVICE_AREA)?;
    if let Some(t) = torn {
        println!("discarded {} bytes of torn line {}", t.bytes, t.line);
    }
    for r in store.list(&ReportFilter::default()) {
        println!("recovered {} status={:?}", r.id, r.status);
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run()
}
