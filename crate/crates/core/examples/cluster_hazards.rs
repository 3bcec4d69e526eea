//! Imports EPA hazard sites from CSV and clusters them the way the map
//! layer does at a few zoom levels.
//!
//! ```text
//! cargo run --example cluster_hazards
//! ```

use std::error::Error;

use aqmap::geo::{bbox_filter, cluster_sites, BoundingBox, DEFAULT_CLUSTER_RADIUS_PX};
use aqmap::store::HazardStore;

pub const HAZARDS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/hazards.csv");

pub fn run() -> Result<(), Box<dyn Error>> {
    let mut store = HazardStore::in_memory();
    let report = store.import_csv(HAZARDS)?;
    println!("imported {}, errors {}", report.imported, report.errors.len());

    let sites = store.sites();
    let points: Vec<_> = sites.iter().map(|s| (s.site_id.clone(), s.location)).collect();
    for zoom in [9, 12, 15] {
        let clusters = cluster_sites(&points, zoom, DEFAULT_CLUSTER_RADIUS_PX);
        let singles = clusters.iter().filter(|c| c.count == 1).count();
        println!("zoom {zoom:>2}: {:>2} clusters, {singles:>2} single sites", clusters.len());
    }

    let downtown = BoundingBox::parse("-94.62,39.04,-94.55,39.12")?;
    let visible = bbox_filter(&sites, &downtown, |s| s.location);
    println!("\nin view ({downtown:?}):");
    for s in visible {
        println!("  {} {:<20} {}", s.site_id, s.name, s.epa_url);
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run()
}
