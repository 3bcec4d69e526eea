use std::error::Error;

use aqmap::ingest::Dataset;
use aqmap::timeseries::ReadingStore;
use chrono::Duration;

const READINGS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/readings.jsonl");

/// Downsamples a day of one sensor's readings to 24 chart points. Every
/// point says how many raw readings it stands for.
pub fn run() -> Result<(), Box<dyn Error>> {
    let dataset = Dataset::load(READINGS)?;
    let to = dataset.last_timestamp().ok_or("empty dataset")?;
    let mut store = ReadingStore::new();
    for r in dataset.readings() {
        store.append(r.clone(), to)?;
    }

    let points = store.slice("kc-armourdale", to - Duration::hours(24), to, 24)?;
    let total: usize = points.iter().map(|p| p.count).sum();
    println!("{} points covering {total} readings", points.len());
    for p in &points {
        let bar = "#".repeat((p.pm2_5 / 2.0).round() as usize);
        println!("{}  {:>6.2}  n={:<3} {bar}", p.timestamp.format("%m-%d %H:%M:%S%.3f"), p.pm2_5, p.count);
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run()
}
