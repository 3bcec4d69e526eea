//! Ring data for each sensor marker: one summary per averaging window, from
//! the realtime reading out to the one-week mean.

use std::error::Error;

use aqmap::aqi::AqiScale;
use aqmap::ingest::Dataset;
use aqmap::timeseries::ReadingStore;

pub const READINGS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/readings.jsonl");

pub fn run() -> Result<(), Box<dyn Error>> {
    let dataset = Dataset::load(READINGS)?;
    let now = dataset.last_timestamp().ok_or("empty dataset")?;
    let mut store = ReadingStore::new();
    for r in dataset.readings() {
        store.append(r.clone(), now)?;
    }

    let scale = AqiScale::default();
    println!("as of {now}");
    for id in dataset.sensor_ids() {
        println!("\n{id}");
        // The AQI of each window is computed from the window's mean
        // concentration, not averaged from per-reading AQIs.
        for w in store.window_summaries(&id, now, &scale)? {
            match (w.mean_concentration, w.aqi, w.color) {
                (Some(mean), Some(aqi), Some(color)) => println!(
                    "  {:<8} {:>4} readings  mean {:>6.2} µg/m³  AQI {:>3}  {}",
                    w.window.name(),
                    w.sample_count,
                    mean,
                    aqi.value(),
                    color.to_hex()
                ),
                _ => println!("  {:<8} no data", w.window.name()),
            }
        }
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run()
}
