use std::error::Error;

use aqmap::api::all_summaries;
use aqmap::aqi::AqiScale;
use aqmap::ingest::{Clock, Dataset};
use aqmap::state::{ServiceMode, SharedData};
use aqmap::timeseries::ReadingStore;
use chrono::Duration;

const READINGS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/readings.jsonl");

/// Loads a captured dataset in one go. The returned clock stops at the
/// newest reading, so the marker summaries read as they did at capture time.
pub fn run() -> Result<(), Box<dyn Error>> {
    let data = SharedData::new(ReadingStore::new(), ServiceMode::Replay, Duration::seconds(600));
    let (clock, report) = Dataset::load(READINGS)?.load_instant(&data);
    println!(
        "loaded {} readings ({} skipped) from {} to {}",
        report.loaded,
        report.skipped.len(),
        report.first.unwrap(),
        report.last.unwrap()
    );

    let live = data.live.read().unwrap();
    for s in all_summaries(&live, clock.now(), &AqiScale::default(), data.poll_interval) {
        let cur = s.current.as_ref().unwrap();
        println!(
            "{:<14} AQI {:>3} {:<28} ({} mean {:.1} µg/m³) {}",
            s.sensor_id,
            cur.aqi.value(),
            cur.category.label(),
            cur.metric.name(),
            cur.metric_pm2_5,
            cur.color
        );
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run()
}
