//! One simulated hour of polling eight sensors against a fake upstream.
//!
//! The clock is virtual, so this finishes instantly. Requests are spaced at
//! least a minute apart no matter how many sensors are configured, and one
//! sensor that always fails does not stop the others.

use std::error::Error;
use std::sync::atomic::AtomicBool;

use aqmap::ingest::{Clock, FetchError, ManualClock, Poller, UpstreamConfig};
use aqmap::state::{ServiceMode, SharedData};
use aqmap::timeseries::ReadingStore;
use chrono::{Duration, TimeZone, Utc};

pub fn run() -> Result<(), Box<dyn Error>> {
    let start = Utc.with_ymd_and_hms(2024, 3, 1, 12, 0, 0).unwrap();
    let clock = ManualClock::new(start);
    let ids: Vec<String> = (1..=8).map(|i| format!("sensor-{i}")).collect();

    let upstream = |id: &str| -> Result<Vec<u8>, FetchError> {
        if id == "sensor-5" {
            return Err(FetchError::Status(503));
        }
        let body = serde_json::json!({
            "sensor": { "pm2.5": 9.5, "last_seen": clock.now().timestamp(), "temperature": 61.0 }
        });
        Ok(body.to_string().into_bytes())
    };

    let data = SharedData::new(ReadingStore::new(), ServiceMode::Live, Duration::seconds(600));
    let mut poller = Poller::new(UpstreamConfig::new(ids))?;
    poller.run(&clock, &upstream, &data, Some(start + Duration::hours(1)), &AtomicBool::new(false));

    let log = poller.permit_log();
    let gaps: Vec<i64> = log.windows(2).map(|w| (w[1] - w[0]).num_seconds()).collect();
    println!("cycles: {}", poller.cycles());
    println!("requests: {}", log.len());
    println!("smallest gap: {} s", gaps.iter().min().copied().unwrap_or(0));

    let live = data.live.read().unwrap();
    for s in live.sensors.values() {
        let state = match (&s.last_success, &s.last_error) {
            (Some(t), _) => format!("ok at {}", t.format("%H:%M:%S")),
            (None, Some(e)) => format!("failing: {}", e.message),
            (None, None) => "never polled".into(),
        };
        println!("  {:<9} {state}", s.sensor_id);
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run()
}
