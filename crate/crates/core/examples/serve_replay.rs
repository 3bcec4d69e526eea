//! Runs the HTTP API in-process over the sample dataset and queries it.
//!
//! With `--listen` it keeps serving on 127.0.0.1:8080 until Ctrl-C, which
//! is handy for pointing a browser or the web map at it.

use std::error::Error;
use std::sync::{Arc, Mutex, RwLock};

use aqmap::api::{router, AppState};
use aqmap::aqi::AqiScale;
use aqmap::ingest::Dataset;
use aqmap::state::{ServiceMode, SharedData};
use aqmap::store::{HazardStore, ReportStore, DEFAULT_SERVICE_AREA};
use aqmap::timeseries::ReadingStore;
use chrono::Duration;

const READINGS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/readings.jsonl");
const HAZARDS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/hazards.csv");

fn state() -> Result<AppState, Box<dyn Error>> {
    let data = Arc::new(SharedData::new(ReadingStore::new(), ServiceMode::Replay, Duration::seconds(600)));
    let (clock, _) = Dataset::load(READINGS)?.load_instant(&data);
    let mut hazards = HazardStore::in_memory();
    hazards.import_csv(HAZARDS)?;
    Ok(AppState {
        data,
        clock: Arc::new(clock),
        scale: Arc::new(AqiScale::default()),
        reports: Arc::new(Mutex::new(ReportStore::in_memory(DEFAULT_SERVICE_AREA))),
        hazards: Arc::new(RwLock::new(hazards)),
        admin_token: Some("example-admin".into()),
        cluster_radius_px: 80.0,
    })
}

pub fn run(listen: bool) -> Result<(), Box<dyn Error>> {
    let app = router(state()?);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let addr = if listen { "127.0.0.1:8080" } else { "127.0.0.1:0" };
        let listener = tokio::net::TcpListener::bind(addr).await?;
        let base = format!("http://{}", listener.local_addr()?);
        println!("serving on {base}");
        let server = tokio::spawn(async move { axum::serve(listener, app).await });
        if listen {
            tokio::signal::ctrl_c().await?;
            return Ok(());
        }

        let body = tokio::task::spawn_blocking(move || -> Result<String, reqwest::Error> {
            let client = reqwest::blocking::Client::new();
            let mut out = String::new();
            for path in ["/healthz", "/api/sensors/kc-rosedale", "/api/hazards?zoom=11&bbox=-94.8,38.9,-94.4,39.2"] {
                let resp = client.get(format!("{base}{path}")).send()?;
                out += &format!("GET {path} -> {}\n{}\n\n", resp.status(), resp.text()?);
            }
            Ok(out)
        })
        .await??;
        println!("{body}");
        server.abort();
        Ok::<_, Box<dyn Error>>(())
    })
}

fn main() -> Result<(), Box<dyn Error>> {
    run(std::env::args().any(|a| a == "--listen"))
}
