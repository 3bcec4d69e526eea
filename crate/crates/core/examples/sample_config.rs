//! Resolving the service configuration: the JSON file first, environment
//! variables over it, command-line flags over both. Secrets never appear in
//! the printed form.

use std::error::Error;

use aqmap::config::{FileConfig, Overrides, ServiceConfig};

pub const CONFIG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/config.json");

pub fn run() -> Result<(), Box<dyn Error>> {
    let file = FileConfig::load(CONFIG)?;
    let env = |key: &str| match key {
        "ADMIN_TOKEN" => Some("change-me".to_owned()),
        "POLL_INTERVAL_SECS" => Some("900".to_owned()),
        _ => None,
    };
    let flags = Overrides { bind_addr: Some("0.0.0.0:9000".into()), ..Overrides::default() };
    let cfg = ServiceConfig::resolve(file, env, &flags)?;

    println!("{}", serde_json::to_string_pretty(&cfg.redacted())?);
    println!("polling {} sensors every {} s", cfg.sensors.len(), cfg.poll_interval_secs);
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run()
}
