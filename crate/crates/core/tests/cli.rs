mod common;

use std::io::Read;
use std::net::TcpListener;
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use chrono::Duration;
use common::*;

fn aqmap(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("SENSOR_IDS")
        .env_remove("DATA_DIR")
        .env_remove("BIND_ADDR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn aqi_prints_one_line() {
    let o = aqmap(&["aqi", "20"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1);
    assert!(out.starts_with("68 Moderate "), "{out}");
    assert!(out.trim_end().ends_with("#ADF600"), "{out}");

    let out = stdout(&aqmap(&["aqi", "0"]));
    assert!(out.starts_with("0 Good ") && out.trim_end().ends_with("#00E400"), "{out}");
    let out = stdout(&aqmap(&["aqi", "999"]));
    assert!(out.starts_with("500 Hazardous "), "{out}");
}

#[test]
fn aqi_rejects_bad_input_with_usage_code() {
    for arg in ["-1", "abc", "NaN"] {
        let o = aqmap(&["aqi", arg]);
        assert_eq!(o.status.code(), Some(2), "{arg}: {}", stderr(&o));
        assert!(o.stdout.is_empty());
    }
    assert_eq!(aqmap(&["aqi"]).status.code(), Some(2));
    assert_eq!(aqmap(&["bogus"]).status.code(), Some(2));
    assert_eq!(aqmap(&["--help"]).status.code(), Some(0));
}

#[test]
fn import_hazards_reports_counts_and_persists() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sites.csv");
    let mut text = hazard_csv(3, 10);
    text.push_str("h9999,Bad Site,x,y,91.0,-94.5,https://www.epa.gov/x\n");
    write(&csv, &text);
    let data = dir.path().join("data");
    let o = aqmap(&["import-hazards", csv.to_str().unwrap(), "--data-dir", data.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "imported 10, errors 1");
    assert!(stderr(&o).contains("row 12"), "{}", stderr(&o));

    let journal = std::fs::read_to_string(data.join("hazards.jsonl")).unwrap();
    assert_eq!(journal.lines().count(), 10);
    let o = aqmap(&["import-hazards", csv.to_str().unwrap(), "--data-dir", data.to_str().unwrap()]);
    assert_eq!(stdout(&o).trim(), "imported 10, errors 1");
    let journal = std::fs::read_to_string(data.join("hazards.jsonl")).unwrap();
    assert_eq!(journal.lines().count(), 10, "re-import of unchanged rows appends nothing");
}

#[test]
fn import_hazards_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let d = data.to_str().unwrap();
    let o = aqmap(&["import-hazards", "/nonexistent/sites.csv", "--data-dir", d]);
    assert_eq!(o.status.code(), Some(1));

    let bad_header = dir.path().join("bad.csv");
    write(&bad_header, "site_id,name\nh1,x\n");
    assert_eq!(aqmap(&["import-hazards", bad_header.to_str().unwrap(), "--data-dir", d]).status.code(), Some(1));

    let empty = dir.path().join("empty.csv");
    write(&empty, "");
    let o = aqmap(&["import-hazards", empty.to_str().unwrap(), "--data-dir", d]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout(&o).trim(), "imported 0, errors 0");
}

#[test]
fn serve_config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = aqmap(&["serve", "--data-dir", d, "--bind", "127.0.0.1:0"]);
    assert_eq!(o.status.code(), Some(2), "live mode without sensors: {}", stderr(&o));

    let cfg = dir.path().join("bad.json");
    write(&cfg, "{\"poll_interval_secs\": \"often\"}");
    let o = aqmap(&["serve", "--config", cfg.to_str().unwrap(), "--data-dir", d]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(aqmap(&["serve", "--config", "/nonexistent.json"]).status.code(), Some(2));

    let o = aqmap(&["serve", "--replay", "/nonexistent/replay.jsonl", "--data-dir", d]);
    assert_eq!(o.status.code(), Some(2));
    let o = aqmap(&["serve", "--replay", "x.jsonl", "--speed", "0", "--data-dir", d]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn serve_port_in_use_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("r.jsonl");
    write(&ds, &to_jsonl(&synthetic_readings(5, 1, Duration::hours(1), 600)));
    let taken = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = taken.local_addr().unwrap().to_string();
    let o = aqmap(&[
        "serve",
        "--replay",
        ds.to_str().unwrap(),
        "--bind",
        &addr,
        "--data-dir",
        dir.path().join("data").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

/// A fake upstream that counts every connection it receives.
fn counting_upstream() -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/sensors", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    std::thread::spawn(move || {
        for mut stream in listener.incoming().map_while(Result::ok) {
            counter.fetch_add(1, Ordering::SeqCst);
            let mut buf = [0u8; 4096];
            let _ = stream.read(&mut buf);
        }
    });
    (url, hits)
}

#[test]
fn replay_serves_data_without_touching_upstream() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("r.jsonl");
    write(&ds, &to_jsonl(&synthetic_readings(9, 2, Duration::hours(3), 300)));
    let (upstream, hits) = counting_upstream();
    let data = dir.path().join("data");
    let server = spawn_server(
        &["serve", "--replay", ds.to_str().unwrap(), "--data-dir", data.to_str().unwrap()],
        &[("UPSTREAM_BASE_URL", upstream.as_str()), ("SENSOR_IDS", "s01,s02")],
    );
    let client = reqwest::blocking::Client::new();
    let health = client.get(server.url("/healthz")).send().unwrap();
    assert_eq!(health.status(), 200);
    let sensors: serde_json::Value = client.get(server.url("/api/sensors")).send().unwrap().json().unwrap();
    assert_eq!(sensors.as_array().unwrap().len(), 2);
    std::thread::sleep(std::time::Duration::from_millis(300));
    assert_eq!(hits.load(Ordering::SeqCst), 0);
}

#[test]
fn effective_config_is_printed_without_secrets() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("r.jsonl");
    write(&ds, &to_jsonl(&synthetic_readings(9, 1, Duration::hours(1), 300)));
    let server = spawn_server(
        &["serve", "--replay", ds.to_str().unwrap(), "--data-dir", dir.path().join("data").to_str().unwrap()],
        &[("ADMIN_TOKEN", "tok-XYZ"), ("UPSTREAM_API_KEY", "key-ABC")],
    );
    let log = server.log();
    assert!(log.contains("effective config"), "{log}");
    assert!(!log.contains("tok-XYZ") && !log.contains("key-ABC"), "{log}");
}

/// Serves `{"sensor": {...}}` documents for any sensor id and records the
/// request lines and API keys it saw.
fn fake_upstream() -> (String, Arc<std::sync::Mutex<Vec<String>>>) {
    use std::io::{BufRead, BufReader, Write};
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/sensors", listener.local_addr().unwrap());
    let seen = Arc::new(std::sync::Mutex::new(Vec::new()));
    let log = seen.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming().map_while(Result::ok) {
            let mut reader = BufReader::new(stream);
            let mut request = String::new();
            let mut key = String::new();
            reader.read_line(&mut request).unwrap();
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap() == 0 || line.trim().is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("x-api-key:") {
                    key = v.trim().to_owned();
                }
            }
            let id = request.split_whitespace().nth(1).unwrap_or("").rsplit('/').next().unwrap_or("").to_owned();
            log.lock().unwrap().push(format!("{id} {key}"));
            let body = format!(
                r#"{{"sensor": {{"name": "Sensor {id}", "latitude": 39.1, "longitude": -94.6, "pm2.5": 14.2, "temperature": 50.0, "last_seen": {}}}}}"#,
                chrono::Utc::now().timestamp()
            );
            let mut stream = reader.into_inner();
            let _ = write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
        }
    });
    (url, seen)
}

fn wait_for(mut f: impl FnMut() -> bool) -> bool {
    let deadline = std::time::Instant::now() + std::time::Duration::from_secs(15);
    while std::time::Instant::now() < deadline {
        if f() {
            return true;
        }
        std::thread::sleep(std::time::Duration::from_millis(100));
    }
    false
}

#[test]
fn live_polling_journals_and_recovers_readings() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let (upstream, seen) = fake_upstream();
    let envs = [
        ("UPSTREAM_BASE_URL", upstream.as_str()),
        ("UPSTREAM_API_KEY", "k-1"),
        ("SENSOR_IDS", "b,a"),
        ("POLL_INTERVAL_SECS", "2"),
        ("MIN_REQUEST_INTERVAL_SECS", "1"),
    ];
    let client = reqwest::blocking::Client::new();
    {
        let server = spawn_server(&["serve", "--data-dir", data.to_str().unwrap()], &envs);
        assert!(
            wait_for(|| client.get(server.url("/healthz")).send().is_ok_and(|r| r.status() == 200)),
            "{}",
            server.log()
        );
        let a: serde_json::Value = client.get(server.url("/api/sensors/a")).send().unwrap().json().unwrap();
        assert_eq!(a["name"], "Sensor a");
        assert_eq!(a["location"]["lat"], 39.1);
        assert_eq!(a["current"]["pm2_5"], 14.2);
        assert_eq!(a["online"], true);
    }
    let calls = seen.lock().unwrap().clone();
    assert_eq!(&calls[..2], ["a k-1", "b k-1"], "sensors are polled in id order with the key");
    let journal = std::fs::read_to_string(data.join("readings.jsonl")).unwrap();
    assert!(journal.lines().count() >= 2);

    let dead = TcpListener::bind("127.0.0.1:0").unwrap();
    let dead_url = format!("http://{}/v1/sensors", dead.local_addr().unwrap());
    drop(dead);
    let envs = [("UPSTREAM_BASE_URL", dead_url.as_str()), ("SENSOR_IDS", "a,b"), ("REQUEST_TIMEOUT_SECS", "1")];
    let server = spawn_server(&["serve", "--data-dir", data.to_str().unwrap()], &envs);
    let health = client.get(server.url("/healthz")).send().unwrap();
    assert_eq!(health.status(), 503, "no cycle has succeeded since restart");
    let b: serde_json::Value = client.get(server.url("/api/sensors/b")).send().unwrap().json().unwrap();
    assert_eq!(b["current"]["pm2_5"], 14.2, "readings come back from the journal");
}
