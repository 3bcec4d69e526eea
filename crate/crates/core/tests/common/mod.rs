#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use aqmap::timeseries::Reading;
use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 3, 1, 0, 0, 0).unwrap()
}

pub fn sensor_id(i: usize) -> String {
    format!("s{:02}", i + 1)
}

/// `sensors` sensors, one reading every `step_secs` for `span`, with a
/// little per-reading jitter so bucket edges are exercised.
pub fn synthetic_readings(seed: u64, sensors: usize, span: Duration, step_secs: i64) -> Vec<Reading> {
    let mut rng = StdRng::seed_from_u64(seed);
    let steps = span.num_seconds() / step_secs;
    let mut out = Vec::new();
    for k in 0..steps {
        for s in 0..sensors {
            let jitter = rng.gen_range(0..step_secs.min(30));
            let t = t0() + Duration::seconds(k * step_secs + jitter);
            let pm = (rng.gen_range(0.0..80.0f64) * 10.0).round() / 10.0;
            out.push(Reading::new(sensor_id(s), t, pm));
        }
    }
    out
}

pub fn to_jsonl(readings: &[Reading]) -> String {
    readings.iter().fold(String::new(), |mut s, r| {
        writeln!(s, "{}", serde_json::to_string(r).unwrap()).unwrap();
        s
    })
}

/// Random hazard sites near Kansas City, ids `h0000..`.
pub fn hazard_csv(seed: u64, n: usize) -> String {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut s = String::from("site_id,name,contact_name,address,latitude,longitude,epa_url\n");
    for i in 0..n {
        let lat = 39.0 + rng.gen_range(-0.3..0.3f64);
        let lon = -94.6 + rng.gen_range(-0.3..0.3f64);
        writeln!(
            s,
            "h{i:04},Site {i},Contact {i},\"{i} Main St, Kansas City\",{lat:.6},{lon:.6},https://www.epa.gov/site/{i}"
        )
        .unwrap();
    }
    s
}

pub fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

pub const BIN: &str = env!("CARGO_BIN_EXE_aqmap");

/// A running `aqmap serve` child. Killed on drop.
pub struct Server {
    pub child: std::process::Child,
    pub base: String,
    pub stderr: std::sync::Arc<std::sync::Mutex<Vec<String>>>,
}

impl Server {
    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub fn log(&self) -> String {
        self.stderr.lock().unwrap().join("\n")
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Spawns the binary with `args` (plus `--bind 127.0.0.1:0`) and waits for
/// the listening line on stderr.
pub fn spawn_server(args: &[&str], envs: &[(&str, &str)]) -> Server {
    use std::io::{BufRead, BufReader};
    use std::process::{Command, Stdio};
    use std::sync::{mpsc, Arc, Mutex};

    let mut cmd = Command::new(BIN);
    cmd.args(args).args(["--bind", "127.0.0.1:0"]).stdout(Stdio::null()).stderr(Stdio::piped());
    for k in ["SENSOR_IDS", "ADMIN_TOKEN", "DATA_DIR", "BIND_ADDR", "UPSTREAM_BASE_URL", "RUST_LOG"] {
        cmd.env_remove(k);
    }
    cmd.envs(envs.iter().copied());
    let mut child = cmd.spawn().expect("spawn aqmap");
    let stderr = child.stderr.take().unwrap();
    let lines = Arc::new(Mutex::new(Vec::new()));
    let (tx, rx) = mpsc::channel();
    let sink = lines.clone();
    std::thread::spawn(move || {
        for line in BufReader::new(stderr).lines().map_while(Result::ok) {
            if let Some(addr) = line.strip_prefix("listening on ") {
                let _ = tx.send(addr.trim().to_owned());
            }
            sink.lock().unwrap().push(line);
        }
    });
    match rx.recv_timeout(std::time::Duration::from_secs(20)) {
        Ok(base) => Server { child, base, stderr: lines },
        Err(_) => {
            let _ = child.kill();
            let status = child.wait().unwrap();
            panic!("server did not start ({status}):\n{}", lines.lock().unwrap().join("\n"));
        }
    }
}
