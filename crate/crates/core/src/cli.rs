//! The `aqmap` command line: `serve`, `aqi` and `import-hazards`.
//!
//! Exit codes: 0 success, 1 operational failure, 2 usage or configuration
//! error, 3 environment error (for example the port is already taken).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration as StdDuration;

use chrono::Duration;
use clap::{Args, Parser, Subcommand};
use thiserror::Error;
use tracing_subscriber::EnvFilter;

use crate::api::{self, AppState};
use crate::aqi::{AqiScale, Concentration};
use crate::config::{ConfigError, Overrides, ServiceConfig};
use crate::ingest::{Clock, Dataset, HttpFetcher, Poller, ReplaySpeed, SystemClock};
use crate::state::{ServiceMode, SharedData};
use crate::store::{HazardStore, Journal, ReportStore, StoreError};
use crate::timeseries::{Reading, ReadingStore};

pub const READINGS_JOURNAL: &str = "readings.jsonl";
pub const REPORTS_JOURNAL: &str = "reports.jsonl";
pub const HAZARDS_JOURNAL: &str = "hazards.jsonl";

#[derive(Debug, Parser)]
#[command(name = "aqmap", version, about = "Community air-quality map service")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP API, polling upstream sensors or replaying a dataset.
    Serve(ServeArgs),
    /// Print the AQI, category, guidance and marker color for a PM2.5 value.
    Aqi {
        /// PM2.5 concentration in µg/m³.
        #[arg(allow_hyphen_values = true)]
        concentration: String,
        /// Alternative AQI scale document.
        #[arg(long)]
        scale: Option<PathBuf>,
    },
    /// Load EPA hazard sites from a CSV file into the hazard store.
    ImportHazards {
        csv: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// JSON config file. Environment variables override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Replay a JSON-lines readings file instead of polling upstream.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// Replay pace in virtual seconds per second, or "inf" to load at once.
    #[arg(long, default_value = "inf", requires = "replay")]
    pub speed: ReplaySpeed,
    #[arg(long)]
    pub bind: Option<String>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Operational(String),
    #[error("{0}")]
    Environment(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Operational(_) => 1,
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Environment(_) => 3,
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        CliError::Operational(e.to_string())
    }
}

/// Entry point used by the binary.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Serve(args) => {
            init_tracing("info");
            serve(args)
        }
        Command::Aqi { concentration, scale } => {
            init_tracing("warn");
            println!("{}", aqi_line(&concentration, scale.as_deref())?);
            Ok(())
        }
        Command::ImportHazards { csv, config, data_dir } => {
            init_tracing("warn");
            import_hazards(&csv, config.as_deref(), data_dir)
        }
    }
}

fn init_tracing(default: &str) {
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

fn load_scale(path: Option<&Path>) -> Result<AqiScale, CliError> {
    match path {
        None => Ok(AqiScale::default()),
        Some(p) => {
            let text =
                fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
            AqiScale::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
        }
    }
}

/// `"<aqi> <category> <guidance> <#RRGGBB>"` for one concentration.
pub fn aqi_line(concentration: &str, scale: Option<&Path>) -> Result<String, CliError> {
    let scale = load_scale(scale)?;
    let c = concentration
        .trim()
        .parse::<f64>()
        .map_err(|_| CliError::Usage(format!("not a number: {concentration:?}")))
        .and_then(|v| Concentration::new(v).map_err(|e| CliError::Usage(e.to_string())))?;
    let aqi = scale.pm25_to_aqi(c);
    let cat = scale.category(aqi);
    Ok(format!("{} {} {} {}", aqi.value(), cat.name.name(), cat.guidance, scale.marker_color(aqi).to_hex()))
}

fn import_hazards(csv: &Path, config: Option<&Path>, data_dir: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = ServiceConfig::load(config, &Overrides { data_dir, ..Overrides::default() })?;
    let (mut store, _) = HazardStore::open(cfg.data_dir.join(HAZARDS_JOURNAL))?;
    let report = store.import_csv(csv)?;
    for e in &report.errors {
        eprintln!("row {}: {}: {}", e.row, e.field, e.message);
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!("imported {}, errors {}", report.imported, report.errors.len());
    if report.imported == 0 {
        return Err(CliError::Operational(format!("no valid hazard rows in {}", csv.display())));
    }
    Ok(())
}

/// Replays the readings journal into `data` and rewrites it without the
/// readings that fell out of retention.
fn recover_readings(
    path: &Path,
    data: &SharedData,
    now: chrono::DateTime<chrono::Utc>,
) -> Result<Journal<Reading>, CliError> {
    let (mut journal, recovered) = Journal::<Reading>::open(path).map_err(|e| CliError::Operational(e.to_string()))?;
    let total = recovered.records.len();
    let kept: Vec<Reading> = {
        let mut live = data.live.write().expect("live data lock poisoned");
        for r in &recovered.records {
            live.ensure_sensor(&r.sensor_id);
            if let Err(e) = live.readings.append(r.clone(), now) {
                tracing::warn!(error = %e, "dropping journaled reading");
            }
        }
        live.readings.prune(now);
        let ids: Vec<String> = live.readings.sensor_ids().map(str::to_owned).collect();
        ids.iter()
            .flat_map(|id| live.readings.readings(id).expect("listed sensor").cloned().collect::<Vec<_>>())
            .collect()
    };
    if kept.len() < total {
        journal.compact(&kept).map_err(|e| CliError::Operational(e.to_string()))?;
        tracing::info!(kept = kept.len(), dropped = total - kept.len(), "compacted readings journal");
    }
    Ok(journal)
}

pub fn serve(args: ServeArgs) -> Result<(), CliError> {
    let flags = Overrides { bind_addr: args.bind, data_dir: args.data_dir, admin_token: None };
    let cfg = ServiceConfig::load(args.config.as_deref(), &flags)?;
    eprintln!("effective config: {}", cfg.redacted());
    let scale = load_scale(cfg.aqi_scale_path.as_deref())?;
    let mode = if args.replay.is_some() { ServiceMode::Replay } else { ServiceMode::Live };
    let upstream = cfg.upstream();
    if mode == ServiceMode::Live {
        upstream.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let dataset =
        args.replay.as_deref().map(|p| Dataset::load(p).map_err(|e| CliError::Usage(e.to_string()))).transpose()?;

    let readings =
        ReadingStore::with_retention(Duration::days(cfg.retention_days)).map_err(|e| CliError::Usage(e.to_string()))?;
    let poll_interval = Duration::seconds(cfg.poll_interval_secs as i64);
    let mut data = SharedData::new(readings, mode, poll_interval);
    if mode == ServiceMode::Live {
        let journal = recover_readings(&cfg.data_dir.join(READINGS_JOURNAL), &data, chrono::Utc::now())?;
        data = data.with_journal(journal);
    }
    {
        let mut live = data.live.write().expect("live data lock poisoned");
        for s in &cfg.sensors {
            let status = live.ensure_sensor(&s.id);
            if let Some(name) = &s.name {
                status.name = name.clone();
            }
            status.location = s.location();
        }
    }
    let data = Arc::new(data);

    let (reports, torn) = ReportStore::open(cfg.data_dir.join(REPORTS_JOURNAL), cfg.service_area)?;
    if let Some(t) = torn {
        tracing::warn!(line = t.line, bytes = t.bytes, "discarded torn report journal line");
    }
    let (hazards, torn) = HazardStore::open(cfg.data_dir.join(HAZARDS_JOURNAL))?;
    if let Some(t) = torn {
        tracing::warn!(line = t.line, bytes = t.bytes, "discarded torn hazard journal line");
    }
    tracing::info!(reports = reports.len(), hazards = hazards.len(), "recovered stores");

    let listener = std::net::TcpListener::bind(cfg.bind_addr)
        .map_err(|e| CliError::Environment(format!("cannot bind {}: {e}", cfg.bind_addr)))?;
    listener.set_nonblocking(true).map_err(|e| CliError::Environment(e.to_string()))?;
    let local = listener.local_addr().map_err(|e| CliError::Environment(e.to_string()))?;

    let stop = Arc::new(AtomicBool::new(false));
    let mut workers = Vec::new();
    let clock: Arc<dyn Clock> = match (&dataset, args.speed) {
        (None, _) => {
            let fetcher = HttpFetcher::new(
                upstream.base_url.clone(),
                upstream.api_key.clone(),
                StdDuration::from_secs(upstream.request_timeout_secs),
            )
            .map_err(|e| CliError::Environment(e.to_string()))?;
            let mut poller = Poller::new(upstream).map_err(|e| CliError::Usage(e.to_string()))?;
            let (data, stop) = (data.clone(), stop.clone());
            workers.push(std::thread::spawn(move || poller.run(&SystemClock, &fetcher, &data, None, &stop)));
            Arc::new(SystemClock)
        }
        (Some(ds), ReplaySpeed::Instant) => {
            let (clock, report) = ds.load_instant(&data);
            tracing::info!(
                loaded = report.loaded,
                skipped = report.skipped.len(),
                duplicates = report.duplicates,
                "replay loaded"
            );
            Arc::new(clock)
        }
        (Some(ds), ReplaySpeed::Factor(speed)) => {
            let clock = Arc::new(ds.scaled_clock(speed));
            let (ds, data, stop, c) = (ds.clone(), data.clone(), stop.clone(), clock.clone());
            workers.push(std::thread::spawn(move || {
                let report = ds.play(&data, c.as_ref(), &stop);
                tracing::info!(loaded = report.loaded, skipped = report.skipped.len(), "replay finished");
            }));
            clock
        }
    };

    let state = AppState {
        data,
        clock,
        scale: Arc::new(scale),
        reports: Arc::new(Mutex::new(reports)),
        hazards: Arc::new(RwLock::new(hazards)),
        admin_token: cfg.admin_token.clone(),
        cluster_radius_px: cfg.cluster_radius_px,
    };

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Environment(e.to_string()))?;
    let result = runtime.block_on(async move {
        let listener = tokio::net::TcpListener::from_std(listener)?;
        eprintln!("listening on http://{local}");
        axum::serve(listener, api::router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    });
    stop.store(true, Ordering::Relaxed);
    result.map_err(|e| CliError::Operational(format!("server error: {e}")))?;
    tracing::info!("shutting down");
    drop(workers);
    Ok(())
}
