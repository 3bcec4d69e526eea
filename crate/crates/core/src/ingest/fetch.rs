use std::time::Duration;

use thiserror::Error;
use url::Url;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FetchError {
    #[error("request timed out")]
    Timeout,
    #[error("upstream answered HTTP {0}")]
    Status(u16),
    #[error("transport error: {0}")]
    Transport(String),
}

/// Anything that can fetch one sensor's current document from upstream.
pub trait Fetcher: Send + Sync {
    fn fetch(&self, sensor_id: &str) -> Result<Vec<u8>, FetchError>;
}

impl<F> Fetcher for F
where
    F: Fn(&str) -> Result<Vec<u8>, FetchError> + Send + Sync,
{
    fn fetch(&self, sensor_id: &str) -> Result<Vec<u8>, FetchError> {
        self(sensor_id)
    }
}

/// Blocking HTTP fetcher: `GET {base_url}/{sensor_id}` with an optional
/// `X-API-Key` header.
#[derive(Debug)]
pub struct HttpFetcher {
    client: reqwest::blocking::Client,
    base_url: Url,
    api_key: Option<String>,
}

impl HttpFetcher {
    pub fn new(base_url: Url, api_key: Option<String>, timeout: Duration) -> Result<Self, FetchError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| FetchError::Transport(e.to_string()))?;
        Ok(Self { client, base_url, api_key })
    }

    pub fn sensor_url(&self, sensor_id: &str) -> Url {
        let mut url = self.base_url.clone();
        url.path_segments_mut().expect("http(s) base URL").pop_if_empty().push(sensor_id);
        url
    }
}

impl Fetcher for HttpFetcher {
    fn fetch(&self, sensor_id: &str) -> Result<Vec<u8>, FetchError> {
        let mut req = self.client.get(self.sensor_url(sensor_id));
        if let Some(key) = &self.api_key {
            req = req.header("X-API-Key", key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                FetchError::Timeout
            } else {
                FetchError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(FetchError::Status(status.as_u16()));
        }
        resp.bytes().map(|b| b.to_vec()).map_err(|e| FetchError::Transport(e.to_string()))
    }
}
