//! HTTP transport abstraction: live, fixture-replay, recording, and
//! network-denying implementations.
//!
//! Fixture files are keyed by the request URL only — auth headers never
//! reach the fixture directory, so recorded sessions hold no credentials.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::store::sha256_hex;

#[derive(Debug, Clone, thiserror::Error)]
pub enum TransportError {
    #[error("network error: {0}")]
    Network(String),
    #[error("no recorded fixture for {0}")]
    MissingFixture(String),
    #[error("fixture io error: {0}")]
    Io(String),
}

#[derive(Debug, Clone)]
pub struct TransportResponse {
    pub status: u16,
    pub body: Vec<u8>,
    pub retry_after: Option<u64>,
    pub rate_limit_remaining: Option<u64>,
}

pub trait Transport: Send + Sync {
    fn get(
        &self,
        url: &str,
        headers: &[(String, String)],
    ) -> Result<TransportResponse, TransportError>;
}

/// Live HTTP via ureq; raw status codes are returned, not turned into
/// errors, so callers can implement forge-specific handling.
pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new() -> HttpTransport {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(60)))
            .build();
        HttpTransport {
            agent: config.new_agent(),
        }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl Transport for HttpTransport {
    fn get(
        &self,
        url: &str,
        headers: &[(String, String)],
    ) -> Result<TransportResponse, TransportError> {
        let mut req = self.agent.get(url);
        for (k, v) in headers {
            req = req.header(k.as_str(), v.as_str());
        }
        let mut resp = req
            .call()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        let status = resp.status().as_u16();
        let header_u64 = |name: &str| {
            resp.headers()
                .get(name)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.parse::<u64>().ok())
        };
        let retry_after = header_u64("retry-after");
        let rate_limit_remaining =
            header_u64("x-ratelimit-remaining").or_else(|| header_u64("ratelimit-remaining"));
        let body = resp
            .body_mut()
            .read_to_vec()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        Ok(TransportResponse {
            status,
            body,
            retry_after,
            rate_limit_remaining,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct FixtureRecord {
    url: String,
    status: u16,
    #[serde(default)]
    retry_after: Option<u64>,
    /// Response body; logs and API payloads are text.
    body: String,
}

pub fn fixture_key(url: &str) -> String {
    sha256_hex(format!("GET {url}").as_bytes())[..32].to_string()
}

/// Writes one fixture record; used by the recorder and by tests that
/// construct offline forges.
pub fn write_fixture(
    dir: &Path,
    url: &str,
    status: u16,
    body: &str,
) -> Result<PathBuf, TransportError> {
    std::fs::create_dir_all(dir).map_err(|e| TransportError::Io(e.to_string()))?;
    let record = FixtureRecord {
        url: url.to_string(),
        status,
        retry_after: None,
        body: body.to_string(),
    };
    let path = dir.join(format!("{}.json", fixture_key(url)));
    let text = serde_json::to_string_pretty(&record).expect("fixture serializes");
    std::fs::write(&path, text).map_err(|e| TransportError::Io(e.to_string()))?;
    Ok(path)
}

/// Replays recorded responses from a fixture directory; a request with no
/// recording is an error, never a network call.
pub struct FixtureTransport {
    dir: PathBuf,
}

impl FixtureTransport {
    pub fn new(dir: impl Into<PathBuf>) -> FixtureTransport {
        FixtureTransport { dir: dir.into() }
    }
}

impl Transport for FixtureTransport {
    fn get(
        &self,
        url: &str,
        _headers: &[(String, String)],
    ) -> Result<TransportResponse, TransportError> {
        let path = self.dir.join(format!("{}.json", fixture_key(url)));
        let text = std::fs::read_to_string(&path)
            .map_err(|_| TransportError::MissingFixture(url.to_string()))?;
        let record: FixtureRecord =
            serde_json::from_str(&text).map_err(|e| TransportError::Io(e.to_string()))?;
        Ok(TransportResponse {
            status: record.status,
            body: record.body.into_bytes(),
            retry_after: record.retry_after,
            rate_limit_remaining: None,
        })
    }
}

/// Forwards to an inner transport and records every response as a fixture.
pub struct RecordingTransport {
    inner: Arc<dyn Transport>,
    dir: PathBuf,
}

impl RecordingTransport {
    pub fn new(inner: Arc<dyn Transport>, dir: impl Into<PathBuf>) -> RecordingTransport {
        RecordingTransport {
            inner,
            dir: dir.into(),
        }
    }
}

impl Transport for RecordingTransport {
    fn get(
        &self,
        url: &str,
        headers: &[(String, String)],
    ) -> Result<TransportResponse, TransportError> {
        let resp = self.inner.get(url, headers)?;
        let body = String::from_utf8_lossy(&resp.body);
        write_fixture(&self.dir, url, resp.status, &body)?;
        Ok(resp)
    }
}

/// Fails every request; offline flows must never reach it.
pub struct DenyTransport;

impl Transport for DenyTransport {
    fn get(
        &self,
        url: &str,
        _headers: &[(String, String)],
    ) -> Result<TransportResponse, TransportError> {
        Err(TransportError::Network(format!(
            "network operation attempted in offline mode: GET {url}"
        )))
    }
}
