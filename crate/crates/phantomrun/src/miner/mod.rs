//! Forge mining: repository discovery, run enumeration, the failing
//! build-workflow filter, and log harvesting.

mod github;
mod gitlab;
mod markers;
mod transport;

pub use markers::{scan_compilation_markers, MarkerHit, MarkerScan};
pub use transport::{
    fixture_key, write_fixture, DenyTransport, FixtureTransport, HttpTransport, RecordingTransport,
    Transport, TransportError, TransportResponse,
};

use std::collections::BTreeSet;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use phantomrun_core::model::{CIRun, Forge, RepositoryRef, RunConclusion};
use serde::{Deserialize, Serialize};

use crate::config::WorkflowFilter;

#[derive(Debug, thiserror::Error)]
pub enum MinerError {
    #[error("forge rejected credentials (or no token was supplied)")]
    InvalidToken,
    #[error("network unreachable: {0}")]
    NetworkUnreachable(String),
    #[error("rate limited; retry after {retry_after:?}s")]
    RateLimited { retry_after: Option<u64> },
    #[error("repository not found: {0}")]
    RepoNotFound(String),
    #[error("log for run {run_id} has expired ({status})")]
    LogExpired { run_id: String, status: u16 },
    #[error("run {run_id} did not fail; only failing runs are harvested")]
    NotAFailure { run_id: String },
    #[error("forge error {status} on {url}")]
    ForgeError { status: u16, url: String },
    #[error("unparseable forge response: {0}")]
    Parse(String),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// Repository discovery criteria.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscoveryCriteria {
    pub required_topic: String,
    pub allowed_languages: BTreeSet<String>,
    /// Strict inequality: a repository qualifies with stars > this value.
    pub min_stars_exclusive: u64,
    /// Runs created after this instant are outside the study window.
    pub window_end: DateTime<Utc>,
}

impl Default for DiscoveryCriteria {
    fn default() -> Self {
        Self {
            required_topic: "embedded".into(),
            allowed_languages: ["C", "C++"].map(String::from).into_iter().collect(),
            min_stars_exclusive: 20,
            window_end: "2025-10-03T23:59:59Z"
                .parse()
                .expect("valid default window end"),
        }
    }
}

impl DiscoveryCriteria {
    pub fn admits(&self, repo: &RepositoryRef) -> bool {
        repo.topics.contains(&self.required_topic)
            && self.allowed_languages.contains(&repo.primary_language)
            && repo.stars > self.min_stars_exclusive
    }

    pub fn validate(&self) -> Result<(), MinerError> {
        if self.allowed_languages.is_empty() {
            return Err(MinerError::Parse(
                "allowed_languages must be non-empty".into(),
            ));
        }
        if self.required_topic.is_empty() {
            return Err(MinerError::Parse("required_topic must be non-empty".into()));
        }
        Ok(())
    }
}

/// A PAT held in memory only: never printed, never serialized.
#[derive(Clone)]
pub struct Secret(String);

impl std::fmt::Debug for Secret {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Secret(<redacted>)")
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 5,
            base_delay: Duration::from_millis(500),
        }
    }
}

/// An authenticated (or offline) connection to one forge. All requests of
/// a session share the rate-limit budget.
pub struct ForgeSession {
    pub forge: Forge,
    pub base_url: String,
    token: Option<Secret>,
    transport: Arc<dyn Transport>,
    retry: RetryPolicy,
    rate_limit_remaining: Mutex<Option<u64>>,
}

impl std::fmt::Debug for ForgeSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ForgeSession")
            .field("forge", &self.forge)
            .field("base_url", &self.base_url)
            .field("token_present", &self.token.is_some())
            .finish()
    }
}

fn check_base_url(base_url: &str) -> Result<(), MinerError> {
    if !base_url.starts_with("https://") {
        return Err(MinerError::Parse(format!(
            "base url must be an absolute https url, got {base_url:?}"
        )));
    }
    Ok(())
}

/// Authenticates against a forge. The token is attached to every request
/// and never logged or persisted; reachability is checked lazily on the
/// first call.
pub fn authenticate(
    forge: Forge,
    base_url: &str,
    token: &str,
    transport: Arc<dyn Transport>,
    retry: RetryPolicy,
) -> Result<ForgeSession, MinerError> {
    if token.is_empty() {
        return Err(MinerError::InvalidToken);
    }
    check_base_url(base_url)?;
    Ok(ForgeSession {
        forge,
        base_url: base_url.trim_end_matches('/').to_string(),
        token: Some(Secret(token.to_string())),
        transport,
        retry,
        rate_limit_remaining: Mutex::new(None),
    })
}

impl ForgeSession {
    /// Unauthenticated session over a replay/fixture transport.
    pub fn offline(forge: Forge, base_url: &str, transport: Arc<dyn Transport>) -> ForgeSession {
        ForgeSession {
            forge,
            base_url: base_url.trim_end_matches('/').to_string(),
            token: None,
            transport,
            retry: RetryPolicy {
                max_retries: 0,
                base_delay: Duration::from_millis(1),
            },
            rate_limit_remaining: Mutex::new(None),
        }
    }

    pub fn token_present(&self) -> bool {
        self.token.is_some()
    }

    pub fn rate_limit_remaining(&self) -> Option<u64> {
        *self.rate_limit_remaining.lock().unwrap()
    }

    fn headers(&self) -> Vec<(String, String)> {
        let mut headers = vec![("user-agent".to_string(), "phantomrun".to_string())];
        match self.forge {
            Forge::Github => {
                headers.push(("accept".into(), "application/vnd.github+json".into()));
                if let Some(Secret(tok)) = &self.token {
                    headers.push(("authorization".into(), format!("Bearer {tok}")));
                }
            }
            Forge::Gitlab => {
                if let Some(Secret(tok)) = &self.token {
                    headers.push(("private-token".into(), tok.clone()));
                }
            }
        }
        headers
    }

    /// One GET with retry-after honoring and capped exponential backoff;
    /// 2xx responses update the shared rate-limit budget.
    fn request(&self, url: &str) -> Result<TransportResponse, MinerError> {
        let headers = self.headers();
        let mut attempt = 0u32;
        loop {
            match self.transport.get(url, &headers) {
                Ok(resp) => {
                    if let Some(remaining) = resp.rate_limit_remaining {
                        *self.rate_limit_remaining.lock().unwrap() = Some(remaining);
                    }
                    let rate_limited =
                        resp.status == 429 || (resp.status == 403 && resp.retry_after.is_some());
                    if rate_limited {
                        if attempt >= self.retry.max_retries {
                            return Err(MinerError::RateLimited {
                                retry_after: resp.retry_after,
                            });
                        }
                        std::thread::sleep(self.backoff(attempt, resp.retry_after));
                        attempt += 1;
                        continue;
                    }
                    if resp.status >= 500 && attempt < self.retry.max_retries {
                        std::thread::sleep(self.backoff(attempt, None));
                        attempt += 1;
                        continue;
                    }
                    match resp.status {
                        401 => return Err(MinerError::InvalidToken),
                        403 => {
                            return Err(MinerError::ForgeError {
                                status: 403,
                                url: url.into(),
                            })
                        }
                        _ => return Ok(resp),
                    }
                }
                Err(TransportError::Network(e)) => {
                    if attempt >= self.retry.max_retries {
                        return Err(MinerError::NetworkUnreachable(e));
                    }
                    std::thread::sleep(self.backoff(attempt, None));
                    attempt += 1;
                }
                Err(e) => return Err(e.into()),
            }
        }
    }

    fn backoff(&self, attempt: u32, retry_after: Option<u64>) -> Duration {
        match retry_after {
            Some(secs) => Duration::from_secs(secs.min(30)),
            None => self
                .retry
                .base_delay
                .saturating_mul(2u32.saturating_pow(attempt)),
        }
    }

    fn get_json<T: serde::de::DeserializeOwned>(&self, url: &str) -> Result<T, MinerError> {
        let resp = self.request(url)?;
        if resp.status == 404 {
            return Err(MinerError::ForgeError {
                status: 404,
                url: url.into(),
            });
        }
        if !(200..300).contains(&resp.status) {
            return Err(MinerError::ForgeError {
                status: resp.status,
                url: url.into(),
            });
        }
        serde_json::from_slice(&resp.body).map_err(|e| MinerError::Parse(format!("{url}: {e}")))
    }
}

/// The validity filter over mined runs: keep exactly the failing
/// build-workflow runs, preserving order. Total and idempotent.
pub fn filter_valid(runs: &[CIRun]) -> Vec<CIRun> {
    runs.iter()
        .filter(|r| r.is_valid_failure())
        .cloned()
        .collect()
}

/// Discovers candidate repositories matching the criteria, paginating up
/// to `page_cap` pages.
pub fn discover_repositories(
    session: &ForgeSession,
    criteria: &DiscoveryCriteria,
    per_page: u32,
    page_cap: u32,
) -> Result<Vec<RepositoryRef>, MinerError> {
    let mut out = Vec::new();
    match session.forge {
        Forge::Github => {
            for page in 1..=page_cap {
                let url = github::search_url(
                    &session.base_url,
                    &criteria.required_topic,
                    criteria.min_stars_exclusive,
                    per_page,
                    page,
                );
                let page_data: github::SearchReposPage = session.get_json(&url)?;
                if page_data.items.is_empty() {
                    break;
                }
                for repo in page_data.items {
                    let repo = repo.into_model()?;
                    if criteria.admits(&repo) {
                        out.push(repo);
                    }
                }
            }
        }
        Forge::Gitlab => {
            for page in 1..=page_cap {
                let url = gitlab::projects_url(
                    &session.base_url,
                    &criteria.required_topic,
                    per_page,
                    page,
                );
                let projects: Vec<gitlab::GlProject> = session.get_json(&url)?;
                if projects.is_empty() {
                    break;
                }
                for project in projects {
                    if project.star_count <= criteria.min_stars_exclusive {
                        continue;
                    }
                    let lang_url = gitlab::languages_url(&session.base_url, project.id);
                    let langs: std::collections::BTreeMap<String, f64> =
                        session.get_json(&lang_url)?;
                    let primary = langs
                        .iter()
                        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
                        .map(|(k, _)| k.clone())
                        .unwrap_or_default();
                    if let Some(repo) = project.into_model(primary)? {
                        if criteria.admits(&repo) {
                            out.push(repo);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Fetches a single repository by owner/name.
pub fn fetch_repository(
    session: &ForgeSession,
    owner: &str,
    name: &str,
) -> Result<RepositoryRef, MinerError> {
    match session.forge {
        Forge::Github => {
            let url = github::repo_url(&session.base_url, owner, name);
            let repo: github::GhRepo = session.get_json(&url).map_err(not_found(owner, name))?;
            repo.into_model()
        }
        Forge::Gitlab => {
            let url = gitlab::project_url(&session.base_url, owner, name);
            let project: gitlab::GlProject =
                session.get_json(&url).map_err(not_found(owner, name))?;
            let lang_url = gitlab::languages_url(&session.base_url, project.id);
            let langs: std::collections::BTreeMap<String, f64> = session.get_json(&lang_url)?;
            let primary = langs
                .iter()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
                .map(|(k, _)| k.clone())
                .unwrap_or_default();
            project
                .into_model(primary)?
                .ok_or_else(|| MinerError::Parse("nested gitlab namespaces are unsupported".into()))
        }
    }
}

fn not_found(owner: &str, name: &str) -> impl FnOnce(MinerError) -> MinerError {
    let slug = format!("{owner}/{name}");
    move |e| match e {
        MinerError::ForgeError { status: 404, .. } => MinerError::RepoNotFound(slug),
        other => other,
    }
}

/// Enumerates PR/MR-attached CI runs of a repository, newest first as the
/// forge returns them, keeping only runs created inside the study window.
pub fn enumerate_runs(
    session: &ForgeSession,
    repo: &RepositoryRef,
    window_end: DateTime<Utc>,
    filter: &WorkflowFilter,
    per_page: u32,
    page_cap: u32,
) -> Result<Vec<CIRun>, MinerError> {
    let mut out = Vec::new();
    match session.forge {
        Forge::Github => {
            for page in 1..=page_cap {
                let url =
                    github::runs_url(&session.base_url, &repo.owner, &repo.name, per_page, page);
                let page_data: github::RunsPage = session
                    .get_json(&url)
                    .map_err(not_found(&repo.owner, &repo.name))?;
                if page_data.workflow_runs.is_empty() {
                    break;
                }
                for run in page_data.workflow_runs {
                    if let Some(run) = run.into_model(repo, filter)? {
                        if run.created_at <= window_end {
                            out.push(run);
                        }
                    }
                }
            }
        }
        Forge::Gitlab => {
            for page in 1..=page_cap {
                let url = gitlab::pipelines_url(
                    &session.base_url,
                    &repo.owner,
                    &repo.name,
                    per_page,
                    page,
                );
                let pipelines: Vec<gitlab::GlPipeline> = session
                    .get_json(&url)
                    .map_err(not_found(&repo.owner, &repo.name))?;
                if pipelines.is_empty() {
                    break;
                }
                for pipeline in pipelines {
                    if let Some(run) = pipeline.into_model(repo, filter)? {
                        if run.created_at <= window_end {
                            out.push(run);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Downloads the complete log stream of a failing run and suggests a
/// schema filename for it.
pub fn fetch_log(session: &ForgeSession, run: &CIRun) -> Result<(Vec<u8>, String), MinerError> {
    if run.conclusion != RunConclusion::Failure {
        return Err(MinerError::NotAFailure {
            run_id: run.run_id.clone(),
        });
    }
    let expired = |e: MinerError| match e {
        MinerError::ForgeError {
            status: status @ (404 | 410),
            ..
        } => MinerError::LogExpired {
            run_id: run.run_id.clone(),
            status,
        },
        other => other,
    };
    match session.forge {
        Forge::Github => {
            let jobs_url = github::jobs_url(
                &session.base_url,
                &run.repo.owner,
                &run.repo.name,
                &run.run_id,
            );
            let jobs: github::JobsPage = session.get_json(&jobs_url).map_err(expired)?;
            let job = jobs
                .jobs
                .iter()
                .find(|j| j.conclusion.as_deref() == Some("failure"))
                .or_else(|| jobs.jobs.first())
                .ok_or_else(|| MinerError::Parse(format!("run {} has no jobs", run.run_id)))?;
            let log_url =
                github::job_logs_url(&session.base_url, &run.repo.owner, &run.repo.name, job.id);
            let resp = session.request(&log_url)?;
            if matches!(resp.status, 404 | 410) {
                return Err(MinerError::LogExpired {
                    run_id: run.run_id.clone(),
                    status: resp.status,
                });
            }
            if !(200..300).contains(&resp.status) {
                return Err(MinerError::ForgeError {
                    status: resp.status,
                    url: log_url,
                });
            }
            let filename = if run.integration_id.is_empty() {
                format!("run-{}.log", run.run_id)
            } else {
                format!("pr-{}.log", run.integration_id)
            };
            Ok((resp.body, filename))
        }
        Forge::Gitlab => {
            let project_url =
                gitlab::project_url(&session.base_url, &run.repo.owner, &run.repo.name);
            let project: gitlab::GlProjectId = session.get_json(&project_url).map_err(expired)?;
            let jobs_url = gitlab::pipeline_jobs_url(
                &session.base_url,
                &run.repo.owner,
                &run.repo.name,
                &run.run_id,
            );
            let jobs: Vec<gitlab::GlJob> = session.get_json(&jobs_url).map_err(expired)?;
            let job = jobs
                .iter()
                .find(|j| j.status == "failed")
                .or_else(|| jobs.first())
                .ok_or_else(|| MinerError::Parse(format!("pipeline {} has no jobs", run.run_id)))?;
            let trace_url =
                gitlab::job_trace_url(&session.base_url, &run.repo.owner, &run.repo.name, job.id);
            let resp = session.request(&trace_url)?;
            if matches!(resp.status, 404 | 410) {
                return Err(MinerError::LogExpired {
                    run_id: run.run_id.clone(),
                    status: resp.status,
                });
            }
            if !(200..300).contains(&resp.status) {
                return Err(MinerError::ForgeError {
                    status: resp.status,
                    url: trace_url,
                });
            }
            let filename = format!(
                "proj{}_mr{}_sha{}.log",
                project.id, run.integration_id, run.commit_sha
            );
            Ok((resp.body, filename))
        }
    }
}
