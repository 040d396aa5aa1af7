//! GitHub REST response shapes and mapping into the domain model.

use chrono::{DateTime, Utc};
use phantomrun_core::model::{CIRun, Forge, IntegrationKind, RepositoryRef, RunConclusion};
use serde::Deserialize;

use super::MinerError;
use crate::config::WorkflowFilter;

#[derive(Deserialize)]
pub struct SearchReposPage {
    #[serde(default)]
    pub items: Vec<GhRepo>,
}

#[derive(Deserialize)]
pub struct GhRepo {
    pub name: String,
    pub owner: GhOwner,
    #[serde(default)]
    pub language: Option<String>,
    #[serde(default)]
    pub stargazers_count: u64,
    #[serde(default)]
    pub topics: Vec<String>,
}

#[derive(Deserialize)]
pub struct GhOwner {
    pub login: String,
}

impl GhRepo {
    pub fn into_model(self) -> Result<RepositoryRef, MinerError> {
        RepositoryRef::new(
            Forge::Github,
            self.owner.login,
            self.name,
            self.language.unwrap_or_default(),
            self.stargazers_count,
            self.topics.into_iter().collect(),
        )
        .map_err(|e| MinerError::Parse(e.to_string()))
    }
}

#[derive(Deserialize)]
pub struct RunsPage {
    #[serde(default)]
    pub workflow_runs: Vec<GhRun>,
}

#[derive(Deserialize)]
pub struct GhRun {
    pub id: u64,
    #[serde(default)]
    pub name: Option<String>,
    pub head_sha: String,
    #[serde(default)]
    pub event: String,
    #[serde(default)]
    pub conclusion: Option<String>,
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub pull_requests: Vec<GhPullRef>,
}

#[derive(Deserialize)]
pub struct GhPullRef {
    pub number: u64,
}

pub fn map_conclusion(raw: Option<&str>) -> RunConclusion {
    match raw {
        Some("success") => RunConclusion::Success,
        Some("failure") => RunConclusion::Failure,
        Some("cancelled") => RunConclusion::Cancelled,
        _ => RunConclusion::Other,
    }
}

impl GhRun {
    /// Maps a pull-request-triggered run into a CIRun; runs from other
    /// events carry no integration identity and yield `None`.
    pub fn into_model(
        self,
        repo: &RepositoryRef,
        filter: &WorkflowFilter,
    ) -> Result<Option<CIRun>, MinerError> {
        if self.event != "pull_request" {
            return Ok(None);
        }
        let sha = self.head_sha.to_lowercase();
        CIRun::validate_sha(&sha).map_err(|e| MinerError::Parse(e.to_string()))?;
        let workflow_name = self.name.unwrap_or_default();
        Ok(Some(CIRun {
            repo: repo.clone(),
            run_id: self.id.to_string(),
            integration_kind: IntegrationKind::PullRequest,
            integration_id: self
                .pull_requests
                .first()
                .map(|p| p.number.to_string())
                .unwrap_or_default(),
            commit_sha: sha,
            conclusion: map_conclusion(self.conclusion.as_deref()),
            is_build_workflow: filter.is_build_workflow(&workflow_name),
            workflow_name,
            created_at: self.created_at,
        }))
    }
}

#[derive(Deserialize)]
pub struct JobsPage {
    #[serde(default)]
    pub jobs: Vec<GhJob>,
}

#[derive(Deserialize)]
pub struct GhJob {
    pub id: u64,
    #[serde(default)]
    pub conclusion: Option<String>,
}

pub fn search_url(base: &str, topic: &str, min_stars: u64, per_page: u32, page: u32) -> String {
    // '>' must be percent-encoded; GitHub joins qualifiers with '+'
    format!(
        "{}/search/repositories?q=topic:{topic}+stars:%3E{min_stars}&per_page={per_page}&page={page}",
        base.trim_end_matches('/')
    )
}

pub fn repo_url(base: &str, owner: &str, name: &str) -> String {
    format!("{}/repos/{owner}/{name}", base.trim_end_matches('/'))
}

pub fn runs_url(base: &str, owner: &str, name: &str, per_page: u32, page: u32) -> String {
    format!(
        "{}/repos/{owner}/{name}/actions/runs?per_page={per_page}&page={page}",
        base.trim_end_matches('/')
    )
}

pub fn jobs_url(base: &str, owner: &str, name: &str, run_id: &str) -> String {
    format!(
        "{}/repos/{owner}/{name}/actions/runs/{run_id}/jobs?per_page=100",
        base.trim_end_matches('/')
    )
}

pub fn job_logs_url(base: &str, owner: &str, name: &str, job_id: u64) -> String {
    format!(
        "{}/repos/{owner}/{name}/actions/jobs/{job_id}/logs",
        base.trim_end_matches('/')
    )
}
