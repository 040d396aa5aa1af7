//! GitLab REST response shapes and mapping into the domain model.
//!
//! Only single-level namespaces (`owner/name`) are supported: the domain
//! model forbids path separators inside owner or name, so projects in
//! nested groups are skipped at discovery.

use chrono::{DateTime, Utc};
use once_cell::sync::Lazy;
use phantomrun_core::model::{CIRun, Forge, IntegrationKind, RepositoryRef, RunConclusion};
use regex::Regex;
use serde::Deserialize;

use super::MinerError;
use crate::config::WorkflowFilter;

#[derive(Deserialize)]
pub struct GlProject {
    pub id: u64,
    pub path_with_namespace: String,
    #[serde(default)]
    pub star_count: u64,
    #[serde(default)]
    pub topics: Vec<String>,
}

impl GlProject {
    pub fn owner_name(&self) -> Option<(String, String)> {
        let mut parts = self.path_with_namespace.splitn(2, '/');
        let owner = parts.next()?.to_string();
        let name = parts.next()?.to_string();
        if name.contains('/') {
            return None; // nested namespace
        }
        Some((owner, name))
    }

    pub fn into_model(self, primary_language: String) -> Result<Option<RepositoryRef>, MinerError> {
        let Some((owner, name)) = self.owner_name() else {
            return Ok(None);
        };
        RepositoryRef::new(
            Forge::Gitlab,
            owner,
            name,
            primary_language,
            self.star_count,
            self.topics.into_iter().collect(),
        )
        .map(Some)
        .map_err(|e| MinerError::Parse(e.to_string()))
    }
}

#[derive(Deserialize)]
pub struct GlPipeline {
    pub id: u64,
    #[serde(default)]
    pub status: String,
    pub sha: String,
    #[serde(default)]
    pub source: String,
    #[serde(rename = "ref", default)]
    pub git_ref: String,
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub name: Option<String>,
}

static MR_REF: Lazy<Regex> = Lazy::new(|| Regex::new(r"^refs/merge-requests/(\d+)/").unwrap());

pub fn map_status(raw: &str) -> RunConclusion {
    match raw {
        "success" => RunConclusion::Success,
        "failed" => RunConclusion::Failure,
        "canceled" => RunConclusion::Cancelled,
        _ => RunConclusion::Other,
    }
}

impl GlPipeline {
    /// Maps a merge-request pipeline into a CIRun; other pipeline sources
    /// yield `None`.
    pub fn into_model(
        self,
        repo: &RepositoryRef,
        filter: &WorkflowFilter,
    ) -> Result<Option<CIRun>, MinerError> {
        if self.source != "merge_request_event" {
            return Ok(None);
        }
        let Some(mr) = MR_REF.captures(&self.git_ref).map(|c| c[1].to_string()) else {
            return Ok(None);
        };
        let sha = self.sha.to_lowercase();
        CIRun::validate_sha(&sha).map_err(|e| MinerError::Parse(e.to_string()))?;
        let workflow_name = self.name.unwrap_or_else(|| self.git_ref.clone());
        Ok(Some(CIRun {
            repo: repo.clone(),
            run_id: self.id.to_string(),
            integration_kind: IntegrationKind::MergeRequest,
            integration_id: mr,
            commit_sha: sha,
            conclusion: map_status(&self.status),
            is_build_workflow: filter.is_build_workflow(&workflow_name),
            workflow_name,
            created_at: self.created_at,
        }))
    }
}

#[derive(Deserialize)]
pub struct GlJob {
    pub id: u64,
    #[serde(default)]
    pub status: String,
}

#[derive(Deserialize)]
pub struct GlProjectId {
    pub id: u64,
}

pub fn encode_path(owner: &str, name: &str) -> String {
    format!("{owner}%2F{name}")
}

pub fn projects_url(base: &str, topic: &str, per_page: u32, page: u32) -> String {
    format!(
        "{}/api/v4/projects?topic={topic}&order_by=id&sort=asc&per_page={per_page}&page={page}",
        base.trim_end_matches('/')
    )
}

pub fn project_url(base: &str, owner: &str, name: &str) -> String {
    format!(
        "{}/api/v4/projects/{}",
        base.trim_end_matches('/'),
        encode_path(owner, name)
    )
}

pub fn languages_url(base: &str, project_id: u64) -> String {
    format!(
        "{}/api/v4/projects/{project_id}/languages",
        base.trim_end_matches('/')
    )
}

pub fn pipelines_url(base: &str, owner: &str, name: &str, per_page: u32, page: u32) -> String {
    format!(
        "{}/api/v4/projects/{}/pipelines?per_page={per_page}&page={page}",
        base.trim_end_matches('/'),
        encode_path(owner, name)
    )
}

pub fn pipeline_jobs_url(base: &str, owner: &str, name: &str, pipeline_id: &str) -> String {
    format!(
        "{}/api/v4/projects/{}/pipelines/{pipeline_id}/jobs",
        base.trim_end_matches('/'),
        encode_path(owner, name)
    )
}

pub fn job_trace_url(base: &str, owner: &str, name: &str, job_id: u64) -> String {
    format!(
        "{}/api/v4/projects/{}/jobs/{job_id}/trace",
        base.trim_end_matches('/'),
        encode_path(owner, name)
    )
}
