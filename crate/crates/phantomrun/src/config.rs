//! Pipeline configuration: one TOML file, documented defaults for every
//! field, unknown keys rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use phantomrun_core::logparse::{NormalizationConfig, ProjectFamily};
use serde::{Deserialize, Serialize};

use crate::miner::DiscoveryCriteria;
use crate::reconstructor::ActionAdapter;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Root directory of the artifact store and manifest.
    pub dataset_root: PathBuf,
    pub forge: ForgeConfig,
    pub discovery: DiscoveryCriteria,
    pub workflow_filter: WorkflowFilter,
    pub normalization: NormalizationConfig,
    pub profiles: ProfilesConfig,
    /// GitHub runner labels are not image names; this table maps them.
    pub runner_images: BTreeMap<String, String>,
    /// Adapters for third-party action steps; unknown actions are
    /// unsupported-config.
    pub actions: BTreeMap<String, ActionAdapter>,
    pub runtime: RuntimeConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dataset_root: PathBuf::from("dataset"),
            forge: ForgeConfig::default(),
            discovery: DiscoveryCriteria::default(),
            workflow_filter: WorkflowFilter::default(),
            normalization: NormalizationConfig::default(),
            profiles: ProfilesConfig::default(),
            runner_images: default_runner_images(),
            actions: default_actions(),
            runtime: RuntimeConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let config: PipelineConfig = toml::from_str(&text).map_err(|e| ConfigError::Invalid {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        config
            .normalization
            .validate()
            .map_err(|e| ConfigError::Invalid {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        config
            .discovery
            .validate()
            .map_err(|e| ConfigError::Invalid {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        Ok(config)
    }

    /// Stage profile family for a project, falling back to the default.
    pub fn family_for(&self, project: &str) -> ProjectFamily {
        self.profiles
            .by_project
            .get(project)
            .copied()
            .unwrap_or(self.profiles.default_family)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForgeConfig {
    pub github_base_url: String,
    pub gitlab_base_url: String,
    /// Generic token env var; the per-forge ones take precedence.
    pub token_env: String,
    pub github_token_env: String,
    pub gitlab_token_env: String,
    pub github_clone_base: String,
    pub gitlab_clone_base: String,
    /// Pagination stops after this many pages per listing.
    pub page_cap: u32,
    pub per_page: u32,
    /// Base delay for exponential backoff on rate limits, in ms.
    pub retry_base_ms: u64,
}

impl Default for ForgeConfig {
    fn default() -> Self {
        Self {
            github_base_url: "https://api.github.com".into(),
            gitlab_base_url: "https://gitlab.com".into(),
            token_env: "PHANTOMRUN_TOKEN".into(),
            github_token_env: "PHANTOMRUN_GITHUB_TOKEN".into(),
            gitlab_token_env: "PHANTOMRUN_GITLAB_TOKEN".into(),
            github_clone_base: "https://github.com".into(),
            gitlab_clone_base: "https://gitlab.com".into(),
            page_cap: 10,
            per_page: 100,
            retry_base_ms: 500,
        }
    }
}

impl ForgeConfig {
    pub fn base_url(&self, forge: phantomrun_core::model::Forge) -> &str {
        match forge {
            phantomrun_core::model::Forge::Github => &self.github_base_url,
            phantomrun_core::model::Forge::Gitlab => &self.gitlab_base_url,
        }
    }

    pub fn token_for(&self, forge: phantomrun_core::model::Forge) -> Option<String> {
        let specific = match forge {
            phantomrun_core::model::Forge::Github => &self.github_token_env,
            phantomrun_core::model::Forge::Gitlab => &self.gitlab_token_env,
        };
        std::env::var(specific)
            .ok()
            .or_else(|| std::env::var(&self.token_env).ok())
    }

    pub fn clone_url(&self, repo: &phantomrun_core::model::RepositoryRef) -> String {
        let base = match repo.forge {
            phantomrun_core::model::Forge::Github => &self.github_clone_base,
            phantomrun_core::model::Forge::Gitlab => &self.gitlab_clone_base,
        };
        format!(
            "{}/{}/{}",
            base.trim_end_matches('/'),
            repo.owner,
            repo.name
        )
    }
}

/// The build-workflow predicate: the workflow name must contain an
/// allowlist token and no denylist token (deny wins). Matching is
/// case-insensitive substring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkflowFilter {
    pub allow: Vec<String>,
    pub deny: Vec<String>,
}

impl Default for WorkflowFilter {
    fn default() -> Self {
        Self {
            allow: ["build", "compile", "firmware", "twister", "ci"]
                .map(String::from)
                .to_vec(),
            deny: ["docs", "doc", "lint", "format", "labeler", "bot", "stale"]
                .map(String::from)
                .to_vec(),
        }
    }
}

impl WorkflowFilter {
    pub fn is_build_workflow(&self, workflow_name: &str) -> bool {
        let name = workflow_name.to_lowercase();
        if self.deny.iter().any(|t| name.contains(&t.to_lowercase())) {
            return false;
        }
        self.allow.iter().any(|t| name.contains(&t.to_lowercase()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfilesConfig {
    pub default_family: ProjectFamily,
    /// Project name -> family overrides.
    pub by_project: BTreeMap<String, ProjectFamily>,
}

impl Default for ProfilesConfig {
    fn default() -> Self {
        Self {
            default_family: ProjectFamily::Generic,
            by_project: [
                ("zephyr".to_string(), ProjectFamily::CmakeNinja),
                ("rtems".to_string(), ProjectFamily::AutotoolsMake),
                ("firmware".to_string(), ProjectFamily::MakeBuildroot),
                (
                    "platform-ststm32".to_string(),
                    ProjectFamily::SconsPlatformio,
                ),
            ]
            .into_iter()
            .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuntimeConfig {
    /// Container runtime binary; invoked as a subprocess.
    pub program: String,
    pub extra_args: Vec<String>,
    /// Arguments used to probe runtime availability.
    pub probe_args: Vec<String>,
    pub timeout_minutes: u64,
    pub parallelism: usize,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            program: "docker".into(),
            extra_args: Vec::new(),
            probe_args: vec!["version".into()],
            timeout_minutes: 60,
            parallelism: 1,
        }
    }
}

fn default_runner_images() -> BTreeMap<String, String> {
    [
        ("ubuntu-latest", "ubuntu:24.04"),
        ("ubuntu-24.04", "ubuntu:24.04"),
        ("ubuntu-22.04", "ubuntu:22.04"),
        ("ubuntu-20.04", "ubuntu:20.04"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

fn default_actions() -> BTreeMap<String, ActionAdapter> {
    [("actions/checkout".to_string(), ActionAdapter::Skip)]
        .into_iter()
        .collect()
}
