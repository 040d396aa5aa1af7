//! Build-log parsing and normalization.
//!
//! Raw logs go through a fixed pipeline: timestamp stripping, stage
//! segmentation, rule-driven diagnostic extraction, path-prefix and
//! severity filtering, and canonical reordering. The result is a
//! [`NormalizedLog`](crate::model::NormalizedLog) that depends only on
//! diagnostic content, not on formatting or benign nondeterminism.

mod catalog;
mod diagnostics;
mod filename;
mod normalize;
mod stages;

pub use catalog::{MessageMode, MultilineMode, PatternCatalog, PatternRule};
pub use diagnostics::parse_diagnostics;
pub use filename::{parse_filename_metadata, render_filename};
pub use normalize::{normalize, render_normalized, render_profile, strip_leading_timestamps};
pub use stages::{segment_stages, StageBounds};

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::Severity;

#[derive(Debug, Clone, thiserror::Error)]
pub enum LogParseError {
    #[error("invalid regex in pattern {name:?}: {message}")]
    InvalidPattern { name: String, message: String },
    #[error("invalid stage profile: {0}")]
    InvalidProfile(String),
    #[error("invalid normalization config: {0}")]
    InvalidConfig(String),
    #[error("malformed catalog or profile file: {0}")]
    Malformed(String),
}

/// Build-system family of a project; selects stage markers and
/// family-scoped pattern rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectFamily {
    AutotoolsMake,
    CmakeNinja,
    MakeBuildroot,
    SconsPlatformio,
    Generic,
}

impl ProjectFamily {
    pub const ALL: [ProjectFamily; 5] = [
        ProjectFamily::AutotoolsMake,
        ProjectFamily::CmakeNinja,
        ProjectFamily::MakeBuildroot,
        ProjectFamily::SconsPlatformio,
        ProjectFamily::Generic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProjectFamily::AutotoolsMake => "autotools_make",
            ProjectFamily::CmakeNinja => "cmake_ninja",
            ProjectFamily::MakeBuildroot => "make_buildroot",
            ProjectFamily::SconsPlatformio => "scons_platformio",
            ProjectFamily::Generic => "generic",
        }
    }
}

impl fmt::Display for ProjectFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProjectFamily {
    type Err = LogParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProjectFamily::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| LogParseError::Malformed(format!("unknown project family {s:?}")))
    }
}

/// Controls for the normalization pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalizationConfig {
    /// Absolute path prefixes removed from event files and messages,
    /// applied in order.
    pub path_prefixes_to_strip: Vec<String>,
    pub strip_timestamps: bool,
    pub canonical_reorder: bool,
    pub drop_severities: BTreeSet<Severity>,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        Self {
            path_prefixes_to_strip: Vec::new(),
            strip_timestamps: true,
            canonical_reorder: true,
            drop_severities: [Severity::Note].into_iter().collect(),
        }
    }
}

impl NormalizationConfig {
    pub fn validate(&self) -> Result<(), LogParseError> {
        for p in &self.path_prefixes_to_strip {
            if !p.starts_with('/') {
                return Err(LogParseError::InvalidConfig(format!(
                    "path prefix {p:?} is not absolute"
                )));
            }
        }
        Ok(())
    }
}

/// Opens a build stage at the first line matching `start_pattern`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageMarker {
    pub stage_name: String,
    pub start_pattern: String,
}

/// Ordered stage markers for one project family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageProfile {
    pub family: ProjectFamily,
    #[serde(rename = "markers")]
    pub stage_markers: Vec<StageMarker>,
}

impl StageProfile {
    /// The profile shipped for `family`.
    pub fn builtin(family: ProjectFamily) -> StageProfile {
        builtin_profiles()
            .iter()
            .find(|p| p.family == family)
            .cloned()
            .expect("builtin profile set covers every family")
    }

    /// Checks the profile invariants for user-supplied profiles: markers
    /// non-empty, names unique and distinct from the synthetic preamble,
    /// patterns valid regexes.
    pub fn validate(&self) -> Result<(), LogParseError> {
        if self.stage_markers.is_empty() {
            return Err(LogParseError::InvalidProfile(
                "stage markers are empty".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        for m in &self.stage_markers {
            if m.stage_name.is_empty() || m.stage_name == stages::PREAMBLE {
                return Err(LogParseError::InvalidProfile(format!(
                    "illegal stage name {:?}",
                    m.stage_name
                )));
            }
            if !seen.insert(&m.stage_name) {
                return Err(LogParseError::InvalidProfile(format!(
                    "duplicate stage name {:?}",
                    m.stage_name
                )));
            }
            regex::Regex::new(&m.start_pattern).map_err(|e| LogParseError::InvalidPattern {
                name: m.stage_name.clone(),
                message: e.to_string(),
            })?;
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct ProfilesFile {
    profiles: Vec<StageProfile>,
}

fn builtin_profiles() -> &'static [StageProfile] {
    static PROFILES: once_cell::sync::Lazy<Vec<StageProfile>> = once_cell::sync::Lazy::new(|| {
        let file: ProfilesFile = toml::from_str(include_str!(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/config/stage_profiles.toml"
        )))
        .expect("builtin stage profiles parse");
        for p in &file.profiles {
            p.validate().expect("builtin stage profiles are valid");
        }
        file.profiles
    });
    &PROFILES
}

/// Parses a profiles file (same format as the builtin one) and returns the
/// validated profiles.
pub fn load_profiles(toml_text: &str) -> Result<Vec<StageProfile>, LogParseError> {
    let file: ProfilesFile =
        toml::from_str(toml_text).map_err(|e| LogParseError::Malformed(e.to_string()))?;
    for p in &file.profiles {
        p.validate()?;
    }
    Ok(file.profiles)
}

/// Identifies the normalization configuration a log was produced under.
///
/// Covers the normalization config, the project family, and the pattern
/// catalog digest. Stage-marker details are deliberately excluded so that
/// re-normalizing a rendered log (whose markers are synthetic banners)
/// keeps the fingerprint stable.
pub fn normalization_fingerprint(
    cfg: &NormalizationConfig,
    family: ProjectFamily,
    catalog: &PatternCatalog,
) -> String {
    let payload = serde_json::json!({
        "config": cfg,
        "family": family,
        "catalog": catalog.digest(),
    });
    let mut hasher = Sha256::new();
    hasher.update(payload.to_string().as_bytes());
    hex_digest(hasher)
}

pub(crate) fn hex_digest(hasher: Sha256) -> String {
    let out = hasher.finalize();
    let mut s = String::with_capacity(out.len() * 2);
    for b in out {
        s.push_str(&format!("{b:02x}"));
    }
    s
}
