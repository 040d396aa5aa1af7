//! Shared domain types.
//!
//! Every type here is an immutable value: two instances with equal fields
//! compare equal, and all of them round-trip through the line-delimited
//! JSON encoding used by manifests. Invariants that cannot be expressed
//! structurally are enforced by constructors.

use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

/// Errors raised by validating constructors of domain types.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("repository owner/name must be non-empty and contain no path separators: {0:?}")]
    InvalidRepoIdentifier(String),
    #[error("commit sha must be lowercase hex of length >= 7: {0:?}")]
    InvalidCommitSha(String),
    #[error("a verdict cannot be structure-equivalent without being outcome-equivalent")]
    VerdictHierarchy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Forge {
    Github,
    Gitlab,
}

impl fmt::Display for Forge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forge::Github => write!(f, "github"),
            Forge::Gitlab => write!(f, "gitlab"),
        }
    }
}

/// Identity of a mined repository.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepositoryRef {
    pub forge: Forge,
    pub owner: String,
    pub name: String,
    pub primary_language: String,
    pub stars: u64,
    pub topics: BTreeSet<String>,
}

impl RepositoryRef {
    pub fn new(
        forge: Forge,
        owner: impl Into<String>,
        name: impl Into<String>,
        primary_language: impl Into<String>,
        stars: u64,
        topics: BTreeSet<String>,
    ) -> Result<Self, ModelError> {
        let owner = owner.into();
        let name = name.into();
        for part in [&owner, &name] {
            if part.is_empty() || part.contains('/') || part.contains('\\') {
                return Err(ModelError::InvalidRepoIdentifier(part.clone()));
            }
        }
        Ok(Self {
            forge,
            owner,
            name,
            primary_language: primary_language.into(),
            stars,
            topics,
        })
    }

    /// `owner/name`, the form used in labels and clone paths.
    pub fn slug(&self) -> String {
        format!("{}/{}", self.owner, self.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrationKind {
    PullRequest,
    MergeRequest,
}

/// Terminal status of a CI run as reported by the forge.
///
/// `Other` absorbs forge-specific statuses (skipped, timed_out, ...) so the
/// failure predicate stays a strict equality check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunConclusion {
    Success,
    Failure,
    Cancelled,
    Other,
}

/// One CI workflow run of a mined repository.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CIRun {
    pub repo: RepositoryRef,
    pub run_id: String,
    pub integration_kind: IntegrationKind,
    pub integration_id: String,
    pub commit_sha: String,
    pub conclusion: RunConclusion,
    pub workflow_name: String,
    pub is_build_workflow: bool,
    pub created_at: DateTime<Utc>,
}

impl CIRun {
    /// Validates the commit sha: lowercase hex, at least 7 characters
    /// (short SHAs appear in log filename schemes).
    pub fn validate_sha(sha: &str) -> Result<(), ModelError> {
        if sha.len() >= 7
            && sha
                .chars()
                .all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase())
        {
            Ok(())
        } else {
            Err(ModelError::InvalidCommitSha(sha.to_string()))
        }
    }

    /// The conjunction mined runs must satisfy to enter the pipeline:
    /// a failed conclusion on a build workflow.
    pub fn is_valid_failure(&self) -> bool {
        self.conclusion == RunConclusion::Failure && self.is_build_workflow
    }
}

/// Normalized, platform-agnostic extraction of one CI job's environment
/// and build commands.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildSpec {
    pub base_os_image: String,
    /// Insertion order is the extraction order and is preserved verbatim.
    pub env_vars: IndexMap<String, String>,
    pub setup_commands: Vec<String>,
    pub build_commands: Vec<String>,
    /// Concrete axis values of this job instance; empty for non-matrix jobs.
    pub matrix_axes: IndexMap<String, String>,
    pub source_ref: SourceRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceRef {
    pub repo: RepositoryRef,
    pub commit_sha: String,
}

/// Build tool that emitted a diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tool {
    Compiler,
    Linker,
    Make,
    Cmake,
    Ninja,
    Kconfig,
    Devicetree,
    Scons,
    Interpreter,
    Configure,
    Buildroot,
    West,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    FatalError,
    Error,
    Warning,
    Note,
}

impl Severity {
    pub fn is_error(self) -> bool {
        matches!(self, Severity::FatalError | Severity::Error)
    }

    /// The label compilers print for this severity.
    pub fn label(self) -> &'static str {
        match self {
            Severity::FatalError => "fatal error",
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Note => "note",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    UndeclaredIdentifier,
    MissingHeader,
    UndefinedReference,
    MakeRuleFailure,
    ConfigFailure,
    Traceback,
    Other,
}

/// Source location attached to a diagnostic.
///
/// Column implies line; line implies file (the struct only exists when a
/// file is known, and the constructors keep the rest consistent).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub file: String,
    pub line: Option<u32>,
    pub column: Option<u32>,
}

impl Location {
    pub fn file(file: impl Into<String>) -> Self {
        Self {
            file: file.into(),
            line: None,
            column: None,
        }
    }

    pub fn line(file: impl Into<String>, line: u32) -> Self {
        Self {
            file: file.into(),
            line: Some(line),
            column: None,
        }
    }

    pub fn column(file: impl Into<String>, line: u32, column: u32) -> Self {
        Self {
            file: file.into(),
            line: Some(line),
            column: Some(column),
        }
    }

    pub fn is_consistent(&self) -> bool {
        !(self.column.is_some() && self.line.is_none())
    }
}

/// 1-based inclusive line span of a diagnostic in the source log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RawSpan {
    pub start_line: usize,
    pub end_line: usize,
}

/// One parsed build diagnostic.
///
/// `raw_span` is populated by the parser and cleared by normalization:
/// where a diagnostic sat in the source log is formatting, not content.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DiagnosticEvent {
    pub tool: Tool,
    pub severity: Severity,
    pub location: Option<Location>,
    pub message: String,
    pub category: Category,
    pub raw_span: Option<RawSpan>,
}

impl DiagnosticEvent {
    /// Short single-line form for mismatch notes and summaries.
    pub fn summary(&self) -> String {
        match &self.location {
            Some(loc) => {
                let mut s = loc.file.clone();
                if let Some(line) = loc.line {
                    s.push_str(&format!(":{line}"));
                    if let Some(col) = loc.column {
                        s.push_str(&format!(":{col}"));
                    }
                }
                format!(
                    "[{:?}/{}] {s}: {}",
                    self.category,
                    self.severity.label(),
                    self.message
                )
            }
            None => format!(
                "[{:?}/{}] {}",
                self.category,
                self.severity.label(),
                self.message
            ),
        }
    }
}

/// Metadata encoded in a log's filename, per the project-specific schemes
/// found in the raw datasets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum LogMetadata {
    /// `pr-<id>.log`
    PrPlain {
        integration_id: String,
    },
    /// `pr-<id>__<target>.log`
    PrTarget {
        integration_id: String,
        target: String,
    },
    /// `proj<project-id>_mr<mr-id>_sha<commit>.log`
    ProjMrSha {
        project_id: String,
        integration_id: String,
        commit_sha: String,
    },
    /// `*_Firmware(<hardware>).log`
    FirmwareHw {
        hardware: String,
    },
    Unknown,
}

impl LogMetadata {
    pub fn scheme_name(&self) -> &'static str {
        match self {
            LogMetadata::PrPlain { .. } => "pr_plain",
            LogMetadata::PrTarget { .. } => "pr_target",
            LogMetadata::ProjMrSha { .. } => "proj_mr_sha",
            LogMetadata::FirmwareHw { .. } => "firmware_hw",
            LogMetadata::Unknown => "unknown",
        }
    }
}

/// Final compilation status of one build execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildOutcome {
    Success,
    Failure,
}

/// Which execution a normalized log came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogSource {
    OriginalCi,
    Reconstructed,
}

/// One build stage and the diagnostics extracted from it, in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub events: Vec<DiagnosticEvent>,
}

/// Ordered, normalized diagnostic structure of one build execution.
///
/// This is the unit of comparison: two executions are structure-equivalent
/// exactly when their outcomes and stage/event sequences are equal.
/// `normalization_fingerprint` identifies the normalization configuration
/// the log was produced under so that comparisons across configurations
/// can be refused instead of silently lying.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedLog {
    pub outcome: BuildOutcome,
    pub stages: Vec<Stage>,
    pub source: LogSource,
    pub normalization_fingerprint: String,
}

impl NormalizedLog {
    /// Outcome implied by the diagnostic content alone.
    pub fn derived_outcome(&self) -> BuildOutcome {
        let failed = self
            .stages
            .iter()
            .flat_map(|s| &s.events)
            .any(|e| e.severity.is_error());
        if failed {
            BuildOutcome::Failure
        } else {
            BuildOutcome::Success
        }
    }

    pub fn event_count(&self) -> usize {
        self.stages.iter().map(|s| s.events.len()).sum()
    }
}

/// Why a reconstruction attempt produced no build outcome at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    HardwareDependencyMissing,
    RemovedPackageRepository,
    ProprietaryToolchainUnavailable,
    ImplicitEnvironmentDependency,
    Other,
}

impl FailureKind {
    pub fn display_name(self) -> &'static str {
        match self {
            FailureKind::HardwareDependencyMissing => "Hardware dependency missing",
            FailureKind::RemovedPackageRepository => "Removed package repository",
            FailureKind::ProprietaryToolchainUnavailable => "Proprietary toolchain unavailable",
            FailureKind::ImplicitEnvironmentDependency => "Implicit environment dependency",
            FailureKind::Other => "Other",
        }
    }
}

/// Classified cause of a reconstruction failure.
///
/// `evidence` is the matched log excerpt; it is empty exactly when no rule
/// matched and the kind fell back to `Other`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureCause {
    pub kind: FailureKind,
    pub evidence: String,
}

/// Result of one reconstruction attempt.
///
/// A reconstructed attempt always has a build outcome; a failed attempt
/// always has a classified cause. The enum makes the invariant structural.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ReconstructionStatus {
    Reconstructed { outcome: BuildOutcome },
    Failed { cause: FailureCause },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconstructionRecord {
    pub run: CIRun,
    pub status: ReconstructionStatus,
    pub log_artifact_id: Option<String>,
}

impl ReconstructionRecord {
    pub fn is_reconstructed(&self) -> bool {
        matches!(self.status, ReconstructionStatus::Reconstructed { .. })
    }

    pub fn outcome(&self) -> Option<BuildOutcome> {
        match &self.status {
            ReconstructionStatus::Reconstructed { outcome } => Some(*outcome),
            ReconstructionStatus::Failed { .. } => None,
        }
    }

    pub fn cause(&self) -> Option<&FailureCause> {
        match &self.status {
            ReconstructionStatus::Reconstructed { .. } => None,
            ReconstructionStatus::Failed { cause } => Some(cause),
        }
    }

    /// Project identity used for per-project aggregation and stratification.
    pub fn project(&self) -> &str {
        &self.run.repo.name
    }
}

/// Binary fidelity verdict for one original/replay pair.
///
/// Structure equivalence is strictly stronger than outcome equivalence;
/// the constructor rejects any combination that violates the hierarchy,
/// and deserialization goes through the same check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VerdictRepr", into = "VerdictRepr")]
pub struct FidelityVerdict {
    run: CIRun,
    outcome_equivalent: bool,
    structure_equivalent: bool,
    mismatch_note: Option<String>,
}

impl FidelityVerdict {
    pub fn new(
        run: CIRun,
        outcome_equivalent: bool,
        structure_equivalent: bool,
        mismatch_note: Option<String>,
    ) -> Result<Self, ModelError> {
        if structure_equivalent && !outcome_equivalent {
            return Err(ModelError::VerdictHierarchy);
        }
        Ok(Self {
            run,
            outcome_equivalent,
            structure_equivalent,
            mismatch_note,
        })
    }

    pub fn run(&self) -> &CIRun {
        &self.run
    }

    pub fn outcome_equivalent(&self) -> bool {
        self.outcome_equivalent
    }

    pub fn structure_equivalent(&self) -> bool {
        self.structure_equivalent
    }

    pub fn mismatch_note(&self) -> Option<&str> {
        self.mismatch_note.as_deref()
    }

    pub fn project(&self) -> &str {
        &self.run.repo.name
    }
}

#[derive(Serialize, Deserialize, Clone)]
struct VerdictRepr {
    run: CIRun,
    outcome_equivalent: bool,
    structure_equivalent: bool,
    mismatch_note: Option<String>,
}

impl TryFrom<VerdictRepr> for FidelityVerdict {
    type Error = ModelError;

    fn try_from(v: VerdictRepr) -> Result<Self, Self::Error> {
        FidelityVerdict::new(
            v.run,
            v.outcome_equivalent,
            v.structure_equivalent,
            v.mismatch_note,
        )
    }
}

impl From<FidelityVerdict> for VerdictRepr {
    fn from(v: FidelityVerdict) -> Self {
        VerdictRepr {
            run: v.run,
            outcome_equivalent: v.outcome_equivalent,
            structure_equivalent: v.structure_equivalent,
            mismatch_note: v.mismatch_note,
        }
    }
}
