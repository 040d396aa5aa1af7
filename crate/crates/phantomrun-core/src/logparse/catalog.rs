//! The diagnostic pattern catalog: data, not code.
//!
//! Rules live in a TOML file (the builtin one ships with the crate) so new
//! error shapes can be added per project family without recompiling.

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{hex_digest, LogParseError, ProjectFamily};
use crate::model::{Category, Severity, Tool};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultilineMode {
    /// Single-line diagnostic.
    #[default]
    None,
    /// Absorb compiler source-context and caret lines.
    Caret,
    /// Absorb an indented block (CMake message bodies).
    Indent,
    /// Absorb interpreter stack frames up to the exception line, which
    /// becomes the event message.
    Traceback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageMode {
    /// The whole matched line is the message.
    #[default]
    Line,
    /// The named `msg` capture group is the message.
    Capture,
}

/// One catalog entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternRule {
    pub name: String,
    pub tool: Tool,
    pub severity: Severity,
    pub category: Category,
    pub pattern: String,
    #[serde(default)]
    pub multiline: MultilineMode,
    #[serde(default)]
    pub message: MessageMode,
    /// Families this rule applies to; empty means all.
    #[serde(default)]
    pub families: Vec<ProjectFamily>,
}

impl PatternRule {
    pub fn applies_to(&self, family: ProjectFamily) -> bool {
        self.families.is_empty() || self.families.contains(&family)
    }
}

#[derive(Debug)]
pub(crate) struct CompiledRule {
    pub def: PatternRule,
    pub regex: Regex,
}

/// An ordered, compiled set of pattern rules.
#[derive(Debug)]
pub struct PatternCatalog {
    version: u32,
    rules: Vec<CompiledRule>,
    digest: String,
}

#[derive(Deserialize)]
struct CatalogFile {
    version: u32,
    rules: Vec<PatternRule>,
}

impl PatternCatalog {
    /// The catalog shipped with the crate.
    pub fn builtin() -> &'static PatternCatalog {
        static CATALOG: once_cell::sync::Lazy<PatternCatalog> = once_cell::sync::Lazy::new(|| {
            PatternCatalog::from_toml_str(include_str!(concat!(
                env!("CARGO_MANIFEST_DIR"),
                "/config/patterns.toml"
            )))
            .expect("builtin pattern catalog parses")
        });
        &CATALOG
    }

    pub fn from_toml_str(text: &str) -> Result<PatternCatalog, LogParseError> {
        let file: CatalogFile =
            toml::from_str(text).map_err(|e| LogParseError::Malformed(e.to_string()))?;
        PatternCatalog::from_rules(file.version, file.rules)
    }

    pub fn from_rules(
        version: u32,
        rules: Vec<PatternRule>,
    ) -> Result<PatternCatalog, LogParseError> {
        let mut hasher = Sha256::new();
        hasher.update(
            serde_json::to_string(&rules)
                .expect("rules serialize")
                .as_bytes(),
        );
        hasher.update(version.to_le_bytes());
        let digest = hex_digest(hasher);

        let compiled = rules
            .into_iter()
            .map(|def| {
                let regex =
                    Regex::new(&def.pattern).map_err(|e| LogParseError::InvalidPattern {
                        name: def.name.clone(),
                        message: e.to_string(),
                    })?;
                if def.message == MessageMode::Capture
                    && !regex.capture_names().any(|n| n == Some("msg"))
                {
                    return Err(LogParseError::InvalidPattern {
                        name: def.name.clone(),
                        message: "message = \"capture\" requires a `msg` capture group".into(),
                    });
                }
                Ok(CompiledRule { def, regex })
            })
            .collect::<Result<Vec<_>, _>>()?;

        Ok(PatternCatalog {
            version,
            rules: compiled,
            digest,
        })
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    /// Content digest over the rule definitions; feeds the normalization
    /// fingerprint.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn rule_defs(&self) -> impl Iterator<Item = &PatternRule> {
        self.rules.iter().map(|r| &r.def)
    }

    pub(crate) fn rules_for(&self, family: ProjectFamily) -> Vec<&CompiledRule> {
        self.rules
            .iter()
            .filter(|r| r.def.applies_to(family))
            .collect()
    }
}
