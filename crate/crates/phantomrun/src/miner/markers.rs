//! Compilation-failure marker scan over raw log bytes.

use once_cell::sync::Lazy;
use phantomrun_core::logparse::strip_leading_timestamps;
use regex::Regex;
use serde::{Deserialize, Serialize};

/// The marker catalog: (pattern name, regex). A log is a compilation
/// failure iff at least one marker matches.
static MARKERS: Lazy<Vec<(&'static str, Regex)>> = Lazy::new(|| {
    [
        ("fatal_error", r"fatal error"),
        ("undefined_reference", r"undefined reference"),
        ("gcc_error", r"^[^:\s]+:\d+(:\d+)?: error:"),
        ("linker_error", r"^collect2(\.exe)?: error"),
        ("make_error", r"^make(\[\d+\])?: \*\*\*"),
        ("cmake_error", r"^CMake Error"),
        ("ninja_error", r"^ninja: (error|build stopped)"),
        ("configure_error", r"^configure: error:"),
        ("scons_error", r"^scons: \*\*\*"),
        ("traceback", r"^Traceback \(most recent call last\)"),
    ]
    .into_iter()
    .map(|(name, pattern)| (name, Regex::new(pattern).unwrap()))
    .collect()
});

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerHit {
    pub pattern_name: String,
    /// 1-based line number of the hit.
    pub line_no: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerScan {
    pub is_compilation_failure: bool,
    pub matches: Vec<MarkerHit>,
}

/// Scans raw bytes (lossily decoded) for compilation-specific
/// diagnostics. Deterministic and pure: identical bytes, identical result.
pub fn scan_compilation_markers(raw_log: &[u8]) -> MarkerScan {
    let text = String::from_utf8_lossy(raw_log);
    let mut matches = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        // CI runners timestamp every line; anchored patterns match the content
        let line = strip_leading_timestamps(line);
        for (name, re) in MARKERS.iter() {
            if re.is_match(line) {
                matches.push(MarkerHit {
                    pattern_name: name.to_string(),
                    line_no: line_no + 1,
                });
            }
        }
    }
    MarkerScan {
        is_compilation_failure: !matches.is_empty(),
        matches,
    }
}
