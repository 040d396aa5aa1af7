//! Reconstruction-failure classification.
//!
//! First match over an ordered rule catalog decides the cause; the order
//! (hardware, proprietary toolchain, removed repository, implicit
//! environment, other) is fixed so classifications are reproducible.

use once_cell::sync::Lazy;
use phantomrun_core::model::{FailureCause, FailureKind};
use regex::Regex;

static RULES: Lazy<Vec<(FailureKind, Regex)>> = Lazy::new(|| {
    let rule = |kind, pattern: &str| (kind, Regex::new(pattern).unwrap());
    vec![
        rule(
            FailureKind::HardwareDependencyMissing,
            r"(?i)(no such device|/dev/tty(USB|ACM)\d*|hardware (is )?(not found|missing|required)|(cannot|could not|unable to) (find|open|detect) (the )?(board|device|probe|debugger)|no (device|board|probe) (found|connected|attached)|libusb[^\n]*(error|not found)|st-?link[^\n]*not (found|connected)|jtag[^\n]*not (found|connected))",
        ),
        rule(
            FailureKind::ProprietaryToolchainUnavailable,
            r"(?i)(license (key|file|server|agreement)|EULA|proprietary toolchain|vendor sdk[^\n]*(unavailable|not available|requires|denied|failed)|requires (a )?(license|registration|account)|armcc|arm compiler 5|iar (embedded workbench|toolchain|license)|keil|xtensa[^\n]*license)",
        ),
        rule(
            FailureKind::RemovedPackageRepository,
            r"(?i)(unable to locate package|404 +not found|failed to fetch[^\n]*\b(deb|packages?|release|indices)|does not have a release file|repository[^\n]*(is )?(no longer|not found|removed|gone)|manifest (unknown|not found)|pull access denied|repository does not exist|not found: manifest|no longer (available|hosted|exists))",
        ),
        rule(
            FailureKind::ImplicitEnvironmentDependency,
            r"(?i)(: command not found|: not found$|command not found:|which: no \S+ in|No module named |not recognized as an internal or external command|required (tool|binary|program)[^\n]* (is )?(missing|not installed))",
        ),
    ]
});

/// Classifies why a reconstruction attempt produced no build outcome.
/// Total: unmatched (or empty) logs fall back to `Other` with empty
/// evidence; otherwise evidence is the first matched line.
pub fn classify_reconstruction_failure(attempt_log: &[u8]) -> FailureCause {
    let text = String::from_utf8_lossy(attempt_log);
    for (kind, re) in RULES.iter() {
        for line in text.lines() {
            if re.is_match(line) {
                return FailureCause {
                    kind: *kind,
                    evidence: line.trim().to_string(),
                };
            }
        }
    }
    FailureCause {
        kind: FailureKind::Other,
        evidence: String::new(),
    }
}
