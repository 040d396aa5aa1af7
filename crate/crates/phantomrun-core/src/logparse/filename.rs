//! Log filename schema parsing.
//!
//! Raw datasets encode run metadata in filenames using four
//! project-specific schemes; schemes are tried in a fixed order so the
//! more specific ones win.

use once_cell::sync::Lazy;
use regex::Regex;

use crate::model::LogMetadata;

static PR_TARGET: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^pr-(?P<id>\d+)__(?P<target>.+)\.log$").unwrap());
static PROJ_MR_SHA: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"^proj(?P<proj>\d+)_mr(?P<mr>\d+)_sha(?P<sha>[0-9a-f]{7,40})\.log$").unwrap()
});
static FIRMWARE_HW: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^.+_Firmware\((?P<hw>[^()]+)\)\.log$").unwrap());
static PR_PLAIN: Lazy<Regex> = Lazy::new(|| Regex::new(r"^pr-(?P<id>\d+)\.log$").unwrap());

/// Matches the filename against the known schemes, in order
/// `pr_target`, `proj_mr_sha`, `firmware_hw`, `pr_plain`. Total: names
/// matching nothing yield [`LogMetadata::Unknown`].
pub fn parse_filename_metadata(filename: &str) -> LogMetadata {
    if let Some(c) = PR_TARGET.captures(filename) {
        return LogMetadata::PrTarget {
            integration_id: c["id"].to_string(),
            target: c["target"].to_string(),
        };
    }
    if let Some(c) = PROJ_MR_SHA.captures(filename) {
        return LogMetadata::ProjMrSha {
            project_id: c["proj"].to_string(),
            integration_id: c["mr"].to_string(),
            commit_sha: c["sha"].to_string(),
        };
    }
    if let Some(c) = FIRMWARE_HW.captures(filename) {
        return LogMetadata::FirmwareHw {
            hardware: c["hw"].to_string(),
        };
    }
    if let Some(c) = PR_PLAIN.captures(filename) {
        return LogMetadata::PrPlain {
            integration_id: c["id"].to_string(),
        };
    }
    LogMetadata::Unknown
}

/// Renders metadata back to a schema filename. `Unknown` has no filename.
///
/// The firmware scheme's free-form stem is not part of the metadata, so a
/// canonical `build` stem is used; reparsing still yields equal metadata.
pub fn render_filename(meta: &LogMetadata) -> Option<String> {
    match meta {
        LogMetadata::PrPlain { integration_id } => Some(format!("pr-{integration_id}.log")),
        LogMetadata::PrTarget {
            integration_id,
            target,
        } => Some(format!("pr-{integration_id}__{target}.log")),
        LogMetadata::ProjMrSha {
            project_id,
            integration_id,
            commit_sha,
        } => Some(format!(
            "proj{project_id}_mr{integration_id}_sha{commit_sha}.log"
        )),
        LogMetadata::FirmwareHw { hardware } => Some(format!("build_Firmware({hardware}).log")),
        LogMetadata::Unknown => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pr_plain() {
        assert_eq!(
            parse_filename_metadata("pr-1234.log"),
            LogMetadata::PrPlain {
                integration_id: "1234".into()
            }
        );
    }

    #[test]
    fn pr_target() {
        assert_eq!(
            parse_filename_metadata("pr-88__stm32f4.log"),
            LogMetadata::PrTarget {
                integration_id: "88".into(),
                target: "stm32f4".into()
            }
        );
    }

    #[test]
    fn proj_mr_sha() {
        assert_eq!(
            parse_filename_metadata("proj42_mr17_sha0abc123.log"),
            LogMetadata::ProjMrSha {
                project_id: "42".into(),
                integration_id: "17".into(),
                commit_sha: "0abc123".into(),
            }
        );
    }

    #[test]
    fn firmware_hw() {
        assert_eq!(
            parse_filename_metadata("openipc_Firmware(hi3516ev200).log"),
            LogMetadata::FirmwareHw {
                hardware: "hi3516ev200".into()
            }
        );
    }

    #[test]
    fn unknown_fallback() {
        for name in [
            "notes.txt",
            "pr-.log",
            "pr-12",
            "proj_mr1_shaabc.log",
            "projX_mr1_sha0abc123.log",
            "build_Firmware.log",
            "pr-1__x.txt",
            "proj1_mr2_shaUPPER00.log",
        ] {
            assert_eq!(
                parse_filename_metadata(name),
                LogMetadata::Unknown,
                "{name}"
            );
        }
    }

    #[test]
    fn target_scheme_wins_over_plain() {
        // a target containing digits must not collapse into pr_plain
        let meta = parse_filename_metadata("pr-7__a__b.log");
        assert_eq!(
            meta,
            LogMetadata::PrTarget {
                integration_id: "7".into(),
                target: "a__b".into()
            }
        );
    }

    #[test]
    fn round_trip_known_schemes() {
        let metas = [
            LogMetadata::PrPlain {
                integration_id: "9".into(),
            },
            LogMetadata::PrTarget {
                integration_id: "88".into(),
                target: "native_posix".into(),
            },
            LogMetadata::ProjMrSha {
                project_id: "42".into(),
                integration_id: "17".into(),
                commit_sha: "0abc123".into(),
            },
            LogMetadata::FirmwareHw {
                hardware: "esp32".into(),
            },
        ];
        for meta in metas {
            let name = render_filename(&meta).unwrap();
            assert_eq!(parse_filename_metadata(&name), meta, "{name}");
        }
        assert_eq!(render_filename(&LogMetadata::Unknown), None);
    }
}
