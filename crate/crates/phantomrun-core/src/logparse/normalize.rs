//! Normalization: from raw log text to the canonical comparison unit.

use once_cell::sync::Lazy;
use regex::Regex;

use super::catalog::PatternCatalog;
use super::diagnostics::parse_diagnostics;
use super::stages::{segment_stages, PREAMBLE};
use super::{
    normalization_fingerprint, NormalizationConfig, ProjectFamily, StageMarker, StageProfile,
};
use crate::model::{BuildOutcome, DiagnosticEvent, LogSource, NormalizedLog, Stage};

/// Line-leading timestamp forms: ISO-8601, syslog, bracketed epoch or
/// wall-clock. Anything else is message content.
static TIMESTAMP: Lazy<Regex> = Lazy::new(|| {
    Regex::new(
        r"(?x)^\s*(?:
            \d{4}-\d{2}-\d{2}[T\ ]\d{2}:\d{2}:\d{2}(?:[.,]\d+)?(?:Z|[+-]\d{2}:?\d{2})?
          | [A-Z][a-z]{2}\s+\d{1,2}\ \d{2}:\d{2}:\d{2}
          | \[\d{9,13}(?:\.\d+)?\]
          | \[\d{2}:\d{2}:\d{2}(?:[.,]\d{1,6})?\]
        )\s*",
    )
    .unwrap()
});

/// Strips up to a few stacked line-leading timestamps, returning the
/// rest of the line.
pub fn strip_leading_timestamps(line: &str) -> &str {
    let mut rest = line;
    for _ in 0..3 {
        match TIMESTAMP.find(rest) {
            Some(m) if m.end() > 0 => rest = &rest[m.end()..],
            _ => break,
        }
    }
    rest
}

/// Removes `prefix` (and one following `/`) from `text` wherever it is
/// followed by a path or token boundary.
fn strip_prefix_occurrences(text: &str, prefix: &str) -> String {
    if prefix.is_empty() || !text.contains(prefix) {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find(prefix) {
        let after = &rest[pos + prefix.len()..];
        let boundary = after
            .chars()
            .next()
            .map(|c| {
                matches!(
                    c,
                    '/' | ':' | ' ' | '\t' | '"' | '\'' | ',' | ')' | ']' | ';'
                )
            })
            .unwrap_or(true);
        out.push_str(&rest[..pos]);
        if boundary {
            rest = after.strip_prefix('/').unwrap_or(after);
        } else {
            out.push_str(prefix);
            rest = after;
        }
    }
    out.push_str(rest);
    out
}

fn strip_prefixes(text: &str, prefixes: &[String]) -> String {
    let mut s = text.to_string();
    for p in prefixes {
        s = strip_prefix_occurrences(&s, p);
    }
    s
}

/// Sort key for canonical reordering of located events. The primary keys
/// (file, line, column, category) lead; severity, tool and message break
/// remaining ties so the order is total and reproducible.
fn sort_key(
    e: &DiagnosticEvent,
) -> (
    String,
    u32,
    u32,
    crate::model::Category,
    crate::model::Severity,
    crate::model::Tool,
    String,
) {
    let loc = e
        .location
        .as_ref()
        .expect("sort_key is only called on located events");
    (
        loc.file.clone(),
        loc.line.unwrap_or(0),
        loc.column.unwrap_or(0),
        e.category,
        e.severity,
        e.tool,
        e.message.clone(),
    )
}

/// Sorts located events into canonical order while leaving unlocated
/// events in their original slots.
fn canonical_reorder(events: &mut [DiagnosticEvent]) {
    let slots: Vec<usize> = events
        .iter()
        .enumerate()
        .filter(|(_, e)| e.location.is_some())
        .map(|(i, _)| i)
        .collect();
    let mut located: Vec<DiagnosticEvent> = slots.iter().map(|&i| events[i].clone()).collect();
    located.sort_by_key(sort_key);
    for (slot, ev) in slots.into_iter().zip(located) {
        events[slot] = ev;
    }
}

/// Normalizes a raw log into the canonical comparison unit.
///
/// Composes timestamp stripping, stage segmentation and diagnostic
/// extraction, then strips configured path prefixes from files and
/// messages, drops configured severities, canonically reorders located
/// events within each stage, and clears source-log spans. The result
/// depends only on diagnostic content.
///
/// When `outcome` is `None` it is derived from the surviving events:
/// failure iff any error or fatal-error event remains.
pub fn normalize(
    raw_log: &str,
    outcome: Option<BuildOutcome>,
    source: LogSource,
    cfg: &NormalizationConfig,
    profile: &StageProfile,
    catalog: &PatternCatalog,
) -> NormalizedLog {
    let working: String = if cfg.strip_timestamps {
        let lines: Vec<&str> = raw_log.lines().map(strip_leading_timestamps).collect();
        lines.join("\n")
    } else {
        raw_log.to_string()
    };

    let bounds = segment_stages(&working, profile);
    let mut events = parse_diagnostics(&working, profile, catalog);

    for ev in &mut events {
        if let Some(loc) = &mut ev.location {
            loc.file = strip_prefixes(&loc.file, &cfg.path_prefixes_to_strip);
        }
        ev.message = strip_prefixes(&ev.message, &cfg.path_prefixes_to_strip);
    }
    events.retain(|e| !cfg.drop_severities.contains(&e.severity));

    let mut stages: Vec<Stage> = bounds
        .iter()
        .map(|b| Stage {
            name: b.name.clone(),
            events: Vec::new(),
        })
        .collect();
    for ev in events {
        let line0 = ev
            .raw_span
            .map(|s| s.start_line.saturating_sub(1))
            .unwrap_or(0);
        let idx = bounds
            .iter()
            .position(|b| b.contains_line(line0))
            .unwrap_or(bounds.len().saturating_sub(1));
        stages[idx].events.push(ev);
    }

    if cfg.canonical_reorder {
        for st in &mut stages {
            canonical_reorder(&mut st.events);
        }
    }
    for st in &mut stages {
        for ev in &mut st.events {
            ev.raw_span = None;
        }
    }

    // An event-less preamble is auxiliary output; keep it only when it is
    // the whole log.
    if stages.len() > 1 {
        if let Some(p) = stages.iter().position(|s| s.name == PREAMBLE) {
            if stages[p].events.is_empty() {
                stages.remove(p);
            }
        }
    }

    let derived = {
        let failed = stages
            .iter()
            .flat_map(|s| &s.events)
            .any(|e| e.severity.is_error());
        if failed {
            BuildOutcome::Failure
        } else {
            BuildOutcome::Success
        }
    };

    NormalizedLog {
        outcome: outcome.unwrap_or(derived),
        stages,
        source,
        normalization_fingerprint: normalization_fingerprint(cfg, profile.family, catalog),
    }
}

/// Renders a normalized log back to plain text: a banner line per named
/// stage, one canonical line per event. Re-normalizing the rendered text
/// with [`render_profile`] and the same config yields an equal log.
pub fn render_normalized(log: &NormalizedLog) -> String {
    let mut out = String::new();
    for stage in &log.stages {
        if stage.name != PREAMBLE {
            out.push_str(&format!("=== {} ===\n", stage.name));
        }
        for ev in &stage.events {
            out.push_str(&render_event(ev));
            out.push('\n');
        }
    }
    out
}

fn render_event(ev: &DiagnosticEvent) -> String {
    match &ev.location {
        Some(loc) if loc.line.is_some() => {
            let mut head = format!("{}:{}", loc.file, loc.line.unwrap());
            if let Some(col) = loc.column {
                head.push_str(&format!(":{col}"));
            }
            format!("{head}: {}: {}", ev.severity.label(), ev.message)
        }
        _ => ev.message.clone(),
    }
}

/// Stage profile matching [`render_normalized`]'s banners, carrying the
/// original family so the normalization fingerprint is preserved.
pub fn render_profile(log: &NormalizedLog, family: ProjectFamily) -> StageProfile {
    StageProfile {
        family,
        stage_markers: log
            .stages
            .iter()
            .filter(|s| s.name != PREAMBLE)
            .map(|s| StageMarker {
                stage_name: s.name.clone(),
                start_pattern: format!("^=== {} ===$", regex::escape(&s.name)),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Category, Severity};

    fn builtin() -> (&'static PatternCatalog, StageProfile, NormalizationConfig) {
        (
            PatternCatalog::builtin(),
            StageProfile::builtin(ProjectFamily::Generic),
            NormalizationConfig::default(),
        )
    }

    #[test]
    fn prefix_stripping_rewrites_files_and_messages() {
        let (catalog, profile, mut cfg) = builtin();
        cfg.path_prefixes_to_strip = vec!["/home/runner/work/zephyr/zephyr".into()];
        let log = "/home/runner/work/zephyr/zephyr/src/main.c:42:17: error: 'foo' undeclared\n";
        let n = normalize(log, None, LogSource::OriginalCi, &cfg, &profile, catalog);
        let ev = &n.stages[0].events[0];
        assert_eq!(ev.location.as_ref().unwrap().file, "src/main.c");
    }

    #[test]
    fn timestamps_are_removed_before_parsing() {
        let (catalog, profile, cfg) = builtin();
        let log = "2025-10-03T12:00:01Z src/a.c:1:2: error: boom\n";
        let n = normalize(log, None, LogSource::OriginalCi, &cfg, &profile, catalog);
        assert_eq!(n.stages[0].events.len(), 1);
        assert_eq!(
            n.stages[0].events[0].location.as_ref().unwrap().file,
            "src/a.c"
        );
        assert_eq!(n.outcome, BuildOutcome::Failure);
    }

    #[test]
    fn timestamp_only_lines_yield_no_events() {
        let (catalog, profile, cfg) = builtin();
        let log = "2025-10-03T12:00:01Z\n[12:00:02] \nOct  3 12:00:03\n";
        let n = normalize(log, None, LogSource::OriginalCi, &cfg, &profile, catalog);
        assert_eq!(n.event_count(), 0);
        assert_eq!(n.outcome, BuildOutcome::Success);
    }

    #[test]
    fn notes_are_dropped_by_default() {
        let (catalog, profile, cfg) = builtin();
        let log = "src/a.c:1:2: note: declared here\nsrc/a.c:3:4: warning: unused\n";
        let n = normalize(log, None, LogSource::OriginalCi, &cfg, &profile, catalog);
        assert_eq!(n.event_count(), 1);
        assert_eq!(n.stages[0].events[0].severity, Severity::Warning);
        assert_eq!(n.outcome, BuildOutcome::Success);
    }

    #[test]
    fn swapping_located_diagnostics_is_invisible() {
        let (catalog, profile, cfg) = builtin();
        let a = "src/b.c:7:1: error: second\nsrc/a.c:42:17: error: 'foo' undeclared\n";
        let b = "src/a.c:42:17: error: 'foo' undeclared\nsrc/b.c:7:1: error: second\n";
        let na = normalize(a, None, LogSource::OriginalCi, &cfg, &profile, catalog);
        let nb = normalize(b, None, LogSource::OriginalCi, &cfg, &profile, catalog);
        assert_eq!(na, nb);
    }

    #[test]
    fn unlocated_events_keep_their_slots() {
        let (catalog, profile, cfg) = builtin();
        let log = "\
make[1]: *** [zig] Error 1
src/b.c:7:1: error: second
src/a.c:1:1: error: first
";
        let n = normalize(log, None, LogSource::OriginalCi, &cfg, &profile, catalog);
        let stage = n.stages.iter().find(|s| !s.events.is_empty()).unwrap();
        assert_eq!(stage.events[0].category, Category::MakeRuleFailure);
        assert_eq!(stage.events[1].location.as_ref().unwrap().file, "src/a.c");
        assert_eq!(stage.events[2].location.as_ref().unwrap().file, "src/b.c");
    }

    #[test]
    fn empty_log_is_one_empty_preamble_and_success() {
        let (catalog, profile, cfg) = builtin();
        let n = normalize("", None, LogSource::OriginalCi, &cfg, &profile, catalog);
        assert_eq!(n.stages.len(), 1);
        assert_eq!(n.stages[0].name, "preamble");
        assert!(n.stages[0].events.is_empty());
        assert_eq!(n.outcome, BuildOutcome::Success);
    }

    #[test]
    fn eventless_preamble_is_dropped_when_stages_exist() {
        let (catalog, profile, cfg) = builtin();
        let log = "banner text\nchecking for gcc... yes\nsrc/a.c:1:1: error: x\n";
        let n = normalize(log, None, LogSource::OriginalCi, &cfg, &profile, catalog);
        let names: Vec<&str> = n.stages.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["configure"]);
    }

    #[test]
    fn render_and_reparse_is_identity() {
        let (catalog, profile, cfg) = builtin();
        let log = "\
noise line with an error inside? no.
checking for gcc... yes
configure: error: C compiler cannot create executables
make all
src/a.c:1:2: error: 'x' undeclared
   1 | x
     | ^
make[2]: *** [package] Error 2
";
        let n = normalize(log, None, LogSource::OriginalCi, &cfg, &profile, catalog);
        let rendered = render_normalized(&n);
        let rp = render_profile(&n, profile.family);
        let n2 = normalize(&rendered, Some(n.outcome), n.source, &cfg, &rp, catalog);
        assert_eq!(n, n2);
    }

    #[test]
    fn provided_outcome_wins_over_derived() {
        let (catalog, profile, cfg) = builtin();
        let n = normalize(
            "clean log\n",
            Some(BuildOutcome::Failure),
            LogSource::OriginalCi,
            &cfg,
            &profile,
            catalog,
        );
        assert_eq!(n.outcome, BuildOutcome::Failure);
        assert_eq!(n.derived_outcome(), BuildOutcome::Success);
    }
}
