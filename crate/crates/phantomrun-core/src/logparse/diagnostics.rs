//! Rule-driven diagnostic extraction.

use once_cell::sync::Lazy;
use regex::Regex;

use super::catalog::{CompiledRule, MessageMode, MultilineMode, PatternCatalog};
use super::StageProfile;
use crate::model::{DiagnosticEvent, Location, RawSpan};

/// Compiler source-context and caret lines absorbed by `multiline = caret`.
static CARET_CONTINUATION: Lazy<Vec<Regex>> = Lazy::new(|| {
    [
        r"^\s*\d+\s*\|",      // "  42 | code"
        r"^\s*\|",            // "     | ^~~~"
        r"^\s*[\^~][\^~ ]*$", // bare caret line, possibly unindented
    ]
    .iter()
    .map(|p| Regex::new(p).unwrap())
    .collect()
});

/// Terminal line of an interpreter traceback.
static EXCEPTION_LINE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^[A-Za-z_][A-Za-z0-9_.]+(?:Error|Exception)(?:: .*)?$").unwrap());

/// Extracts one event per recognized diagnostic, in line order.
///
/// Multi-line diagnostics collapse into one event whose `raw_span` covers
/// the absorbed lines (1-based, inclusive). Unrecognized lines produce no
/// event; garbage in, empty list out.
pub fn parse_diagnostics(
    raw_log: &str,
    profile: &StageProfile,
    catalog: &PatternCatalog,
) -> Vec<DiagnosticEvent> {
    let lines: Vec<&str> = raw_log.lines().collect();
    let rules = catalog.rules_for(profile.family);

    let mut events = Vec::new();
    let mut i = 0usize;
    while i < lines.len() {
        let line = lines[i].trim_end();
        if line.is_empty() {
            i += 1;
            continue;
        }
        let mut next = i + 1;
        for rule in &rules {
            if let Some(caps) = rule.regex.captures(line) {
                let (end, message) = absorb(rule, &lines, i, line, &caps);
                let location = location_from(&caps);
                events.push(DiagnosticEvent {
                    tool: rule.def.tool,
                    severity: rule.def.severity,
                    location,
                    message,
                    category: rule.def.category,
                    raw_span: Some(RawSpan {
                        start_line: i + 1,
                        end_line: end + 1,
                    }),
                });
                next = end + 1;
                break;
            }
        }
        i = next;
    }
    events
}

fn location_from(caps: &regex::Captures<'_>) -> Option<Location> {
    let file = caps.name("file")?.as_str().to_string();
    let line = caps
        .name("line")
        .and_then(|m| m.as_str().parse::<u32>().ok());
    let column = caps
        .name("col")
        .and_then(|m| m.as_str().parse::<u32>().ok());
    Some(Location {
        file,
        line,
        column: if line.is_some() { column } else { None },
    })
}

/// Returns (0-based index of the event's last line, message).
fn absorb(
    rule: &CompiledRule,
    lines: &[&str],
    head: usize,
    head_line: &str,
    caps: &regex::Captures<'_>,
) -> (usize, String) {
    let base_message = match rule.def.message {
        MessageMode::Line => head_line.to_string(),
        MessageMode::Capture => caps
            .name("msg")
            .map(|m| m.as_str().trim_end().to_string())
            .unwrap_or_else(|| head_line.to_string()),
    };
    match rule.def.multiline {
        MultilineMode::None => (head, base_message),
        MultilineMode::Caret => {
            let mut end = head;
            while end + 1 < lines.len()
                && CARET_CONTINUATION
                    .iter()
                    .any(|re| re.is_match(lines[end + 1]))
            {
                end += 1;
            }
            (end, base_message)
        }
        MultilineMode::Indent => {
            let mut end = head;
            while end + 1 < lines.len() {
                let l = lines[end + 1];
                if l.starts_with(' ') || l.starts_with('\t') {
                    end += 1;
                } else if l.trim().is_empty()
                    && end + 2 < lines.len()
                    && (lines[end + 2].starts_with(' ') || lines[end + 2].starts_with('\t'))
                {
                    // blank line inside an indented block
                    end += 1;
                } else {
                    break;
                }
            }
            (end, base_message)
        }
        MultilineMode::Traceback => {
            let mut end = head;
            while end + 1 < lines.len() {
                let l = lines[end + 1];
                if l.starts_with(' ') || l.starts_with('\t') || l.starts_with("Traceback") {
                    end += 1;
                } else if EXCEPTION_LINE.is_match(l.trim_end()) {
                    end += 1;
                    return (end, l.trim_end().to_string());
                } else {
                    break;
                }
            }
            (end, base_message)
        }
    }
}
