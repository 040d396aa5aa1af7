//! Stage segmentation.

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::StageProfile;

pub(crate) const PREAMBLE: &str = "preamble";

/// A contiguous slice of log lines belonging to one stage.
/// Line indices are 0-based; `end_line` is exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageBounds {
    pub name: String,
    pub start_line: usize,
    pub end_line: usize,
}

impl StageBounds {
    pub fn contains_line(&self, idx: usize) -> bool {
        idx >= self.start_line && idx < self.end_line
    }

    pub fn len(&self) -> usize {
        self.end_line - self.start_line
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Partitions the log's lines into stages.
///
/// Markers are located in profile order, each strictly after the previous
/// match; a stage runs from its marker line to the next stage's marker.
/// Lines before the first marker form a synthetic `preamble` stage, which
/// is also the sole stage when no marker matches.
pub fn segment_stages(raw_log: &str, profile: &StageProfile) -> Vec<StageBounds> {
    let lines: Vec<&str> = raw_log.lines().collect();

    let mut opens: Vec<(String, usize)> = Vec::new();
    let mut pos = 0usize;
    for marker in &profile.stage_markers {
        let Ok(re) = Regex::new(&marker.start_pattern) else {
            continue;
        };
        if let Some(hit) = (pos..lines.len()).find(|&i| re.is_match(lines[i])) {
            opens.push((marker.stage_name.clone(), hit));
            pos = hit + 1;
        }
    }

    let mut stages = Vec::with_capacity(opens.len() + 1);
    let first_open = opens.first().map(|&(_, i)| i).unwrap_or(lines.len());
    if first_open > 0 || opens.is_empty() {
        stages.push(StageBounds {
            name: PREAMBLE.into(),
            start_line: 0,
            end_line: first_open,
        });
    }
    for (k, (name, start)) in opens.iter().enumerate() {
        let end = opens.get(k + 1).map(|&(_, s)| s).unwrap_or(lines.len());
        stages.push(StageBounds {
            name: name.clone(),
            start_line: *start,
            end_line: end,
        });
    }
    stages
}
