//! Aggregate reports: reconstruction success per project, failure-cause
//! histogram, and per-project fidelity rates.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{FailureKind, FidelityVerdict, ReconstructionRecord};

/// Rounds `num/den` to one decimal, half-up, and trims a trailing `.0`
/// (the rendering style of the published tables: `95.2` but `100`).
pub fn percent_one_decimal(num: u64, den: u64) -> String {
    if den == 0 {
        return "0".into();
    }
    let tenths = (2 * (num as u128) * 1000 + den as u128) / (2 * den as u128);
    if tenths.is_multiple_of(10) {
        format!("{}", tenths / 10)
    } else {
        format!("{}.{}", tenths / 10, tenths % 10)
    }
}

/// Rounds `num/den` to a whole percent, half-up (cause-histogram style).
pub fn percent_integer(num: u64, den: u64) -> String {
    if den == 0 {
        return "0".into();
    }
    let pct = (2 * (num as u128) * 100 + den as u128) / (2 * den as u128);
    format!("{pct}")
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectReconstruction {
    pub attempts: u64,
    pub reconstructed: u64,
}

/// Per-project and overall reconstruction success, plus the failure-cause
/// histogram over unreconstructed attempts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub per_project: BTreeMap<String, ProjectReconstruction>,
    pub overall: ProjectReconstruction,
    pub cause_histogram: BTreeMap<FailureKind, u64>,
}

pub fn aggregate_reconstruction(records: &[ReconstructionRecord]) -> ReconstructionReport {
    let mut report = ReconstructionReport::default();
    for rec in records {
        let entry = report
            .per_project
            .entry(rec.project().to_string())
            .or_default();
        entry.attempts += 1;
        report.overall.attempts += 1;
        if rec.is_reconstructed() {
            entry.reconstructed += 1;
            report.overall.reconstructed += 1;
        } else if let Some(cause) = rec.cause() {
            *report.cause_histogram.entry(cause.kind).or_insert(0) += 1;
        }
    }
    report
}

impl ReconstructionReport {
    pub fn failed(&self) -> u64 {
        self.overall.attempts - self.overall.reconstructed
    }

    /// Plain-text table: reconstruction success per project plus the
    /// failure-cause histogram.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let width = self
            .per_project
            .keys()
            .map(|k| k.len())
            .chain(["Project".len(), "Total".len()])
            .max()
            .unwrap_or(7);
        writeln!(
            out,
            "{:<width$}  {:>8}  {:>13} {:>8}",
            "Project", "Attempts", "Reconstructed", "(%)"
        )
        .unwrap();
        for (project, c) in &self.per_project {
            writeln!(
                out,
                "{project:<width$}  {:>8}  {:>13} {:>7}%",
                c.attempts,
                c.reconstructed,
                percent_one_decimal(c.reconstructed, c.attempts),
            )
            .unwrap();
        }
        writeln!(
            out,
            "{:<width$}  {:>8}  {:>13} {:>7}%",
            "Total",
            self.overall.attempts,
            self.overall.reconstructed,
            percent_one_decimal(self.overall.reconstructed, self.overall.attempts),
        )
        .unwrap();

        if !self.cause_histogram.is_empty() {
            let failed = self.failed();
            writeln!(out).unwrap();
            writeln!(
                out,
                "{:<34}  {:>5}  {:>10}",
                "Failure Cause", "Count", "Percentage"
            )
            .unwrap();
            for (kind, count) in &self.cause_histogram {
                writeln!(
                    out,
                    "{:<34}  {:>5}  {:>9}%",
                    kind.display_name(),
                    count,
                    percent_integer(*count, failed),
                )
                .unwrap();
            }
            writeln!(
                out,
                "{:<34}  {:>5}  {:>9}%",
                "Total",
                failed,
                percent_integer(failed, failed)
            )
            .unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectFidelity {
    pub n: u64,
    pub outcome_pass: u64,
    pub structure_pass: u64,
}

/// Per-project and overall pass counts for both fidelity criteria.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub per_project: BTreeMap<String, ProjectFidelity>,
    pub overall: ProjectFidelity,
}

pub fn aggregate_fidelity(verdicts: &[FidelityVerdict]) -> FidelityReport {
    let mut report = FidelityReport::default();
    for v in verdicts {
        let entry = report
            .per_project
            .entry(v.project().to_string())
            .or_default();
        for c in [entry, &mut report.overall] {
            c.n += 1;
            if v.outcome_equivalent() {
                c.outcome_pass += 1;
            }
            if v.structure_equivalent() {
                c.structure_pass += 1;
            }
        }
    }
    report
}

impl FidelityReport {
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let width = self
            .per_project
            .keys()
            .map(|k| k.len() + 8)
            .chain(["Project".len(), "Overall (n=00)".len()])
            .max()
            .unwrap_or(7);
        writeln!(
            out,
            "{:<width$}  {:>16}  {:>16}",
            "Project", "Outcome", "Structure"
        )
        .unwrap();
        for (project, c) in &self.per_project {
            writeln!(
                out,
                "{:<width$}  {:>16}  {:>16}",
                format!("{project} (n={})", c.n),
                render_ratio(c.outcome_pass, c.n),
                render_ratio(c.structure_pass, c.n),
            )
            .unwrap();
        }
        let o = &self.overall;
        writeln!(
            out,
            "{:<width$}  {:>16}  {:>16}",
            format!("Overall (n={})", o.n),
            render_ratio(o.outcome_pass, o.n),
            render_ratio(o.structure_pass, o.n),
        )
        .unwrap();
        out
    }
}

fn render_ratio(pass: u64, n: u64) -> String {
    format!("{pass}/{n} ({}%)", percent_one_decimal(pass, n))
}
