//! Two-level fidelity evaluation of original vs. reconstructed builds,
//! stratified sampling, and the aggregate reports.
//!
//! Scoring is binary on both levels: outcome equivalence (same final
//! compilation status) and diagnostic structure equivalence (identical
//! normalized representations, the strictly stronger criterion). No
//! partial credit.

mod report;
mod sampling;

pub use report::{
    aggregate_fidelity, aggregate_reconstruction, percent_integer, percent_one_decimal,
    FidelityReport, ProjectFidelity, ProjectReconstruction, ReconstructionReport,
};
pub use sampling::{largest_remainder, sample_quotas, sample_stratified, SamplingError};

use crate::model::{CIRun, FidelityVerdict, ModelError, NormalizedLog};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FidelityError {
    #[error("logs were normalized under different configurations ({left} vs {right}); comparison refused")]
    ConfigMismatch { left: String, right: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Behavioral fidelity: both executions ended with the same compilation
/// status.
pub fn outcome_equivalence(original: &NormalizedLog, reconstructed: &NormalizedLog) -> bool {
    original.outcome == reconstructed.outcome
}

/// Structural fidelity: the normalized representations are identical —
/// same outcome, same stage sequence, same per-stage event sequences.
///
/// Refuses to compare logs normalized under different configurations.
pub fn structure_equivalence(
    original: &NormalizedLog,
    reconstructed: &NormalizedLog,
) -> Result<bool, FidelityError> {
    if original.normalization_fingerprint != reconstructed.normalization_fingerprint {
        return Err(FidelityError::ConfigMismatch {
            left: original.normalization_fingerprint.clone(),
            right: reconstructed.normalization_fingerprint.clone(),
        });
    }
    Ok(original.outcome == reconstructed.outcome && original.stages == reconstructed.stages)
}

/// Evaluates one original/replay pair along both dimensions and builds
/// the verdict. Structure equivalence implies outcome equivalence by
/// construction, so the verdict hierarchy always holds.
pub fn compare_pair(
    run: &CIRun,
    original: &NormalizedLog,
    reconstructed: &NormalizedLog,
) -> Result<FidelityVerdict, FidelityError> {
    let outcome_eq = outcome_equivalence(original, reconstructed);
    let structure_eq = structure_equivalence(original, reconstructed)?;
    let note = if structure_eq {
        None
    } else {
        Some(first_mismatch(original, reconstructed))
    };
    Ok(FidelityVerdict::new(
        run.clone(),
        outcome_eq,
        structure_eq,
        note,
    )?)
}

/// Human-readable description of the first difference, for triage only;
/// never part of equality semantics.
fn first_mismatch(a: &NormalizedLog, b: &NormalizedLog) -> String {
    if a.outcome != b.outcome {
        return format!("outcome differs: {:?} vs {:?}", a.outcome, b.outcome);
    }
    for (i, (sa, sb)) in a.stages.iter().zip(&b.stages).enumerate() {
        if sa.name != sb.name {
            return format!("stage {i} differs: {:?} vs {:?}", sa.name, sb.name);
        }
        for (j, (ea, eb)) in sa.events.iter().zip(&sb.events).enumerate() {
            if ea != eb {
                return format!(
                    "stage {:?} event {j} differs: {} vs {}",
                    sa.name,
                    ea.summary(),
                    eb.summary()
                );
            }
        }
        if sa.events.len() != sb.events.len() {
            let (longer, side) = if sa.events.len() > sb.events.len() {
                (sa, "original")
            } else {
                (sb, "reconstructed")
            };
            let extra = &longer.events[sa.events.len().min(sb.events.len())];
            return format!(
                "stage {:?} has {} extra event(s) in {side}, first: {}",
                sa.name,
                sa.events.len().abs_diff(sb.events.len()),
                extra.summary()
            );
        }
    }
    if a.stages.len() != b.stages.len() {
        return format!(
            "stage count differs: {} vs {}",
            a.stages.len(),
            b.stages.len()
        );
    }
    "logs are equal".into()
}
