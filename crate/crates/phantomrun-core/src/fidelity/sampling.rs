//! Stratified proportional sampling with largest-remainder apportionment.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::ReconstructionRecord;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SamplingError {
    #[error("sample size {total} exceeds the {population} reconstructed records")]
    TotalExceedsPopulation { total: u64, population: u64 },
    #[error("stratum {stratum:?} has {size} records, smaller than its quota {quota}")]
    QuotaInfeasible {
        stratum: String,
        size: u64,
        quota: u64,
    },
    #[error("no strata to sample from")]
    Empty,
}

/// Plain largest-remainder (Hamilton) apportionment of `total` over
/// `sizes`, exact in integer arithmetic. Quotas sum to `total` and each
/// differs from its exact proportional share by less than one.
///
/// Ties on remainders break toward the larger stratum, then the earlier
/// index, so the result is deterministic.
pub fn largest_remainder(sizes: &[u64], total: u64) -> Vec<u64> {
    let sum: u128 = sizes.iter().map(|&s| s as u128).sum();
    if sum == 0 || sizes.is_empty() {
        return vec![0; sizes.len()];
    }
    let mut quotas: Vec<u64> = Vec::with_capacity(sizes.len());
    let mut remainders: Vec<(u128, usize)> = Vec::with_capacity(sizes.len());
    for (i, &s) in sizes.iter().enumerate() {
        let num = s as u128 * total as u128;
        quotas.push((num / sum) as u64);
        remainders.push((num % sum, i));
    }
    let assigned: u64 = quotas.iter().sum();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        remainders[b]
            .0
            .cmp(&remainders[a].0)
            .then(sizes[b].cmp(&sizes[a]))
            .then(a.cmp(&b))
    });
    for &i in order.iter().take((total - assigned) as usize) {
        quotas[i] += 1;
    }
    quotas
}

/// Apportionment used for stratified sampling: largest remainder, plus a
/// minimum quota of one per non-empty stratum whenever `total` allows it
/// (the published sample composition draws at least one build from every
/// project). Each boost takes one unit from the largest-quota stratum.
pub fn sample_quotas(sizes: &[u64], total: u64) -> Vec<u64> {
    let mut quotas = largest_remainder(sizes, total);
    let nonempty = sizes.iter().filter(|&&s| s > 0).count() as u64;
    if total < nonempty {
        return quotas;
    }
    while let Some(zero) = quotas
        .iter()
        .enumerate()
        .position(|(i, &q)| q == 0 && sizes[i] > 0)
    {
        let Some(donor) = quotas
            .iter()
            .enumerate()
            .filter(|&(_, &q)| q >= 2)
            .max_by_key(|&(i, &q)| (q, std::cmp::Reverse(i)))
            .map(|(i, _)| i)
        else {
            break;
        };
        quotas[donor] -= 1;
        quotas[zero] += 1;
    }
    quotas
}

/// Draws a stratified proportional sample of `total` reconstructed
/// records, stratified by project. Selection within a stratum is uniform
/// without replacement; the whole draw is a pure function of
/// `(records, total, seed)`.
pub fn sample_stratified(
    records: &[ReconstructionRecord],
    total: u64,
    seed: u64,
) -> Result<Vec<ReconstructionRecord>, SamplingError> {
    let mut strata: BTreeMap<&str, Vec<&ReconstructionRecord>> = BTreeMap::new();
    for rec in records.iter().filter(|r| r.is_reconstructed()) {
        strata.entry(rec.project()).or_default().push(rec);
    }
    if strata.is_empty() {
        return Err(SamplingError::Empty);
    }
    let population: u64 = strata.values().map(|v| v.len() as u64).sum();
    if total > population {
        return Err(SamplingError::TotalExceedsPopulation { total, population });
    }

    let sizes: Vec<u64> = strata.values().map(|v| v.len() as u64).collect();
    let quotas = sample_quotas(&sizes, total);
    for ((name, members), &quota) in strata.iter().zip(&quotas) {
        if quota > members.len() as u64 {
            return Err(SamplingError::QuotaInfeasible {
                stratum: name.to_string(),
                size: members.len() as u64,
                quota,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(total as usize);
    for (members, &quota) in strata.values().zip(&quotas) {
        let mut picked =
            rand::seq::index::sample(&mut rng, members.len(), quota as usize).into_vec();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|i| members[i].clone()));
    }
    Ok(out)
}
