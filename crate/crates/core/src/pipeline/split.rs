use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use sha2::{Digest, Sha256};

use super::manifest::{Manifest, Split, SplitInfo};
use super::PipelineError;
use crate::rng::{derive, rng};

/// Validation share of every stratum.
pub const VAL_FRACTION: f64 = 0.2;
const MIN_STRATUM: usize = 5;
const MIN_RECORDS: usize = 10;

/// sha256 over `id=split` lines in id order; unassigned records use `-`.
pub fn split_hash(m: &Manifest) -> String {
    let mut lines: Vec<String> = m
        .records
        .iter()
        .map(|r| format!("{}={}\n", r.id, r.split.map_or("-".to_string(), |s| s.to_string())))
        .collect();
    lines.sort();
    let mut h = Sha256::new();
    for l in lines {
        h.update(l.as_bytes());
    }
    hex::encode(h.finalize())
}

/// Assign train/val 8:2 within each (task, kind) stratum by a seeded
/// shuffle. If any stratum has fewer than five records the whole manifest
/// is split globally instead.
pub fn split(m: &mut Manifest, seed: u64) -> Result<SplitInfo, PipelineError> {
    if m.records.len() < MIN_RECORDS {
        return Err(PipelineError::Invalid(format!("split needs at least {MIN_RECORDS} records, got {}", m.records.len())));
    }
    let mut strata: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in m.records.iter().enumerate() {
        strata.entry(format!("{}/{}", r.task, r.spec.kind)).or_default().push(i);
    }
    let stratified = strata.values().all(|s| s.len() >= MIN_STRATUM);
    if !stratified {
        log::warn!("a (task, kind) stratum has fewer than {MIN_STRATUM} records; splitting globally");
        strata = BTreeMap::from([("all".to_string(), (0..m.records.len()).collect())]);
    }
    for (si, idx) in strata.values_mut().enumerate() {
        idx.sort_by(|&a, &b| m.records[a].id.cmp(&m.records[b].id));
        idx.shuffle(&mut rng(derive(seed, &[si as u64])));
        let n_val = (idx.len() as f64 * VAL_FRACTION).round() as usize;
        for (k, &i) in idx.iter().enumerate() {
            m.records[i].split = Some(if k < n_val { Split::Val } else { Split::Train });
        }
    }
    let val = m.records.iter().filter(|r| r.split == Some(Split::Val)).count();
    let info = SplitInfo {
        seed,
        train: m.records.len() - val,
        val,
        stratified,
        hash: split_hash(m),
    };
    m.split = Some(info.clone());
    Ok(info)
}
