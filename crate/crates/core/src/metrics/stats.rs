use std::collections::BTreeMap;

use serde::Serialize;

use super::MetricError;
use crate::distortion::DistortionKind;

/// Min-max map of `raw` onto `[lo, hi]`.
pub fn normalize_scores(raw: &[f64], lo: f64, hi: f64) -> Result<Vec<f64>, MetricError> {
    if raw.len() < 2 {
        return Err(MetricError::TooFewPoints { need: 2, got: raw.len() });
    }
    if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite(i));
    }
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Err(MetricError::Degenerate(max));
    }
    Ok(raw
        .iter()
        .map(|&v| {
            if v == min {
                lo
            } else if v == max {
                hi
            } else {
                lo + (v - min) * (hi - lo) / (max - min)
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GroupRecord {
    pub kind: DistortionKind,
    pub level: u8,
    pub score: f64,
}

/// Mean and population standard deviation of one group.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CellStats {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// Per-kind average across levels: mean of the level means and mean of the
/// level standard deviations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KindSummary {
    pub mean: f64,
    pub std: f64,
    pub levels: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColumnExtremes {
    /// `level1`..`level5` or `average`.
    pub column: String,
    /// Highest mean.
    pub best_mean: DistortionKind,
    /// Lowest mean.
    pub worst_mean: DistortionKind,
    /// Lowest std.
    pub best_std: DistortionKind,
    /// Highest std.
    pub worst_std: DistortionKind,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct GroupStats {
    pub cells: BTreeMap<(DistortionKind, u8), CellStats>,
    pub kinds: BTreeMap<DistortionKind, KindSummary>,
    pub warnings: Vec<String>,
}

fn cell(scores: &[f64]) -> CellStats {
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    CellStats {
        mean,
        std: var.sqrt(),
        n: scores.len(),
    }
}

/// Group scores by `(kind, level)`. Kinds with missing levels are averaged
/// over the levels present and reported in `warnings`.
pub fn group_stats(records: &[GroupRecord]) -> GroupStats {
    let mut groups: BTreeMap<(DistortionKind, u8), Vec<f64>> = BTreeMap::new();
    for r in records {
        groups.entry((r.kind, r.level)).or_default().push(r.score);
    }
    let cells: BTreeMap<_, _> = groups.iter().map(|(&k, v)| (k, cell(v))).collect();
    let mut kinds = BTreeMap::new();
    let mut warnings = Vec::new();
    for kind in DistortionKind::ALL {
        let present: Vec<&CellStats> = (1..=5).filter_map(|l| cells.get(&(kind, l))).collect();
        if present.is_empty() {
            continue;
        }
        for level in (1..=5).filter(|l| !cells.contains_key(&(kind, *l))) {
            warnings.push(format!("{kind} level {level}: no records, group omitted"));
        }
        let n = present.len() as f64;
        kinds.insert(
            kind,
            KindSummary {
                mean: present.iter().map(|c| c.mean).sum::<f64>() / n,
                std: present.iter().map(|c| c.std).sum::<f64>() / n,
                levels: present.len(),
            },
        );
    }
    GroupStats { cells, kinds, warnings }
}

impl GroupStats {
    /// Best and worst kinds per column, ties resolved to catalog order.
    pub fn extremes(&self) -> Vec<ColumnExtremes> {
        let mut out = Vec::new();
        let mut push = |column: String, col: Vec<(DistortionKind, f64, f64)>| {
            if col.is_empty() {
                return;
            }
            let pick = |key: &dyn Fn(&(DistortionKind, f64, f64)) -> f64, max: bool| {
                let mut best = col[0];
                for c in &col[1..] {
                    let better = if max { key(c) > key(&best) } else { key(c) < key(&best) };
                    if better {
                        best = *c;
                    }
                }
                best.0
            };
            out.push(ColumnExtremes {
                column,
                best_mean: pick(&|c| c.1, true),
                worst_mean: pick(&|c| c.1, false),
                best_std: pick(&|c| c.2, false),
                worst_std: pick(&|c| c.2, true),
            });
        };
        for level in 1..=5u8 {
            let col = DistortionKind::ALL
                .iter()
                .filter_map(|&k| self.cells.get(&(k, level)).map(|c| (k, c.mean, c.std)))
                .collect();
            push(format!("level{level}"), col);
        }
        let avg = self.kinds.iter().map(|(&k, s)| (k, s.mean, s.std)).collect();
        push("average".to_string(), avg);
        out
    }
}
