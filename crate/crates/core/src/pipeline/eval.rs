use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::manifest::{EpdRecord, Manifest, Split};
use super::training::load_input;
use super::PipelineError;
use crate::image::ImageBuf;
use crate::metrics::{correlate, krcc, plcc, psnr, srcc, ssim, CorrelationReport, Mapping};
use crate::net::Checkpoint;
use crate::rng::{derive, rng};
use crate::sim::Task;

/// PSNR of identical images is infinite; correlations use this cap instead.
pub const PSNR_CAP_DB: f64 = 100.0;

#[derive(Clone, Debug, PartialEq)]
pub enum Scorer {
    Checkpoint(PathBuf),
    Psnr,
    Ssim,
    /// The ground truth itself.
    Dmos,
    /// A seeded permutation of the ground truth.
    Permutation { seed: u64 },
}

impl Scorer {
    pub fn name(&self) -> String {
        match self {
            Scorer::Checkpoint(p) => format!("checkpoint:{}", p.display()),
            Scorer::Psnr => "psnr".into(),
            Scorer::Ssim => "ssim".into(),
            Scorer::Dmos => "dmos".into(),
            Scorer::Permutation { seed } => format!("permutation:{seed}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    All,
    Push,
    Pick,
}

impl Subset {
    pub const ALL: [Subset; 3] = [Subset::All, Subset::Push, Subset::Pick];

    pub fn name(self) -> &'static str {
        match self {
            Subset::All => "all",
            Subset::Push => "push",
            Subset::Pick => "pick",
        }
    }

    pub fn contains(self, r: &EpdRecord) -> bool {
        match self {
            Subset::All => true,
            Subset::Push => r.task == Task::Push,
            Subset::Pick => r.task == Task::Pick,
        }
    }
}

impl FromStr for Subset {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Subset::ALL
            .into_iter()
            .find(|x| x.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| PipelineError::Invalid(format!("unknown subset `{s}` (all|push|pick)")))
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which split's records are scored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordSet {
    Val,
    Train,
    All,
}

impl RecordSet {
    pub fn split(self) -> Option<Split> {
        match self {
            RecordSet::Val => Some(Split::Val),
            RecordSet::Train => Some(Split::Train),
            RecordSet::All => None,
        }
    }
}

impl FromStr for RecordSet {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "val" => Ok(RecordSet::Val),
            "train" => Ok(RecordSet::Train),
            "all" => Ok(RecordSet::All),
            _ => Err(PipelineError::Invalid(format!("unknown record set `{s}` (val|train|all)"))),
        }
    }
}

/// Upper quantile of |correlation| under random permutations of the
/// targets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Band {
    pub srcc: f64,
    pub krcc: f64,
    pub plcc: f64,
    pub permutations: usize,
    pub quantile: f64,
}

impl Band {
    pub fn contains(&self, r: &CorrelationReport) -> bool {
        r.srcc.abs() <= self.srcc && r.krcc.abs() <= self.krcc && r.plcc.abs() <= self.plcc
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubsetReport {
    pub subset: Subset,
    pub n: usize,
    pub report: Option<CorrelationReport>,
    pub error: Option<String>,
    pub band: Option<Band>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecordScore {
    pub id: String,
    pub score: f64,
    pub dmos: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub scorer: String,
    pub records: RecordSet,
    pub mapping: Mapping,
    pub params: Option<usize>,
    pub runtime_s: f64,
    pub subsets: Vec<SubsetReport>,
    #[serde(skip)]
    pub scores: Vec<RecordScore>,
}

impl EvalReport {
    pub fn subset(&self, s: Subset) -> Option<&SubsetReport> {
        self.subsets.iter().find(|r| r.subset == s)
    }

    /// Per-record scores as `id,score,dmos` CSV; infinite PSNR is `inf`.
    pub fn scores_csv(&self) -> String {
        let mut s = String::from("id,score,dmos\n");
        for r in &self.scores {
            let score = if r.score.is_infinite() { "inf".to_string() } else { format!("{:.6}", r.score) };
            s.push_str(&format!("{},{},{:.6}\n", r.id, score, r.dmos));
        }
        s
    }
}

fn read(dir: &Path, rel: &str) -> Result<ImageBuf, PipelineError> {
    Ok(ImageBuf::read_png(&dir.join(rel))?)
}

/// Raw scores for `records` in order. PSNR may be infinite.
pub fn score_records(records: &[&EpdRecord], dir: &Path, scorer: &Scorer) -> Result<Vec<f64>, PipelineError> {
    match scorer {
        Scorer::Dmos => Ok(records.iter().map(|r| r.dmos).collect()),
        Scorer::Permutation { seed } => {
            let mut idx: Vec<usize> = (0..records.len()).collect();
            idx.shuffle(&mut rng(*seed));
            Ok(idx.iter().map(|&i| records[i].dmos).collect())
        }
        Scorer::Psnr | Scorer::Ssim => records
            .par_iter()
            .map(|r| {
                let (a, b) = (read(dir, &r.ref_path)?, read(dir, &r.dist_path)?);
                Ok(if *scorer == Scorer::Psnr { psnr(&a, &b)? } else { ssim(&a, &b)? })
            })
            .collect(),
        Scorer::Checkpoint(path) => {
            let model = Checkpoint::load(path)?.into_model(None)?;
            records
                .par_iter()
                .map(|r| Ok(model.predict(&load_input(&dir.join(&r.dist_path), model.cfg.input_size)?)?))
                .collect()
        }
    }
}

fn quantile(mut v: Vec<f64>, q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// `quantile` of |SRCC|, |KRCC| and |PLCC| between `y` and `permutations`
/// seeded shuffles of itself.
pub fn permutation_band(y: &[f64], mapping: Mapping, permutations: usize, seed: u64, q: f64) -> Result<Band, PipelineError> {
    let stats: Vec<[f64; 3]> = (0..permutations)
        .into_par_iter()
        .map(|k| {
            let mut x = y.to_vec();
            x.shuffle(&mut rng(derive(seed, &[k as u64])));
            Ok([srcc(&x, y)?.abs(), krcc(&x, y)?.abs(), plcc(&x, y, mapping)?.value.abs()])
        })
        .collect::<Result<_, PipelineError>>()?;
    let col = |i: usize| quantile(stats.iter().map(|s| s[i]).collect(), q);
    Ok(Band {
        srcc: col(0),
        krcc: col(1),
        plcc: col(2),
        permutations,
        quantile: q,
    })
}

/// Score the chosen records and correlate against dmos on each subset.
/// `band_seed` adds a 1000-permutation 99th-percentile band per subset; it
/// is always computed for the permutation scorer.
pub fn eval(
    manifest: &Manifest,
    dir: &Path,
    scorer: &Scorer,
    set: RecordSet,
    subsets: &[Subset],
    mapping: Mapping,
    band_seed: Option<u64>,
) -> Result<EvalReport, PipelineError> {
    let start = Instant::now();
    let records = manifest.records_in(set.split());
    if records.is_empty() {
        return Err(PipelineError::Invalid(format!("no records in the {set:?} set")));
    }
    let raw = score_records(&records, dir, scorer)?;
    let params = match scorer {
        Scorer::Checkpoint(p) => Some(Checkpoint::load(p)?.params.scalar_count()),
        _ => None,
    };
    let band_seed = match (scorer, band_seed) {
        (_, Some(s)) => Some(s),
        (Scorer::Permutation { seed }, None) => Some(derive(*seed, &[0xBA4D])),
        _ => None,
    };
    let mut out = Vec::new();
    for &subset in subsets {
        let (x, y): (Vec<f64>, Vec<f64>) = records
            .iter()
            .zip(&raw)
            .filter(|(r, _)| subset.contains(r))
            .map(|(r, &s)| (s.min(PSNR_CAP_DB), r.dmos))
            .unzip();
        let (report, error) = match correlate(&x, &y, mapping) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let band = match band_seed {
            Some(s) if y.len() >= 4 => permutation_band(&y, mapping, 1000, derive(s, &[subset as u64]), 0.99).ok(),
            _ => None,
        };
        out.push(SubsetReport {
            subset,
            n: x.len(),
            report,
            error,
            band,
        });
    }
    Ok(EvalReport {
        scorer: scorer.name(),
        records: set,
        mapping,
        params,
        runtime_s: start.elapsed().as_secs_f64(),
        subsets: out,
        scores: records
            .iter()
            .zip(&raw)
            .map(|(r, &s)| RecordScore {
                id: r.id.clone(),
                score: s,
                dmos: r.dmos,
            })
            .collect(),
    })
}

/// Table-I-shaped CSV: one row per report, SRCC/KRCC/PLCC per subset.
pub fn table1_csv(reports: &[EvalReport]) -> String {
    let mut s = String::from("scorer");
    for sub in Subset::ALL {
        for m in ["srcc", "krcc", "plcc"] {
            s.push_str(&format!(",{sub}_{m}"));
        }
    }
    s.push('\n');
    for r in reports {
        s.push_str(&r.scorer);
        for sub in Subset::ALL {
            match r.subset(sub).and_then(|c| c.report.as_ref()) {
                Some(c) => s.push_str(&format!(",{:.4},{:.4},{:.4}", c.srcc, c.krcc, c.plcc)),
                None => s.push_str(",nan,nan,nan"),
            }
        }
        s.push('\n');
    }
    s
}
