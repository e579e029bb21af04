use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::eval::{Subset, SubsetReport};
use super::manifest::{EpdRecord, Manifest, Split};
use super::PipelineError;
use crate::image::ImageBuf;
use crate::metrics::{correlate, Mapping};
use crate::net::{count_params, train, EpochLoss, Model, ModelConfig, NetError, Sample, TrainHyper, TrainOutcome, Variant};

/// Read a PNG and bring it to `size` by integer box downsampling.
pub(crate) fn load_input(path: &Path, size: usize) -> Result<ImageBuf, PipelineError> {
    let img = ImageBuf::read_png(path)?;
    let (h, w) = (img.height(), img.width());
    if h == size && w == size {
        return Ok(img);
    }
    if h == w && h > size && h % size == 0 {
        return Ok(img.downsample(h / size)?);
    }
    Err(NetError::InputSize {
        height: h,
        width: w,
        expected: size,
    }
    .into())
}

fn require_split(m: &Manifest) -> Result<(), PipelineError> {
    if m.split.is_none() {
        return Err(PipelineError::Invalid("manifest has no train/val split; run `split` first".into()));
    }
    Ok(())
}

/// Distorted images of the records in `split`, targets = dmos.
pub fn load_samples<'a>(m: &'a Manifest, dir: &Path, split: Split, input_size: usize) -> Result<(Vec<&'a EpdRecord>, Vec<Sample>), PipelineError> {
    require_split(m)?;
    let records = m.records_in(Some(split));
    let samples = records
        .par_iter()
        .map(|r| {
            Ok(Sample {
                image: load_input(&dir.join(&r.dist_path), input_size)?,
                target: r.dmos,
            })
        })
        .collect::<Result<_, PipelineError>>()?;
    Ok((records, samples))
}

fn fit(cfg: &ModelConfig, hyper: &TrainHyper, train_set: &[Sample], val_set: &[Sample], on_epoch: impl FnMut(&EpochLoss)) -> Result<(Model, TrainOutcome), PipelineError> {
    let mut model = Model::new(cfg.clone(), hyper.seed)?;
    if !train_set.is_empty() {
        model.set_output_bias(train_set.iter().map(|s| s.target).sum::<f64>() / train_set.len() as f64);
    }
    let out = train(&mut model, train_set, val_set, hyper, on_epoch)?;
    Ok((model, out))
}

/// Train on the manifest's train split, validating on its val split. The
/// output bias starts at the mean training dmos; initial weights and
/// shuffling come from `hyper.seed`.
pub fn train_from_manifest(
    m: &Manifest,
    dir: &Path,
    cfg: &ModelConfig,
    hyper: &TrainHyper,
    on_epoch: impl FnMut(&EpochLoss),
) -> Result<(Model, TrainOutcome), PipelineError> {
    cfg.validate()?;
    let (_, train_set) = load_samples(m, dir, Split::Train, cfg.input_size)?;
    let (_, val_set) = load_samples(m, dir, Split::Val, cfg.input_size)?;
    fit(cfg, hyper, &train_set, &val_set, on_epoch)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedResult {
    pub seed: u64,
    pub final_val_mse: f64,
    pub subsets: Vec<SubsetReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub enable_ms: bool,
    pub enable_ea: bool,
    pub params: usize,
    pub split_hash: String,
    pub seeds: Vec<SeedResult>,
    /// `[srcc, krcc, plcc]` averaged over seeds per subset, NaN if any seed
    /// had an undefined correlation.
    pub mean: Vec<(Subset, [f64; 3])>,
}

impl AblationRow {
    pub fn mean_of(&self, s: Subset) -> [f64; 3] {
        self.mean.iter().find(|(x, _)| *x == s).map_or([f64::NAN; 3], |m| m.1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationReport {
    pub base: ModelConfig,
    pub hyper: TrainHyper,
    pub mapping: Mapping,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, v: Variant) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == v)
    }
}

/// Train Baseline, +MS, +EA and the full model with identical data, seeds
/// and hyperparameters, and report val-set correlations per subset.
pub fn ablation_run(
    m: &Manifest,
    dir: &Path,
    base: &ModelConfig,
    hyper: &TrainHyper,
    seeds: &[u64],
    mapping: Mapping,
) -> Result<AblationReport, PipelineError> {
    if seeds.is_empty() {
        return Err(PipelineError::Invalid("ablation needs at least one seed".into()));
    }
    let (_, train_set) = load_samples(m, dir, Split::Train, base.input_size)?;
    let (val_records, val_set) = load_samples(m, dir, Split::Val, base.input_size)?;
    let hash = m.split.as_ref().map(|s| s.hash.clone()).unwrap_or_default();
    let mut rows = Vec::new();
    for v in Variant::ALL {
        let cfg = base.clone().with_variant(v);
        let mut results = Vec::new();
        for &seed in seeds {
            let h = TrainHyper { seed, ..*hyper };
            let (model, out) = fit(&cfg, &h, &train_set, &val_set, |_| {})?;
            let preds = model.predict_batch(&val_set.iter().map(|s| s.image.clone()).collect::<Vec<_>>())?;
            let subsets = Subset::ALL
                .iter()
                .map(|&sub| {
                    let (x, y): (Vec<f64>, Vec<f64>) = val_records
                        .iter()
                        .zip(&preds)
                        .filter(|(r, _)| sub.contains(r))
                        .map(|(r, &p)| (p, r.dmos))
                        .unzip();
                    let (report, error) = match correlate(&x, &y, mapping) {
                        Ok(r) => (Some(r), None),
                        Err(e) => (None, Some(e.to_string())),
                    };
                    SubsetReport {
                        subset: sub,
                        n: x.len(),
                        report,
                        error,
                        band: None,
                    }
                })
                .collect();
            log::info!("ablation {v} seed {seed} done");
            results.push(SeedResult {
                seed,
                final_val_mse: out.curve.last().map_or(f64::NAN, |e| e.val_mse),
                subsets,
            });
        }
        let mean = Subset::ALL
            .iter()
            .enumerate()
            .map(|(i, &sub)| {
                let mut acc = [0.0; 3];
                for r in &results {
                    let cell = r.subsets[i].report.as_ref().map_or([f64::NAN; 3], |c| [c.srcc, c.krcc, c.plcc]);
                    acc.iter_mut().zip(cell).for_each(|(a, c)| *a += c / results.len() as f64);
                }
                (sub, acc)
            })
            .collect();
        rows.push(AblationRow {
            variant: v,
            enable_ms: cfg.enable_ms,
            enable_ea: cfg.enable_ea,
            params: count_params(&cfg),
            split_hash: hash.clone(),
            seeds: results,
            mean,
        });
    }
    Ok(AblationReport {
        base: base.clone(),
        hyper: *hyper,
        mapping,
        rows,
    })
}

/// Table-IV-shaped CSV of the seed means.
pub fn table4_csv(r: &AblationReport) -> String {
    let mut s = String::from("variant,params");
    for sub in Subset::ALL {
        for m in ["srcc", "krcc", "plcc"] {
            s.push_str(&format!(",{sub}_{m}"));
        }
    }
    s.push('\n');
    for row in &r.rows {
        s.push_str(&format!("{},{}", row.variant, row.params));
        for sub in Subset::ALL {
            let [a, b, c] = row.mean_of(sub);
            s.push_str(&format!(",{a:.4},{b:.4},{c:.4}"));
        }
        s.push('\n');
    }
    s
}
