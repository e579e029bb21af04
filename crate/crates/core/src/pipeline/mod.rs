//! Dataset generation, splitting, training/evaluation orchestration and
//! report tables.

mod analyze;
mod eval;
mod generate;
mod manifest;
mod split;
mod training;

pub use analyze::{analyze, correlate_external, Analysis, ExternalReport};
pub use eval::{eval, permutation_band, score_records, table1_csv, Band, EvalReport, RecordSet, Scorer, Subset, SubsetReport, PSNR_CAP_DB};
pub use generate::{generate, replay_episode, GenerateOptions};
pub use manifest::{canonical_json, r6, AgentScores, EpdRecord, GenerateConfig, Manifest, Split, SplitInfo, MANIFEST_FILE, MANIFEST_FORMAT};
pub use split::{split, split_hash, VAL_FRACTION};
pub use training::{ablation_run, load_samples, table4_csv, train_from_manifest, AblationReport, AblationRow, SeedResult};

use std::path::Path;

use thiserror::Error;

use crate::distortion::DistortionError;
use crate::image::ImageError;
use crate::metrics::MetricError;
use crate::net::NetError;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("degenerate score spread for {group}: every raw score equals {value}")]
    Degenerate { group: String, value: f64 },
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Distortion(#[from] DistortionError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Net(#[from] NetError),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[cfg(test)]
mod tests;
