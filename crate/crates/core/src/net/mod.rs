//! The multi-scale attention quality network.
//!
//! Layout: a bottleneck backbone producing stages C2..C5 at strides 4..32,
//! a top-down lateral path (P), a bottom-up path (N) fused into one map at
//! `fuse_level`, CBAM-style channel then spatial attention, and a two-layer
//! regression head. Either module can be switched off for ablations.
//!
//! Inputs are RGB in `[0, 1]` shifted by -0.5.

mod checkpoint;
mod layers;
mod model;
mod train;

pub use checkpoint::{Checkpoint, CheckpointMeta, OptimizerState, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use layers::{bottom_up, channel_attention, extract_stages, forward, spatial_attention, top_down, ForwardVars, ParamVars};
pub use model::{FeatureMaps, Model};
pub use train::{evaluate_mse, train, EpochLoss, Sample, TrainHyper, TrainOutcome};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::TensorError;

/// Hidden width of the full preset head, calibrated against the published
/// 48.83 M parameter total.
pub const FULL_FC_HIDDEN: usize = 345;
/// Published parameter total of the full model.
pub const PAPER_PARAM_COUNT: usize = 48_830_000;
/// Value added to `[0, 1]` pixels before the first layer.
pub const INPUT_OFFSET: f32 = -0.5;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("input is {height}x{width}, model expects {expected}x{expected}")]
    InputSize { height: usize, width: usize, expected: usize },
    #[error("checkpoint config does not match the requested model config")]
    ConfigMismatch,
    #[error("empty {0} set")]
    EmptySplit(&'static str),
    #[error("non-finite loss {value} at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize, value: f64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Full,
    Toy,
}

impl FromStr for Preset {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(Preset::Full),
            "toy" => Ok(Preset::Toy),
            _ => Err(NetError::Config(format!("unknown preset `{s}` (full|toy)"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Full => "full",
            Preset::Toy => "toy",
        })
    }
}

/// Ablation variants, in report order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "Baseline")]
    Baseline,
    #[serde(rename = "Baseline+MS")]
    Ms,
    #[serde(rename = "Baseline+EA")]
    Ea,
    #[serde(rename = "MA-EIQA")]
    Full,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Baseline, Variant::Ms, Variant::Ea, Variant::Full];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "Baseline",
            Variant::Ms => "Baseline+MS",
            Variant::Ea => "Baseline+EA",
            Variant::Full => "MA-EIQA",
        }
    }

    pub fn switches(self) -> (bool, bool) {
        match self {
            Variant::Baseline => (false, false),
            Variant::Ms => (true, false),
            Variant::Ea => (false, true),
            Variant::Full => (true, true),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_size: usize,
    pub preset: Preset,
    pub stem_channels: usize,
    pub stage_widths: [usize; 4],
    pub stage_blocks: [usize; 4],
    pub pyramid_channels: usize,
    /// Pyramid level (2..=5) whose resolution the fused map uses.
    pub fuse_level: usize,
    pub fc_hidden: usize,
    /// Channel-attention MLP reduction ratio.
    pub reduction: usize,
    pub enable_ms: bool,
    pub enable_ea: bool,
}

impl ModelConfig {
    pub fn full() -> Self {
        Self {
            input_size: 128,
            preset: Preset::Full,
            stem_channels: 64,
            stage_widths: [256, 512, 1024, 2048],
            stage_blocks: [3, 4, 6, 3],
            pyramid_channels: 256,
            fuse_level: 3,
            fc_hidden: FULL_FC_HIDDEN,
            reduction: 16,
            enable_ms: true,
            enable_ea: true,
        }
    }

    pub fn toy() -> Self {
        Self {
            input_size: 128,
            preset: Preset::Toy,
            stem_channels: 8,
            stage_widths: [16, 32, 64, 128],
            stage_blocks: [3, 4, 6, 3],
            pyramid_channels: 32,
            fuse_level: 3,
            fc_hidden: 32,
            reduction: 16,
            enable_ms: true,
            enable_ea: true,
        }
    }

    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Full => Self::full(),
            Preset::Toy => Self::toy(),
        }
    }

    pub fn with_variant(mut self, v: Variant) -> Self {
        (self.enable_ms, self.enable_ea) = v.switches();
        self
    }

    pub fn with_input_size(mut self, size: usize) -> Self {
        self.input_size = size;
        self
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: String| Err(NetError::Config(m));
        if self.input_size == 0 || self.input_size % 32 != 0 {
            return bad(format!("input_size {} is not a positive multiple of 32", self.input_size));
        }
        if !(2..=5).contains(&self.fuse_level) {
            return bad(format!("fuse_level {} is outside 2..=5", self.fuse_level));
        }
        if self.stage_widths.iter().any(|&w| w < 4 || w % 4 != 0) {
            return bad(format!("stage widths {:?} must be multiples of 4", self.stage_widths));
        }
        if self.stage_blocks.contains(&0) {
            return bad("every stage needs at least one block".into());
        }
        if self.stem_channels == 0 || self.pyramid_channels == 0 || self.fc_hidden == 0 || self.reduction == 0 {
            return bad("channel counts must be positive".into());
        }
        Ok(())
    }

    /// Spatial side of stage `i` (0 for C2 .. 3 for C5).
    pub fn stage_side(&self, i: usize) -> usize {
        self.input_size / (4 << i)
    }

    /// Channels and side of the map entering attention and the head.
    pub fn head_feature_shape(&self) -> (usize, usize) {
        if self.enable_ms {
            (self.pyramid_channels, self.stage_side(self.fuse_level - 2))
        } else {
            (self.stage_widths[3], self.stage_side(3))
        }
    }

    /// Name and shape of every trainable tensor, in construction order.
    pub fn layer_list(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        let mut conv = |name: String, cout: usize, cin: usize, k: usize| {
            out.push((format!("{name}.w"), vec![cout, cin, k, k]));
            out.push((format!("{name}.b"), vec![cout]));
        };
        conv("stem".into(), self.stem_channels, 3, 7);
        let mut cin = self.stem_channels;
        for (s, (&width, &blocks)) in self.stage_widths.iter().zip(&self.stage_blocks).enumerate() {
            let mid = width / 4;
            for b in 0..blocks {
                let p = format!("s{}.b{b}", s + 2);
                conv(format!("{p}.conv1"), mid, cin, 1);
                conv(format!("{p}.conv2"), mid, mid, 3);
                conv(format!("{p}.conv3"), width, mid, 1);
                if b == 0 {
                    conv(format!("{p}.proj"), width, cin, 1);
                }
                cin = width;
            }
        }
        let pc = self.pyramid_channels;
        if self.enable_ms {
            for (i, &w) in self.stage_widths.iter().enumerate() {
                conv(format!("ms.lat{}", i + 2), pc, w, 1);
            }
            for i in 3..=5 {
                conv(format!("ms.down{i}"), pc, pc, 3);
            }
        }
        let (c, side) = self.head_feature_shape();
        let mut linear = |name: &str, d: usize, m: usize| {
            out.push((format!("{name}.w"), vec![d, m]));
            out.push((format!("{name}.b"), vec![m]));
        };
        if self.enable_ea {
            let hidden = (c / self.reduction).max(1);
            linear("ea.mlp1", c, hidden);
            linear("ea.mlp2", hidden, c);
        }
        linear("head.fc1", c * side * side, self.fc_hidden);
        linear("head.fc2", self.fc_hidden, 1);
        if self.enable_ea {
            out.push(("ea.spatial.w".into(), vec![1, 2, 7, 7]));
            out.push(("ea.spatial.b".into(), vec![1]));
        }
        out
    }
}

/// Exact number of trainable scalars.
pub fn count_params(cfg: &ModelConfig) -> usize {
    cfg.layer_list().iter().map(|(_, s)| s.iter().product::<usize>()).sum()
}

/// The `fc_hidden` that brings `count_params` closest to `target`.
pub fn calibrate_fc_hidden(cfg: &ModelConfig, target: usize) -> usize {
    let at = |h: usize| count_params(&ModelConfig { fc_hidden: h, ..cfg.clone() });
    let base = at(1);
    let per = at(2) - base;
    let h = ((target.saturating_sub(base)) as f64 / per as f64).round() as usize + 1;
    [h.saturating_sub(1).max(1), h, h + 1]
        .into_iter()
        .min_by_key(|&h| at(h).abs_diff(target))
        .expect("non-empty")
}
