use std::fmt::Write as _;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::PipelineError;
use crate::distortion::{DistortionKind, DistortionSpec};
use crate::sim::{Agent, SimParams, Task};

pub const MANIFEST_FORMAT: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Round to the six decimals the canonical form keeps.
pub fn r6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub scenes: usize,
    pub tasks: Vec<Task>,
    pub kinds: Vec<DistortionKind>,
    pub levels: Vec<u8>,
    pub seed: u64,
    pub sim: SimParams,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentScores {
    pub ppo: f64,
    pub sac: f64,
    pub tdmpc2: f64,
}

impl AgentScores {
    pub fn get(&self, a: Agent) -> f64 {
        match a {
            Agent::Ppo => self.ppo,
            Agent::Sac => self.sac,
            Agent::Tdmpc2 => self.tdmpc2,
        }
    }

    pub fn set(&mut self, a: Agent, v: f64) {
        match a {
            Agent::Ppo => self.ppo = v,
            Agent::Sac => self.sac = v,
            Agent::Tdmpc2 => self.tdmpc2 = v,
        }
    }

    pub fn mean(&self) -> f64 {
        (self.ppo + self.sac + self.tdmpc2) / 3.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpdRecord {
    pub id: String,
    pub task: Task,
    /// Scene index within the task.
    pub scene: usize,
    pub scene_seed: u64,
    pub spec: DistortionSpec,
    pub ref_path: String,
    pub dist_path: String,
    pub height: usize,
    pub width: usize,
    /// Raw aggregate scores J.
    pub agent_scores: AgentScores,
    /// J min-max normalised to `[0, 5]` per task and agent.
    pub agent_dmos: AgentScores,
    /// Mean of `agent_dmos`.
    pub task_score: f64,
    /// `task_score` min-max normalised to `[0, 5]` per task.
    pub dmos: f64,
    /// Pooled score: mean of the per-task dmos of the records sharing this
    /// record's scene index, kind and level, normalised to `[0, 5]`.
    pub dmos_all: f64,
    pub mean_reward: f64,
    pub final_distance: f64,
    pub split: Option<Split>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub seed: u64,
    pub train: usize,
    pub val: usize,
    pub stratified: bool,
    /// sha256 over `id=split` lines in id order.
    pub hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub config: GenerateConfig,
    pub records: Vec<EpdRecord>,
    pub split: Option<SplitInfo>,
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                write!(out, "{u}").unwrap();
            } else if let Some(i) = n.as_i64() {
                write!(out, "{i}").unwrap();
            } else {
                write!(out, "{:.6}", n.as_f64().expect("finite number")).unwrap();
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(item, indent + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&serde_json::to_string(k).expect("key serializes"));
                out.push_str(": ");
                write_value(&map[*k], indent + 1, out);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

/// Canonical JSON: sorted keys, two-space indent, floats as `%.6f`.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("value serializes");
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    out
}

impl Manifest {
    pub fn to_canonical(&self) -> String {
        canonical_json(self)
    }

    pub fn record(&self, id: &str) -> Option<&EpdRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn records_in(&self, split: Option<Split>) -> Vec<&EpdRecord> {
        self.records.iter().filter(|r| split.is_none() || r.split == split).collect()
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf, PipelineError> {
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, self.to_canonical()).map_err(|e| PipelineError::io(&path, e))?;
        Ok(path)
    }

    /// Load from a manifest file or a directory containing one. Returns the
    /// manifest and the directory its image paths are relative to.
    pub fn load(path: &Path) -> Result<(Self, PathBuf), PipelineError> {
        let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
        let text = std::fs::read_to_string(&file).map_err(|e| PipelineError::io(&file, e))?;
        let m = Self::from_str(&text)?;
        let dir = file.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((m, dir))
    }
}

impl FromStr for Manifest {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let m: Manifest = serde_json::from_str(s).map_err(|e| PipelineError::Manifest(e.to_string()))?;
        if m.format != MANIFEST_FORMAT {
            return Err(PipelineError::Manifest(format!("unsupported format {}", m.format)));
        }
        let mut ids: Vec<&str> = m.records.iter().map(|r| r.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(PipelineError::Manifest(format!("duplicate record id `{}`", w[0])));
        }
        Ok(m)
    }
}
