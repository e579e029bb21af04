//! Binary checkpoint layout, all integers little-endian:
//!
//! ```text
//! "EIQA" | version u16 | header_len u32 | header JSON
//! entry_count u32 | entries...
//! entry: name_len u16 | name | dtype u8 (0 = f32) | rank u8 | dims u32 * rank | payload f32 * prod(dims)
//! ```
//!
//! The header holds the model config, training metadata and, when present,
//! the optimizer kind/step count. Adam moments are stored as entries named
//! `adam.m/<param>` and `adam.v/<param>`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig, NetError, TrainHyper};
use crate::tensor::{Moments, Optimizer, OptimizerHyper, OptimizerKind, ParamStore, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"EIQA";
pub const CHECKPOINT_VERSION: u16 = 1;
const DTYPE_F32: u8 = 0;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub epochs: usize,
    pub seed: u64,
    pub hyper: Option<TrainHyper>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub hyper: OptimizerHyper,
    pub steps: u64,
    #[serde(skip)]
    pub moments: BTreeMap<String, Moments<f32>>,
}

impl From<&Optimizer<f32>> for OptimizerState {
    fn from(o: &Optimizer<f32>) -> Self {
        Self {
            kind: o.kind,
            hyper: o.hyper,
            steps: o.steps,
            moments: o.moments.clone(),
        }
    }
}

impl From<OptimizerState> for Optimizer<f32> {
    fn from(s: OptimizerState) -> Self {
        let mut o = Optimizer::new(s.kind, s.hyper);
        o.steps = s.steps;
        o.moments = s.moments;
        o
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    meta: CheckpointMeta,
    optimizer: Option<OptimizerState>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub meta: CheckpointMeta,
    pub params: ParamStore<f32>,
    pub optimizer: Option<OptimizerState>,
}

fn bad(msg: impl Into<String>) -> NetError {
    NetError::Checkpoint(msg.into())
}

fn write_entry(out: &mut Vec<u8>, name: &str, t: &Tensor<f32>) {
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.push(DTYPE_F32);
    out.push(t.rank() as u8);
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NetError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| bad("truncated file"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, NetError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, NetError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, NetError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn entry(&mut self) -> Result<(String, Tensor<f32>), NetError> {
        let len = self.u16()? as usize;
        let name = String::from_utf8(self.take(len)?.to_vec()).map_err(|_| bad("entry name is not UTF-8"))?;
        if self.u8()? != DTYPE_F32 {
            return Err(bad(format!("entry `{name}` has an unsupported dtype")));
        }
        let rank = self.u8()? as usize;
        let dims: Vec<usize> = (0..rank).map(|_| self.u32().map(|d| d as usize)).collect::<Result<_, _>>()?;
        let count: usize = dims.iter().product();
        let bytes = self.take(count.checked_mul(4).ok_or_else(|| bad("entry too large"))?)?;
        let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        Ok((name, Tensor::new(&dims, data)?))
    }
}

impl Checkpoint {
    pub fn from_model(model: &Model, meta: CheckpointMeta, optimizer: Option<&Optimizer<f32>>) -> Self {
        Self {
            config: model.cfg.clone(),
            meta,
            params: model.params.clone(),
            optimizer: optimizer.map(OptimizerState::from),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&Header {
            config: self.config.clone(),
            meta: self.meta.clone(),
            optimizer: self.optimizer.clone(),
        })
        .expect("header serializes");
        let mut entries: Vec<(String, &Tensor<f32>)> = self.params.iter().map(|(n, t)| (n.clone(), t)).collect();
        if let Some(o) = &self.optimizer {
            for (n, m) in &o.moments {
                entries.push((format!("adam.m/{n}"), &m.m));
                entries.push((format!("adam.v/{n}"), &m.v));
            }
        }
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
        for (name, t) in entries {
            write_entry(&mut out, &name, t);
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, NetError> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(bad("missing EIQA magic"));
        }
        let version = r.u16()?;
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let len = r.u32()? as usize;
        let header: Header = serde_json::from_slice(r.take(len)?).map_err(|e| bad(format!("header: {e}")))?;
        header.config.validate()?;
        let count = r.u32()? as usize;
        let mut params = ParamStore::new();
        let mut m = BTreeMap::new();
        let mut v = BTreeMap::new();
        for _ in 0..count {
            let (name, t) = r.entry()?;
            if let Some(p) = name.strip_prefix("adam.m/") {
                m.insert(p.to_string(), t);
            } else if let Some(p) = name.strip_prefix("adam.v/") {
                v.insert(p.to_string(), t);
            } else {
                params.insert(name, t);
            }
        }
        if r.pos != buf.len() {
            return Err(bad("trailing bytes"));
        }
        let expected = header.config.layer_list();
        if expected.len() != params.len() {
            return Err(bad(format!("{} parameter entries, config needs {}", params.len(), expected.len())));
        }
        for (name, shape) in &expected {
            match params.get(name) {
                Some(t) if t.shape() == shape.as_slice() => {}
                Some(t) => return Err(bad(format!("`{name}` has shape {:?}, config needs {shape:?}", t.shape()))),
                None => return Err(bad(format!("missing parameter `{name}`"))),
            }
        }
        let optimizer = header.optimizer.map(|mut o| {
            o.moments = m
                .into_iter()
                .filter_map(|(n, mt)| v.remove(&n).map(|vt| (n, Moments { m: mt, v: vt })))
                .collect();
            o
        });
        Ok(Self {
            config: header.config,
            meta: header.meta,
            params,
            optimizer,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), NetError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NetError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// The stored model; fails if `expected` is given and differs from the
    /// stored config.
    pub fn into_model(self, expected: Option<&ModelConfig>) -> Result<Model, NetError> {
        if expected.is_some_and(|c| *c != self.config) {
            return Err(NetError::ConfigMismatch);
        }
        Ok(Model {
            cfg: self.config,
            params: self.params,
        })
    }
}
