//! Graph-level building blocks. Every function reads weights through a
//! [`ParamVars`] map so the same code serves inference, training and
//! finite-difference checks (where parameters are plain graph inputs).

use std::collections::BTreeMap;

use super::{ModelConfig, NetError};
use crate::tensor::{ChannelReduce, Graph, ParamStore, PoolMode, Scalar, TensorError, Var};

/// Parameter name to graph node.
#[derive(Clone, Debug, Default)]
pub struct ParamVars(BTreeMap<String, Var>);

impl ParamVars {
    /// Load every parameter of `store` onto `g`.
    pub fn bind<T: Scalar>(g: &mut Graph<T>, store: &ParamStore<T>) -> Result<Self, TensorError> {
        let mut map = BTreeMap::new();
        for name in store.names() {
            map.insert(name.clone(), g.param(store, name)?);
        }
        Ok(Self(map))
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, Var)>) -> Self {
        Self(pairs.into_iter().collect())
    }

    pub fn get(&self, name: &str) -> Result<Var, TensorError> {
        self.0.get(name).copied().ok_or_else(|| TensorError::UnknownParam(name.to_string()))
    }
}

/// Nodes of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardVars {
    pub stages: [Var; 4],
    pub top_down: Option<[Var; 4]>,
    pub bottom_up: Option<[Var; 4]>,
    /// F_E with the encoder on, C5 without it.
    pub encoded: Var,
    /// `(M_c, F', M_s, F_A)`.
    pub attention: Option<(Var, Var, Var, Var)>,
    pub head_input: Var,
    /// `[N, 1]` scores.
    pub score: Var,
}

fn conv<T: Scalar>(g: &mut Graph<T>, p: &ParamVars, name: &str, x: Var, stride: usize, pad: usize) -> Result<Var, TensorError> {
    let (w, b) = (p.get(&format!("{name}.w"))?, p.get(&format!("{name}.b"))?);
    g.conv2d(x, w, b, stride, pad)
}

fn dense<T: Scalar>(g: &mut Graph<T>, p: &ParamVars, name: &str, x: Var) -> Result<Var, TensorError> {
    let (w, b) = (p.get(&format!("{name}.w"))?, p.get(&format!("{name}.b"))?);
    g.linear(x, w, b)
}

fn bottleneck<T: Scalar>(g: &mut Graph<T>, p: &ParamVars, prefix: &str, x: Var, stride: usize, project: bool) -> Result<Var, TensorError> {
    let h = conv(g, p, &format!("{prefix}.conv1"), x, 1, 0)?;
    let h = g.relu(h)?;
    let h = conv(g, p, &format!("{prefix}.conv2"), h, stride, 1)?;
    let h = g.relu(h)?;
    let h = conv(g, p, &format!("{prefix}.conv3"), h, 1, 0)?;
    let shortcut = if project {
        conv(g, p, &format!("{prefix}.proj"), x, stride, 0)?
    } else {
        x
    };
    let sum = g.add(h, shortcut)?;
    g.relu(sum)
}

/// Backbone stages C2..C5 for an `[N, 3, S, S]` input.
pub fn extract_stages<T: Scalar>(g: &mut Graph<T>, cfg: &ModelConfig, p: &ParamVars, x: Var) -> Result<[Var; 4], NetError> {
    match *g.shape(x) {
        [_, 3, h, w] if h == cfg.input_size && w == cfg.input_size => {}
        [_, _, h, w] => {
            return Err(NetError::InputSize {
                height: h,
                width: w,
                expected: cfg.input_size,
            })
        }
        _ => return Err(TensorError::shape("extract_stages", "input rank", "expected [N,3,H,W]").into()),
    }
    let h = conv(g, p, "stem", x, 2, 3)?;
    let h = g.relu(h)?;
    let mut h = g.pool(h, PoolMode::Max, 2, 2)?;
    let mut out = [h; 4];
    for (s, &blocks) in cfg.stage_blocks.iter().enumerate() {
        for b in 0..blocks {
            let stride = if b == 0 && s > 0 { 2 } else { 1 };
            h = bottleneck(g, p, &format!("s{}.b{b}", s + 2), h, stride, b == 0)?;
        }
        out[s] = h;
    }
    Ok(out)
}

/// `P5 = T5(C5)`, `P_i = up(P_{i+1}) + T_i(C_i)`.
pub fn top_down<T: Scalar>(g: &mut Graph<T>, p: &ParamVars, c: &[Var; 4]) -> Result<[Var; 4], TensorError> {
    let mut out = [c[3]; 4];
    out[3] = conv(g, p, "ms.lat5", c[3], 1, 0)?;
    for i in (0..3).rev() {
        let (h, w) = (g.shape(c[i])[2], g.shape(c[i])[3]);
        let up = g.upsample_bilinear(out[i + 1], h, w)?;
        let lat = conv(g, p, &format!("ms.lat{}", i + 2), c[i], 1, 0)?;
        out[i] = g.add(up, lat)?;
    }
    Ok(out)
}

/// `N2 = P2`, `N_i = down_i(N_{i-1}) + P_i`, and the fused map at
/// `fuse_level`: finer levels are box-downsampled, coarser ones bilinearly
/// upsampled, then all four are summed.
pub fn bottom_up<T: Scalar>(g: &mut Graph<T>, cfg: &ModelConfig, p: &ParamVars, pyr: &[Var; 4]) -> Result<([Var; 4], Var), TensorError> {
    let mut n = *pyr;
    for i in 1..4 {
        let down = conv(g, p, &format!("ms.down{}", i + 2), n[i - 1], 2, 1)?;
        n[i] = g.add(down, pyr[i])?;
    }
    let level = cfg.fuse_level - 2;
    let (th, tw) = (g.shape(n[level])[2], g.shape(n[level])[3]);
    let mut fused: Option<Var> = None;
    for (i, &v) in n.iter().enumerate() {
        let resized = match i.cmp(&level) {
            std::cmp::Ordering::Less => {
                let f = 1 << (level - i);
                g.pool(v, PoolMode::Avg, f, f)?
            }
            std::cmp::Ordering::Equal => v,
            std::cmp::Ordering::Greater => g.upsample_bilinear(v, th, tw)?,
        };
        fused = Some(match fused {
            Some(acc) => g.add(acc, resized)?,
            None => resized,
        });
    }
    Ok((n, fused.expect("four levels")))
}

/// `M_c = sigmoid(MLP(avg) + MLP(max))` as `[N, C, 1, 1]`, and `M_c * F`.
pub fn channel_attention<T: Scalar>(g: &mut Graph<T>, p: &ParamVars, f: Var) -> Result<(Var, Var), TensorError> {
    let [n, c] = [g.shape(f)[0], g.shape(f)[1]];
    let mlp = |g: &mut Graph<T>, mode: PoolMode| -> Result<Var, TensorError> {
        let pooled = g.pool(f, mode, 0, 0)?;
        let v = g.reshape(pooled, &[n, c])?;
        let h = dense(g, p, "ea.mlp1", v)?;
        let h = g.relu(h)?;
        dense(g, p, "ea.mlp2", h)
    };
    let a = mlp(g, PoolMode::GlobalAvg)?;
    let m = mlp(g, PoolMode::GlobalMax)?;
    let s = g.add(a, m)?;
    let s = g.sigmoid(s)?;
    let mc = g.reshape(s, &[n, c, 1, 1])?;
    let out = g.mul(f, mc)?;
    Ok((mc, out))
}

/// `M_s = sigmoid(conv7x7([avg_c; max_c]))` as `[N, 1, H, W]`, and `M_s * F'`.
pub fn spatial_attention<T: Scalar>(g: &mut Graph<T>, p: &ParamVars, f: Var) -> Result<(Var, Var), TensorError> {
    let avg = g.reduce_channel(f, ChannelReduce::Avg)?;
    let max = g.reduce_channel(f, ChannelReduce::Max)?;
    let cat = g.concat_channels(&[avg, max])?;
    let s = conv(g, p, "ea.spatial", cat, 1, 3)?;
    let ms = g.sigmoid(s)?;
    let out = g.mul(f, ms)?;
    Ok((ms, out))
}

/// Full forward pass on `x` (`[N, 3, S, S]`, already offset).
pub fn forward<T: Scalar>(g: &mut Graph<T>, cfg: &ModelConfig, p: &ParamVars, x: Var) -> Result<ForwardVars, NetError> {
    let stages = extract_stages(g, cfg, p, x)?;
    let (td, bu, encoded) = if cfg.enable_ms {
        let td = top_down(g, p, &stages)?;
        let (bu, fused) = bottom_up(g, cfg, p, &td)?;
        (Some(td), Some(bu), fused)
    } else {
        (None, None, stages[3])
    };
    let (attention, head_input) = if cfg.enable_ea {
        let (mc, fp) = channel_attention(g, p, encoded)?;
        let (ms, fa) = spatial_attention(g, p, fp)?;
        (Some((mc, fp, ms, fa)), fa)
    } else {
        (None, encoded)
    };
    let flat = g.flatten(head_input)?;
    let h = dense(g, p, "head.fc1", flat)?;
    let h = g.relu(h)?;
    let score = dense(g, p, "head.fc2", h)?;
    Ok(ForwardVars {
        stages,
        top_down: td,
        bottom_up: bu,
        encoded,
        attention,
        head_input,
        score,
    })
}
