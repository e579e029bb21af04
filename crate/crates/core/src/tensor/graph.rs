//! The differentiation tape. Every operation appends a node holding its
//! value; [`Graph::backward`] walks the nodes in reverse insertion order,
//! which is a valid reverse topological order because inputs always exist
//! before the ops that consume them.

use std::collections::{BTreeMap, HashMap};

use super::kernels::{self, ConvGeom};
use super::{ParamStore, Scalar, Tensor, TensorError};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    Max,
    Avg,
    GlobalAvg,
    GlobalMax,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelReduce {
    Max,
    Avg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Elementwise {
    Add,
    Mul,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d {
        input: Var,
        weight: Var,
        bias: Var,
        geom: ConvGeom,
    },
    Pool {
        input: Var,
        is_max: bool,
        window: (usize, usize),
        stride: (usize, usize),
        argmax: Vec<usize>,
    },
    ReduceChannel {
        input: Var,
        argmax: Option<Vec<usize>>,
    },
    Upsample {
        input: Var,
    },
    Activation {
        input: Var,
        kind: Activation,
    },
    Linear {
        input: Var,
        weight: Var,
        bias: Var,
    },
    Elementwise {
        a: Var,
        b: Var,
        kind: Elementwise,
    },
    Mse {
        pred: Var,
        target: Var,
    },
    Concat {
        inputs: Vec<Var>,
    },
    Reshape {
        input: Var,
    },
    Sum {
        input: Var,
    },
    Scale {
        input: Var,
        factor: f64,
    },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op,
}

/// A recording of one forward evaluation.
#[derive(Debug)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Tensor<T>>>,
    params: HashMap<String, Var>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
            params: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn check(&self, v: Var) -> Result<(), TensorError> {
        if v.0 < self.nodes.len() {
            Ok(())
        } else {
            Err(TensorError::UnknownVar(v.0))
        }
    }

    /// A constant leaf (input data, targets).
    pub fn input(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Load a named parameter as a leaf. Loading the same name twice returns
    /// the same node, so shared weights accumulate one gradient.
    pub fn param(&mut self, store: &ParamStore<T>, name: &str) -> Result<Var, TensorError> {
        if let Some(&v) = self.params.get(name) {
            return Ok(v);
        }
        let value = store.get(name).ok_or_else(|| TensorError::UnknownParam(name.to_string()))?.clone();
        let v = self.push(value, Op::Leaf);
        self.params.insert(name.to_string(), v);
        Ok(v)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Var, stride: usize, padding: usize) -> Result<Var, TensorError> {
        const OP: &str = "conv2d";
        for v in [input, weight, bias] {
            self.check(v)?;
        }
        let [n, c, h, w] = self.value(input).dims4(OP)?;
        let [k, wc, kh, kw] = match self.shape(weight) {
            &[a, b, c, d] => [a, b, c, d],
            other => return Err(TensorError::shape(OP, "weight rank", format!("expected [K,C,kh,kw], got {other:?}"))),
        };
        if wc != c {
            return Err(TensorError::shape(OP, "channels", format!("input has {c}, weight expects {wc}")));
        }
        if self.shape(bias) != [k] {
            return Err(TensorError::shape(OP, "bias", format!("expected [{k}], got {:?}", self.shape(bias))));
        }
        if stride == 0 {
            return Err(TensorError::shape(OP, "stride", "stride must be positive"));
        }
        if kh > h + 2 * padding {
            return Err(TensorError::shape(OP, "height", format!("kernel {kh} exceeds padded height {}", h + 2 * padding)));
        }
        if kw > w + 2 * padding {
            return Err(TensorError::shape(OP, "width", format!("kernel {kw} exceeds padded width {}", w + 2 * padding)));
        }
        let geom = ConvGeom {
            n,
            c,
            h,
            w,
            k,
            kh,
            kw,
            stride,
            padding,
            oh: (h + 2 * padding - kh) / stride + 1,
            ow: (w + 2 * padding - kw) / stride + 1,
        };
        let out = kernels::conv2d_forward(&geom, self.value(input).data(), self.value(weight).data(), self.value(bias).data());
        let value = Tensor::from_parts(vec![n, k, geom.oh, geom.ow], out);
        Ok(self.push(value, Op::Conv2d { input, weight, bias, geom }))
    }

    pub fn pool(&mut self, input: Var, mode: PoolMode, window: usize, stride: usize) -> Result<Var, TensorError> {
        const OP: &str = "pool";
        self.check(input)?;
        let dims @ [n, c, h, w] = self.value(input).dims4(OP)?;
        let (win, st, is_max) = match mode {
            PoolMode::GlobalAvg => ((h, w), (1, 1), false),
            PoolMode::GlobalMax => ((h, w), (1, 1), true),
            PoolMode::Max | PoolMode::Avg => {
                if window == 0 || stride == 0 {
                    return Err(TensorError::shape(OP, "window", "window and stride must be positive"));
                }
                if window > h {
                    return Err(TensorError::shape(OP, "height", format!("window {window} exceeds height {h}")));
                }
                if window > w {
                    return Err(TensorError::shape(OP, "width", format!("window {window} exceeds width {w}")));
                }
                ((window, window), (stride, stride), mode == PoolMode::Max)
            }
        };
        let (out, argmax, oh, ow) = kernels::pool_forward(dims, self.value(input).data(), win, st, is_max);
        let value = Tensor::from_parts(vec![n, c, oh, ow], out);
        Ok(self.push(
            value,
            Op::Pool {
                input,
                is_max,
                window: win,
                stride: st,
                argmax,
            },
        ))
    }

    pub fn reduce_channel(&mut self, input: Var, mode: ChannelReduce) -> Result<Var, TensorError> {
        self.check(input)?;
        let dims @ [n, _, h, w] = self.value(input).dims4("reduce_channel")?;
        let is_max = mode == ChannelReduce::Max;
        let (out, arg) = kernels::reduce_channel_forward(dims, self.value(input).data(), is_max);
        let value = Tensor::from_parts(vec![n, 1, h, w], out);
        Ok(self.push(
            value,
            Op::ReduceChannel {
                input,
                argmax: is_max.then_some(arg),
            },
        ))
    }

    /// Corner-aligned bilinear resize.
    pub fn upsample_bilinear(&mut self, input: Var, out_h: usize, out_w: usize) -> Result<Var, TensorError> {
        const OP: &str = "upsample_bilinear";
        self.check(input)?;
        if out_h == 0 || out_w == 0 {
            return Err(TensorError::shape(OP, "output size", "output size must be positive"));
        }
        let dims @ [n, c, _, _] = self.value(input).dims4(OP)?;
        let out = kernels::upsample_forward(dims, self.value(input).data(), out_h, out_w);
        let value = Tensor::from_parts(vec![n, c, out_h, out_w], out);
        Ok(self.push(value, Op::Upsample { input }))
    }

    pub fn activation(&mut self, input: Var, kind: Activation) -> Result<Var, TensorError> {
        self.check(input)?;
        let one = T::one();
        let value = match kind {
            Activation::Relu => self.value(input).map(|v| v.max(T::zero())),
            Activation::Sigmoid => self.value(input).map(|v| one / (one + (-v).exp())),
        };
        Ok(self.push(value, Op::Activation { input, kind }))
    }

    pub fn relu(&mut self, input: Var) -> Result<Var, TensorError> {
        self.activation(input, Activation::Relu)
    }

    pub fn sigmoid(&mut self, input: Var) -> Result<Var, TensorError> {
        self.activation(input, Activation::Sigmoid)
    }

    /// `input [N, D] @ weight [D, M] + bias [M]`.
    pub fn linear(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var, TensorError> {
        const OP: &str = "linear";
        for v in [input, weight, bias] {
            self.check(v)?;
        }
        let (n, d) = match self.shape(input) {
            &[n, d] => (n, d),
            other => return Err(TensorError::shape(OP, "input rank", format!("expected [N,D], got {other:?}"))),
        };
        let (wd, m) = match self.shape(weight) {
            &[a, b] => (a, b),
            other => return Err(TensorError::shape(OP, "weight rank", format!("expected [D,M], got {other:?}"))),
        };
        if wd != d {
            return Err(TensorError::shape(OP, "inner", format!("input has {d} features, weight expects {wd}")));
        }
        if self.shape(bias) != [m] {
            return Err(TensorError::shape(OP, "bias", format!("expected [{m}], got {:?}", self.shape(bias))));
        }
        let mut out = Vec::with_capacity(n * m);
        for _ in 0..n {
            out.extend_from_slice(self.value(bias).data());
        }
        T::gemm(
            n,
            d,
            m,
            self.value(input).data(),
            (d, 1),
            self.value(weight).data(),
            (m, 1),
            &mut out,
            (m, 1),
            true,
        );
        let value = Tensor::from_parts(vec![n, m], out);
        Ok(self.push(value, Op::Linear { input, weight, bias }))
    }

    pub fn elementwise(&mut self, a: Var, b: Var, kind: Elementwise) -> Result<Var, TensorError> {
        self.check(a)?;
        self.check(b)?;
        let (sa, sb) = (self.shape(a), self.shape(b));
        let out_shape = kernels::broadcast_shape(sa, sb)
            .ok_or_else(|| TensorError::shape("elementwise", "broadcast", format!("{sa:?} and {sb:?} are incompatible")))?;
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let data: Vec<T> = if sa == sb {
            match kind {
                Elementwise::Add => da.iter().zip(db).map(|(&x, &y)| x + y).collect(),
                Elementwise::Mul => da.iter().zip(db).map(|(&x, &y)| x * y).collect(),
            }
        } else {
            let ia = kernels::broadcast_index(sa, &out_shape);
            let ib = kernels::broadcast_index(sb, &out_shape);
            match kind {
                Elementwise::Add => ia.iter().zip(&ib).map(|(&i, &j)| da[i] + db[j]).collect(),
                Elementwise::Mul => ia.iter().zip(&ib).map(|(&i, &j)| da[i] * db[j]).collect(),
            }
        };
        let value = Tensor::from_parts(out_shape, data);
        Ok(self.push(value, Op::Elementwise { a, b, kind }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.elementwise(a, b, Elementwise::Add)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.elementwise(a, b, Elementwise::Mul)
    }

    /// Mean squared error over all elements, as a one-element tensor.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var, TensorError> {
        self.check(pred)?;
        self.check(target)?;
        let (p, t) = (self.value(pred), self.value(target));
        if p.len() != t.len() {
            return Err(TensorError::shape(
                "mse_loss",
                "batch",
                format!("pred has {} values, target has {}", p.len(), t.len()),
            ));
        }
        if p.is_empty() {
            return Err(TensorError::EmptyBatch("mse_loss"));
        }
        let n = T::from_usize(p.len()).unwrap();
        let sum: T = p.data().iter().zip(t.data()).map(|(&a, &b)| (a - b) * (a - b)).sum();
        Ok(self.push(Tensor::scalar(sum / n), Op::Mse { pred, target }))
    }

    /// Concatenate 4-D tensors along the channel axis.
    pub fn concat_channels(&mut self, inputs: &[Var]) -> Result<Var, TensorError> {
        const OP: &str = "concat_channels";
        let first = *inputs.first().ok_or(TensorError::EmptyBatch(OP))?;
        for &v in inputs {
            self.check(v)?;
        }
        let [n, _, h, w] = self.value(first).dims4(OP)?;
        let mut dims = Vec::with_capacity(inputs.len());
        for &v in inputs {
            let [vn, vc, vh, vw] = self.value(v).dims4(OP)?;
            if vn != n {
                return Err(TensorError::shape(OP, "batch", format!("{vn} != {n}")));
            }
            if vh != h {
                return Err(TensorError::shape(OP, "height", format!("{vh} != {h}")));
            }
            if vw != w {
                return Err(TensorError::shape(OP, "width", format!("{vw} != {w}")));
            }
            dims.push(vc);
        }
        let total_c: usize = dims.iter().sum();
        let plane = h * w;
        let mut out = Vec::with_capacity(n * total_c * plane);
        for b in 0..n {
            for (&v, &c) in inputs.iter().zip(&dims) {
                out.extend_from_slice(&self.value(v).data()[b * c * plane..(b + 1) * c * plane]);
            }
        }
        let value = Tensor::from_parts(vec![n, total_c, h, w], out);
        Ok(self.push(value, Op::Concat { inputs: inputs.to_vec() }))
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var, TensorError> {
        self.check(input)?;
        let value = self.value(input).reshape(shape)?;
        Ok(self.push(value, Op::Reshape { input }))
    }

    /// `[N, ...] -> [N, prod(...)]`.
    pub fn flatten(&mut self, input: Var) -> Result<Var, TensorError> {
        let shape = self.shape(input).to_vec();
        let n = shape[0];
        let rest: usize = shape[1..].iter().product();
        self.reshape(input, &[n, rest])
    }

    pub fn sum(&mut self, input: Var) -> Result<Var, TensorError> {
        self.check(input)?;
        let total: T = self.value(input).data().iter().copied().sum();
        Ok(self.push(Tensor::scalar(total), Op::Sum { input }))
    }

    pub fn scale(&mut self, input: Var, factor: f64) -> Result<Var, TensorError> {
        self.check(input)?;
        let f = T::from_f64_lossy(factor);
        let value = self.value(input).map(|v| v * f);
        Ok(self.push(value, Op::Scale { input, factor }))
    }

    /// Gradient of `loss` with respect to every node it depends on.
    ///
    /// Gradients from a previous call are discarded first, so calling this
    /// twice yields the same result rather than accumulating.
    pub fn backward(&mut self, loss: Var) -> Result<(), TensorError> {
        self.check(loss)?;
        if self.value(loss).len() != 1 {
            return Err(TensorError::NonScalarLoss(self.shape(loss).to_vec()));
        }
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        self.grads[loss.0] = Some(Tensor::full(self.shape(loss), T::one()));
        for idx in (0..=loss.0).rev() {
            let Some(grad) = self.grads[idx].take() else {
                continue;
            };
            let contributions = self.node_backward(idx, &grad)?;
            self.grads[idx] = Some(grad);
            for (var, g) in contributions {
                match &mut self.grads[var.0] {
                    Some(existing) => existing.add_assign(&g),
                    slot @ None => *slot = Some(g),
                }
            }
        }
        Ok(())
    }

    fn node_backward(&self, idx: usize, grad: &Tensor<T>) -> Result<Vec<(Var, Tensor<T>)>, TensorError> {
        let node = &self.nodes[idx];
        let g = grad.data();
        let like = |v: Var, data: Vec<T>| Tensor::from_parts(self.shape(v).to_vec(), data);
        let out = match &node.op {
            Op::Leaf => Vec::new(),
            Op::Conv2d {
                input,
                weight,
                bias,
                geom,
            } => {
                let (di, dw, db) = kernels::conv2d_backward(geom, self.value(*input).data(), self.value(*weight).data(), g);
                vec![(*input, like(*input, di)), (*weight, like(*weight, dw)), (*bias, like(*bias, db))]
            }
            Op::Pool {
                input,
                is_max,
                window,
                stride,
                argmax,
            } => {
                let dims = self.value(*input).dims4("pool")?;
                let data = if *is_max {
                    let mut d = vec![T::zero(); self.value(*input).len()];
                    for (&i, &gv) in argmax.iter().zip(g) {
                        d[i] = d[i] + gv;
                    }
                    d
                } else {
                    let [_, _, oh, ow] = node.value.dims4("pool")?;
                    kernels::avg_pool_backward(dims, g, *window, *stride, oh, ow)
                };
                vec![(*input, like(*input, data))]
            }
            Op::ReduceChannel { input, argmax } => {
                let [n, c, h, w] = self.value(*input).dims4("reduce_channel")?;
                let plane = h * w;
                let mut d = vec![T::zero(); n * c * plane];
                match argmax {
                    Some(arg) => {
                        for (&i, &gv) in arg.iter().zip(g) {
                            d[i] = d[i] + gv;
                        }
                    }
                    None => {
                        let inv = T::one() / T::from_usize(c).unwrap();
                        for b in 0..n {
                            for ch in 0..c {
                                for p in 0..plane {
                                    d[(b * c + ch) * plane + p] = g[b * plane + p] * inv;
                                }
                            }
                        }
                    }
                }
                vec![(*input, like(*input, d))]
            }
            Op::Upsample { input } => {
                let dims = self.value(*input).dims4("upsample_bilinear")?;
                let [_, _, oh, ow] = node.value.dims4("upsample_bilinear")?;
                vec![(*input, like(*input, kernels::upsample_backward(dims, g, oh, ow)))]
            }
            Op::Activation { input, kind } => {
                let y = node.value.data();
                let d = match kind {
                    Activation::Relu => y.iter().zip(g).map(|(&y, &gv)| if y > T::zero() { gv } else { T::zero() }).collect(),
                    Activation::Sigmoid => y.iter().zip(g).map(|(&y, &gv)| gv * y * (T::one() - y)).collect(),
                };
                vec![(*input, like(*input, d))]
            }
            Op::Linear { input, weight, bias } => {
                let (n, d) = (self.shape(*input)[0], self.shape(*input)[1]);
                let m = self.shape(*weight)[1];
                let mut dx = vec![T::zero(); n * d];
                // dX = G [N x M] * W^T [M x D]
                T::gemm(n, m, d, g, (m, 1), self.value(*weight).data(), (1, m), &mut dx, (d, 1), false);
                let mut dw = vec![T::zero(); d * m];
                // dW = X^T [D x N] * G [N x M]
                T::gemm(d, n, m, self.value(*input).data(), (1, d), g, (m, 1), &mut dw, (m, 1), false);
                let mut db = vec![T::zero(); m];
                for row in g.chunks(m) {
                    for (a, &b) in db.iter_mut().zip(row) {
                        *a = *a + b;
                    }
                }
                vec![(*input, like(*input, dx)), (*weight, like(*weight, dw)), (*bias, like(*bias, db))]
            }
            Op::Elementwise { a, b, kind } => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                let out_shape = node.value.shape();
                if sa == sb {
                    let (ga, gb): (Vec<T>, Vec<T>) = match kind {
                        Elementwise::Add => (g.to_vec(), g.to_vec()),
                        Elementwise::Mul => (
                            g.iter().zip(vb).map(|(&gv, &y)| gv * y).collect(),
                            g.iter().zip(va).map(|(&gv, &x)| gv * x).collect(),
                        ),
                    };
                    vec![(*a, like(*a, ga)), (*b, like(*b, gb))]
                } else {
                    let ia = kernels::broadcast_index(sa, out_shape);
                    let ib = kernels::broadcast_index(sb, out_shape);
                    let mut ga = vec![T::zero(); va.len()];
                    let mut gb = vec![T::zero(); vb.len()];
                    for ((&i, &j), &gv) in ia.iter().zip(&ib).zip(g) {
                        match kind {
                            Elementwise::Add => {
                                ga[i] = ga[i] + gv;
                                gb[j] = gb[j] + gv;
                            }
                            Elementwise::Mul => {
                                ga[i] = ga[i] + gv * vb[j];
                                gb[j] = gb[j] + gv * va[i];
                            }
                        }
                    }
                    vec![(*a, like(*a, ga)), (*b, like(*b, gb))]
                }
            }
            Op::Mse { pred, target } => {
                let (p, t) = (self.value(*pred).data(), self.value(*target).data());
                let scale = g[0] * T::from_f64_lossy(2.0) / T::from_usize(p.len()).unwrap();
                let gp: Vec<T> = p.iter().zip(t).map(|(&a, &b)| (a - b) * scale).collect();
                let gt: Vec<T> = gp.iter().map(|&v| -v).collect();
                vec![(*pred, like(*pred, gp)), (*target, like(*target, gt))]
            }
            Op::Concat { inputs } => {
                let [n, total_c, h, w] = node.value.dims4("concat_channels")?;
                let plane = h * w;
                let mut offset = 0;
                let mut out = Vec::with_capacity(inputs.len());
                for &v in inputs {
                    let c = self.shape(v)[1];
                    let mut d = Vec::with_capacity(n * c * plane);
                    for b in 0..n {
                        let start = (b * total_c + offset) * plane;
                        d.extend_from_slice(&g[start..start + c * plane]);
                    }
                    offset += c;
                    out.push((v, like(v, d)));
                }
                out
            }
            Op::Reshape { input } => vec![(*input, like(*input, g.to_vec()))],
            Op::Sum { input } => {
                let n = self.value(*input).len();
                vec![(*input, like(*input, vec![g[0]; n]))]
            }
            Op::Scale { input, factor } => {
                let f = T::from_f64_lossy(*factor);
                vec![(*input, like(*input, g.iter().map(|&v| v * f).collect()))]
            }
        };
        Ok(out)
    }

    /// Gradient of the last [`backward`](Self::backward) call, if the node
    /// was reachable from the loss.
    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradients for every named parameter loaded on this tape.
    pub fn param_grads(&self) -> BTreeMap<String, Tensor<T>> {
        self.params
            .iter()
            .filter_map(|(name, &v)| self.grad(v).map(|g| (name.clone(), g.clone())))
            .collect()
    }
}
