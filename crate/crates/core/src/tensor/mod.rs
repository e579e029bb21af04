//! Dense tensors with a reverse-mode differentiation tape.
//!
//! Layout is row-major `[N, C, H, W]` throughout. Values live in a
//! [`Graph`]; trainable weights live in a [`ParamStore`] and are loaded onto a
//! graph by name for each forward pass, so a store can be shared read-only by
//! concurrent forward evaluations.

mod array;
pub mod gradcheck;
mod graph;
mod kernels;
mod optim;
mod scalar;

use std::collections::BTreeMap;

pub use array::Tensor;
pub use graph::{Activation, ChannelReduce, Elementwise, Graph, PoolMode, Var};
pub use optim::{Moments, Optimizer, OptimizerHyper, OptimizerKind};
pub use scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("{op}: dimension error on {axis}: {detail}")]
    Shape { op: &'static str, axis: String, detail: String },
    #[error("shape {shape:?} needs {expected} values, got {actual}")]
    DataLength { shape: Vec<usize>, expected: usize, actual: usize },
    #[error("{0}: empty batch")]
    EmptyBatch(&'static str),
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("no gradient for parameter `{0}`")]
    MissingGrad(String),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("node {0} is not on this tape")]
    UnknownVar(usize),
}

impl TensorError {
    pub(crate) fn shape(op: &'static str, axis: impl Into<String>, detail: impl Into<String>) -> Self {
        Self::Shape {
            op,
            axis: axis.into(),
            detail: detail.into(),
        }
    }
}

/// Named trainable parameters, ordered by name.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParamStore<T> {
    params: BTreeMap<String, Tensor<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { params: BTreeMap::new() }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<T>) {
        self.params.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.params.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor<T>)> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor<T>)> {
        self.params.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.params.keys()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of trainable scalars.
    pub fn scalar_count(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            params: self.params.iter().map(|(k, v)| (k.clone(), v.cast())).collect(),
        }
    }
}
