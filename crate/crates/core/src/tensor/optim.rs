use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ParamStore, Scalar, Tensor, TensorError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerHyper {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates for one parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments<T> {
    pub m: Tensor<T>,
    pub v: Tensor<T>,
}

#[derive(Clone, Debug)]
pub struct Optimizer<T> {
    pub kind: OptimizerKind,
    pub hyper: OptimizerHyper,
    /// Number of completed steps.
    pub steps: u64,
    pub moments: BTreeMap<String, Moments<T>>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind, hyper: OptimizerHyper) -> Self {
        Self {
            kind,
            hyper,
            steps: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn sgd(lr: f64) -> Self {
        Self::new(OptimizerKind::Sgd, OptimizerHyper { lr, ..Default::default() })
    }

    pub fn adam(hyper: OptimizerHyper) -> Self {
        Self::new(OptimizerKind::Adam, hyper)
    }

    /// Update every parameter in place. Each parameter must have a gradient;
    /// nothing is modified if one is missing.
    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &BTreeMap<String, Tensor<T>>) -> Result<(), TensorError> {
        for (name, value) in params.iter() {
            let g = grads.get(name).ok_or_else(|| TensorError::MissingGrad(name.clone()))?;
            if g.shape() != value.shape() {
                return Err(TensorError::shape("optimizer_step", name.clone(), format!("grad {:?} vs param {:?}", g.shape(), value.shape())));
            }
        }
        self.steps += 1;
        let h = self.hyper;
        let lr = T::from_f64_lossy(h.lr);
        match self.kind {
            OptimizerKind::Sgd => {
                for (name, value) in params.iter_mut() {
                    let g = &grads[name];
                    for (w, &gv) in value.data_mut().iter_mut().zip(g.data()) {
                        *w = *w - lr * gv;
                    }
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2) = (T::from_f64_lossy(h.beta1), T::from_f64_lossy(h.beta2));
                let one = T::one();
                let t = self.steps as i32;
                let c1 = T::from_f64_lossy(1.0 - h.beta1.powi(t));
                let c2 = T::from_f64_lossy(1.0 - h.beta2.powi(t));
                let eps = T::from_f64_lossy(h.eps);
                for (name, value) in params.iter_mut() {
                    let g = &grads[name];
                    let st = self.moments.entry(name.clone()).or_insert_with(|| Moments {
                        m: Tensor::zeros(value.shape()),
                        v: Tensor::zeros(value.shape()),
                    });
                    let (m, v) = (st.m.data_mut(), st.v.data_mut());
                    for (i, w) in value.data_mut().iter_mut().enumerate() {
                        let gv = g.data()[i];
                        m[i] = b1 * m[i] + (one - b1) * gv;
                        v[i] = b2 * v[i] + (one - b2) * gv * gv;
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}
