use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layers::{forward, ParamVars};
use super::{Model, NetError};
use crate::image::ImageBuf;
use crate::rng::{derive, rng};
use crate::tensor::{Graph, Optimizer, OptimizerHyper, OptimizerKind, Tensor};

/// Samples per gradient graph. Fixed so results do not depend on the
/// worker count.
const CHUNK: usize = 4;

#[derive(Clone, Debug)]
pub struct Sample {
    pub image: ImageBuf,
    pub target: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Adam,
            lr: 1e-4,
            batch_size: 16,
            epochs: 30,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean squared error over the epoch's batches, each measured before
    /// its update.
    pub train_mse: f64,
    /// Mean squared error on the validation set after the epoch; NaN when
    /// there is none.
    pub val_mse: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub curve: Vec<EpochLoss>,
    pub optimizer: Optimizer<f32>,
}

impl TrainOutcome {
    /// Loss curve as `epoch,train_mse,val_mse` CSV.
    pub fn curve_csv(&self) -> String {
        let mut s = String::from("epoch,train_mse,val_mse\n");
        for e in &self.curve {
            s.push_str(&format!("{},{:.8},{:.8}\n", e.epoch, e.train_mse, e.val_mse));
        }
        s
    }
}

/// Mean squared error of the model's predictions.
pub fn evaluate_mse(model: &Model, samples: &[Sample]) -> Result<f64, NetError> {
    if samples.is_empty() {
        return Ok(f64::NAN);
    }
    let preds: Vec<f64> = samples.par_iter().map(|s| model.predict(&s.image)).collect::<Result<_, _>>()?;
    Ok(preds.iter().zip(samples).map(|(p, s)| (p - s.target).powi(2)).sum::<f64>() / samples.len() as f64)
}

/// Squared-error sum and gradient sum (scaled by `1 / batch`) for a chunk.
fn chunk_grad(model: &Model, chunk: &[&Sample], batch: usize) -> Result<(f64, BTreeMap<String, Tensor<f32>>), NetError> {
    let mut g = Graph::<f32>::new();
    let p = ParamVars::bind(&mut g, &model.params)?;
    let images: Vec<&ImageBuf> = chunk.iter().map(|s| &s.image).collect();
    let x = g.input(model.input_tensor(&images)?);
    let out = forward(&mut g, &model.cfg, &p, x)?;
    let targets = Tensor::new(&[chunk.len(), 1], chunk.iter().map(|s| s.target as f32).collect())?;
    let t = g.input(targets);
    let mse = g.mse_loss(out.score, t)?;
    let loss = g.scale(mse, chunk.len() as f64 / batch as f64)?;
    g.backward(loss)?;
    let sq = g.value(mse).item() as f64 * chunk.len() as f64;
    Ok((sq, g.param_grads()))
}

fn accumulate(acc: &mut BTreeMap<String, Tensor<f32>>, add: BTreeMap<String, Tensor<f32>>) {
    for (name, t) in add {
        match acc.get_mut(&name) {
            Some(a) => a.data_mut().iter_mut().zip(t.data()).for_each(|(x, y)| *x += y),
            None => {
                acc.insert(name, t);
            }
        }
    }
}

/// Minimise mean squared error against the targets. The epoch order is
/// shuffled from `hyper.seed`; `on_epoch` sees each curve point as it is
/// produced.
pub fn train(
    model: &mut Model,
    train_set: &[Sample],
    val_set: &[Sample],
    hyper: &TrainHyper,
    mut on_epoch: impl FnMut(&EpochLoss),
) -> Result<TrainOutcome, NetError> {
    if train_set.is_empty() {
        return Err(NetError::EmptySplit("train"));
    }
    if hyper.batch_size == 0 {
        return Err(NetError::Config("batch_size must be positive".into()));
    }
    let mut opt = Optimizer::new(
        hyper.optimizer,
        OptimizerHyper {
            lr: hyper.lr,
            ..Default::default()
        },
    );
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut curve = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng(derive(hyper.seed, &[epoch as u64])));
        let mut sq_total = 0.0;
        for (bi, batch) in order.chunks(hyper.batch_size).enumerate() {
            let samples: Vec<&Sample> = batch.iter().map(|&i| &train_set[i]).collect();
            let parts: Vec<_> = samples
                .par_chunks(CHUNK)
                .map(|c| chunk_grad(model, c, samples.len()))
                .collect::<Result<_, _>>()?;
            let mut grads = BTreeMap::new();
            let mut sq = 0.0;
            for (s, g) in parts {
                sq += s;
                accumulate(&mut grads, g);
            }
            if !sq.is_finite() {
                return Err(NetError::NonFinite {
                    epoch,
                    batch: bi,
                    value: sq / samples.len() as f64,
                });
            }
            sq_total += sq;
            opt.step(&mut model.params, &grads)?;
        }
        let point = EpochLoss {
            epoch,
            train_mse: sq_total / train_set.len() as f64,
            val_mse: evaluate_mse(model, val_set)?,
        };
        log::info!("epoch {epoch}: train_mse {:.5} val_mse {:.5}", point.train_mse, point.val_mse);
        on_epoch(&point);
        curve.push(point);
    }
    Ok(TrainOutcome { curve, optimizer: opt })
}

impl Model {
    /// Set the final bias, e.g. to the mean training target.
    pub fn set_output_bias(&mut self, value: f64) {
        if let Some(b) = self.params.get_mut("head.fc2.b") {
            b.data_mut()[0] = value as f32;
        }
    }
}
