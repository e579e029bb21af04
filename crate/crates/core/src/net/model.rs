use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::layers::{forward, ParamVars};
use super::{ModelConfig, NetError, INPUT_OFFSET};
use crate::image::ImageBuf;
use crate::rng::rng;
use crate::tensor::{Graph, ParamStore, Scalar, Tensor};

/// A configuration with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub cfg: ModelConfig,
    pub params: ParamStore<f32>,
}

/// Intermediate maps of one forward pass, for inspection.
#[derive(Clone, Debug)]
pub struct FeatureMaps {
    pub stages: [Tensor<f32>; 4],
    pub top_down: Option<[Tensor<f32>; 4]>,
    pub bottom_up: Option<[Tensor<f32>; 4]>,
    pub encoded: Tensor<f32>,
    pub channel_weights: Option<Tensor<f32>>,
    pub spatial_weights: Option<Tensor<f32>>,
    pub head_input: Tensor<f32>,
    pub score: f64,
}

/// Standard deviation for a weight tensor. The last conv of every residual
/// branch starts at zero so each block begins as an identity map.
fn init_std(name: &str, shape: &[usize]) -> f64 {
    if name.ends_with(".conv3.w") {
        return 0.0;
    }
    let fan_in: usize = if shape.len() == 4 { shape[1..].iter().product() } else { shape[0] };
    let gain = if name.starts_with("ms.lat") || name.starts_with("ea.spatial") || name == "head.fc2.w" || name == "ea.mlp2.w" {
        1.0
    } else {
        2.0
    };
    (gain / fan_in as f64).sqrt()
}

impl Model {
    /// He-initialised model; biases start at zero.
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self, NetError> {
        cfg.validate()?;
        let mut r = rng(seed);
        let mut params = ParamStore::new();
        for (name, shape) in cfg.layer_list() {
            let len: usize = shape.iter().product();
            let std = if name.ends_with(".b") { 0.0 } else { init_std(&name, &shape) };
            let data: Vec<f32> = if std == 0.0 {
                vec![0.0; len]
            } else {
                let d = Normal::new(0.0, std).expect("positive std");
                (0..len).map(|_| d.sample(&mut r) as f32).collect()
            };
            params.insert(name, Tensor::new(&shape, data)?);
        }
        Ok(Self { cfg, params })
    }

    pub fn param_count(&self) -> usize {
        self.params.scalar_count()
    }

    pub fn check_image(&self, img: &ImageBuf) -> Result<(), NetError> {
        let s = self.cfg.input_size;
        if img.height() != s || img.width() != s {
            return Err(NetError::InputSize {
                height: img.height(),
                width: img.width(),
                expected: s,
            });
        }
        Ok(())
    }

    /// Batch tensor `[N, 3, S, S]` with the input offset applied.
    pub fn input_tensor<T: Scalar>(&self, images: &[&ImageBuf]) -> Result<Tensor<T>, NetError> {
        let s = self.cfg.input_size;
        let mut data = Vec::with_capacity(images.len() * 3 * s * s);
        for img in images {
            self.check_image(img)?;
            data.extend(img.to_planar(INPUT_OFFSET).into_iter().map(|v| T::from_f64_lossy(v as f64)));
        }
        Ok(Tensor::new(&[images.len(), 3, s, s], data)?)
    }

    /// Quality score for one image.
    pub fn predict(&self, img: &ImageBuf) -> Result<f64, NetError> {
        let mut g = Graph::<f32>::new();
        let p = ParamVars::bind(&mut g, &self.params)?;
        let x = g.input(self.input_tensor(&[img])?);
        let out = forward(&mut g, &self.cfg, &p, x)?;
        Ok(g.value(out.score).data()[0] as f64)
    }

    /// Scores for many images, evaluated in parallel. Output order follows
    /// input order.
    pub fn predict_batch(&self, images: &[ImageBuf]) -> Result<Vec<f64>, NetError> {
        images.par_iter().map(|img| self.predict(img)).collect()
    }

    pub fn features(&self, img: &ImageBuf) -> Result<FeatureMaps, NetError> {
        let mut g = Graph::<f32>::new();
        let p = ParamVars::bind(&mut g, &self.params)?;
        let x = g.input(self.input_tensor(&[img])?);
        let out = forward(&mut g, &self.cfg, &p, x)?;
        let get = |v| g.value(v).clone();
        Ok(FeatureMaps {
            stages: out.stages.map(get),
            top_down: out.top_down.map(|a| a.map(get)),
            bottom_up: out.bottom_up.map(|a| a.map(get)),
            encoded: get(out.encoded),
            channel_weights: out.attention.map(|a| get(a.0)),
            spatial_weights: out.attention.map(|a| get(a.2)),
            head_input: get(out.head_input),
            score: g.value(out.score).data()[0] as f64,
        })
    }
}
