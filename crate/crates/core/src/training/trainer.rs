use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::{total_loss, LossBreakdown, LossWeights};
use super::sgd::sgd_step;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::neural::{
    init_params, unet_backward, unet_forward, unet_forward_trace, NetworkParams, NetworkSpec,
    UNetOutputs,
};
use crate::scene::derive_seed;

const STREAM_SHUFFLE: u64 = 0x5348;

/// Optimizer and schedule settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub weights: LossWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.03,
            momentum: 0.9,
            epochs: 200,
            batch_size: 8,
            seed: 0,
            weights: LossWeights::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be finite and >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Mean training and validation losses of one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train: LossBreakdown,
    pub val: LossBreakdown,
    pub wall_ms: u64,
}

/// One line of the JSON-lines training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLogLine {
    pub epoch: usize,
    pub seg_train: f64,
    pub seg_val: f64,
    pub msex_train: f64,
    pub msex_val: f64,
    pub msey_train: f64,
    pub msey_val: f64,
    pub wall_ms: u64,
}

impl From<&EpochRecord> for EpochLogLine {
    fn from(r: &EpochRecord) -> Self {
        Self {
            epoch: r.epoch,
            seg_train: r.train.seg_loss,
            seg_val: r.val.seg_loss,
            msex_train: r.train.mse_x,
            msex_val: r.val.mse_x,
            msey_train: r.train.mse_y,
            msey_val: r.val.mse_y,
            wall_ms: r.wall_ms,
        }
    }
}

pub struct TrainOutcome {
    pub final_params: NetworkParams<f32>,
    pub velocity: NetworkParams<f32>,
    /// Parameters at the epoch with the lowest validation total loss.
    pub best_params: NetworkParams<f32>,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

/// Loss and parameter gradient for one sample.
fn sample_gradient(
    params: &NetworkParams<f32>,
    data: &Dataset,
    index: usize,
    weights: &LossWeights,
) -> Result<(LossBreakdown, NetworkParams<f32>)> {
    let input = data.input(index);
    let (out, trace) = unet_forward_trace(params, &input)?;
    let (loss, grad_out) = total_loss(&out, &[&data.samples[index].targets], weights)?;
    let mut grads = params.zeros_like();
    unet_backward(params, &trace, &grad_out, &mut grads)?;
    Ok((loss, grads))
}

/// Mean loss of `params` over a dataset, one sample at a time.
pub fn evaluate_loss(
    params: &NetworkParams<f32>,
    data: &Dataset,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    let per_sample = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let out = unet_forward(params, &data.input(i))?;
            total_loss(&out, &[&data.samples[i].targets], weights).map(|(l, _)| l)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut mean = LossBreakdown::default();
    let inv = 1.0 / data.len().max(1) as f64;
    for l in &per_sample {
        mean.accumulate(l, inv);
    }
    Ok(mean)
}

/// Network outputs for every sample, in dataset order.
pub fn predict(params: &NetworkParams<f32>, data: &Dataset) -> Result<Vec<UNetOutputs<f32>>> {
    (0..data.len())
        .into_par_iter()
        .map(|i| unet_forward(params, &data.input(i)))
        .collect()
}

/// Mini-batch SGD with momentum. Per-sample gradients are reduced in sample
/// order, so results do not depend on the thread count.
pub fn train(
    train_set: &Dataset,
    val_set: &Dataset,
    spec: &NetworkSpec,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    if train_set.channels != spec.in_channels || val_set.channels != spec.in_channels {
        return Err(Error::Shape(format!(
            "network expects {} channels, datasets have {} / {}",
            spec.in_channels, train_set.channels, val_set.channels
        )));
    }
    let mut params: NetworkParams<f32> = init_params(spec, config.seed);
    let mut velocity = params.zeros_like();
    let mut best = (f64::INFINITY, 0, params.clone());
    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..config.epochs {
        let started = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_SHUFFLE, epoch as u64));
        order.shuffle(&mut rng);
        let mut train_loss = LossBreakdown::default();
        let inv_n = 1.0 / train_set.len() as f64;

        for batch in order.chunks(config.batch_size) {
            let results = batch
                .par_iter()
                .map(|&i| sample_gradient(&params, train_set, i, &config.weights))
                .collect::<Result<Vec<_>>>()?;
            let mut grads = params.zeros_like();
            let scale = 1.0 / batch.len() as f32;
            for (loss, g) in &results {
                if !loss.is_finite() {
                    return Err(Error::Diverged {
                        epoch,
                        loss: loss.total,
                    });
                }
                train_loss.accumulate(loss, inv_n);
                grads.add_scaled(g, scale);
            }
            sgd_step(
                &mut params,
                &grads,
                &mut velocity,
                config.learning_rate,
                config.momentum,
            );
        }

        let val_loss = if val_set.is_empty() {
            LossBreakdown::default()
        } else {
            evaluate_loss(&params, val_set, &config.weights)?
        };
        if !train_loss.is_finite() || !val_loss.is_finite() || !params.is_finite() {
            return Err(Error::Diverged {
                epoch,
                loss: train_loss.total,
            });
        }
        let record = EpochRecord {
            epoch,
            train: train_loss,
            val: val_loss,
            wall_ms: started.elapsed().as_millis() as u64,
        };
        if val_loss.total < best.0 {
            best = (val_loss.total, epoch, params.clone());
        }
        on_epoch(&record);
        history.push(record);
    }
    Ok(TrainOutcome {
        final_params: params,
        velocity,
        best_params: best.2,
        best_epoch: best.1,
        history,
    })
}
