//! Shared training loop, trained-model container and prediction.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use ventus_core::prep::{capacity_for, RegionCrop};
use ventus_core::seed::{derive, derive_indexed};
use ventus_core::{CapacityEntry, MapSeries, PowerSeries};
use ventus_nn::{Adam, Ctx, Dims, Layer, Param, Tensor};

use crate::error::{ModelError, Result};
use crate::persistence::regional_mean_series;
use crate::spec::{ModelKind, ModelSpec};
use crate::tree::TreeEnsemble;

const PREDICT_BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    #[default]
    Mse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub loss: Loss,
    pub early_stop_patience: usize,
    /// Chronological tail of the training samples held out for early
    /// stopping and validation MAE.
    pub validation_fraction: f64,
    /// Keep every `sample_stride`-th training sample (1 = all).
    pub sample_stride: usize,
    /// Global gradient-norm clip; 0 disables clipping.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 0,
            loss: Loss::Mse,
            early_stop_patience: 10,
            validation_fraction: 0.1,
            sample_stride: 1,
            clip_norm: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(ModelError::spec("epochs must be positive"));
        }
        if self.batch_size == 0 || self.sample_stride == 0 || self.early_stop_patience == 0 {
            return Err(ModelError::spec("batch_size, sample_stride and early_stop_patience must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::spec(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction <= 0.5) {
            return Err(ModelError::spec("validation_fraction must lie in (0, 0.5]"));
        }
        if !(self.clip_norm >= 0.0 && self.clip_norm.is_finite()) {
            return Err(ModelError::spec("clip_norm must be non-negative"));
        }
        Ok(())
    }
}

/// A region's training material: the crop, capacity-scaled targets aligned
/// with the crop's steps, and the capacity series used to unscale.
#[derive(Debug, Clone, Copy)]
pub struct RegionData<'a> {
    pub crop: &'a RegionCrop,
    pub scaled: &'a PowerSeries,
    pub capacity: &'a [CapacityEntry],
}

impl RegionData<'_> {
    fn check(&self) -> Result<()> {
        let maps = &self.crop.maps;
        if self.scaled.len() != maps.steps()
            || self.scaled.start() != Some(maps.start())
            || self.scaled.timestamps().last().copied() != Some(maps.end() - 1)
        {
            return Err(ModelError::input(format!(
                "targets for region {} are not aligned with the crop",
                self.crop.region_id
            )));
        }
        Ok(())
    }

    /// Training indices (strided) and the full validation tail.
    fn split(&self, cfg: &TrainConfig) -> Result<(Vec<usize>, Vec<usize>)> {
        let n = self.crop.maps.steps();
        let n_val = ((n as f64 * cfg.validation_fraction).round() as usize).max(1);
        if n_val >= n {
            return Err(ModelError::input(format!("{n} samples are too few to hold out validation data")));
        }
        let train: Vec<usize> = (0..n - n_val).step_by(cfg.sample_stride).collect();
        Ok((train, (n - n_val..n).collect()))
    }
}

/// Flat parameter array with its name and shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Learned {
    Network {
        arrays: Vec<NamedArray>,
        /// Input standardization (mean, std).
        input_mean: f64,
        input_std: f64,
    },
    Trees(TreeEnsemble),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub region_id: String,
    pub capacity_series: Vec<CapacityEntry>,
    pub learned: Learned,
    /// Mean training loss per epoch (scaled MSE).
    pub loss_history: Vec<f64>,
    /// Validation loss per epoch (scaled MSE).
    pub validation_history: Vec<f64>,
    pub best_epoch: usize,
    /// MAE in MW on the held-out validation tail.
    pub validation_mae_mw: f64,
}

pub fn snapshot(net: &mut dyn Layer) -> Vec<NamedArray> {
    let mut out = Vec::new();
    net.visit_params(&mut |p: &mut Param| {
        out.push(NamedArray {
            name: p.name.clone(),
            shape: p.shape.clone(),
            values: p.value.clone(),
        })
    });
    out
}

pub fn restore(net: &mut dyn Layer, arrays: &[NamedArray]) -> Result<()> {
    let mut i = 0;
    let mut err = None;
    net.visit_params(&mut |p: &mut Param| {
        match arrays.get(i) {
            Some(a) if a.name == p.name && a.shape == p.shape && a.values.len() == p.value.len() => {
                p.value.copy_from_slice(&a.values)
            }
            Some(a) => {
                err.get_or_insert_with(|| format!("array {i}: expected {} {:?}, found {} {:?}", p.name, p.shape, a.name, a.shape));
            }
            None => {
                err.get_or_insert_with(|| format!("missing array {i} ({})", p.name));
            }
        }
        i += 1;
    });
    if let Some(e) = err {
        return Err(ModelError::Checkpoint(e));
    }
    if i != arrays.len() {
        return Err(ModelError::Checkpoint(format!("{} arrays stored, network has {i}", arrays.len())));
    }
    Ok(())
}

fn clip_gradients(net: &mut dyn Layer, max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let mut sq = 0.0f64;
    net.visit_params(&mut |p: &mut Param| sq += p.grad.iter().map(|g| (*g as f64) * (*g as f64)).sum::<f64>());
    let norm = sq.sqrt();
    if norm > max_norm {
        let s = (max_norm / norm) as f32;
        net.visit_params(&mut |p: &mut Param| p.grad.iter_mut().for_each(|g| *g *= s));
    }
}

/// Standardized frames packed for fast batching.
struct Frames {
    dims: Dims,
    data: Vec<f32>,
}

impl Frames {
    fn new(maps: &MapSeries, mean: f64, std: f64) -> Self {
        let (m, s) = (mean as f32, std as f32);
        Self {
            dims: Dims::new(1, maps.rows(), maps.cols()),
            data: maps.values().iter().map(|v| (v - m) / s).collect(),
        }
    }

    fn batch(&self, idx: &[usize]) -> Tensor {
        let l = self.dims.len();
        let mut data = Vec::with_capacity(idx.len() * l);
        for &i in idx {
            data.extend_from_slice(&self.data[i * l..(i + 1) * l]);
        }
        Tensor::from_vec(idx.len(), self.dims, data)
    }
}

fn forward_all(net: &mut dyn Layer, frames: &Frames, idx: &[usize]) -> Vec<f32> {
    let mut ctx = Ctx::new(false, 0);
    let mut out = Vec::with_capacity(idx.len());
    for chunk in idx.chunks(PREDICT_BATCH) {
        out.extend(net.forward(&frames.batch(chunk), &mut ctx).data);
    }
    net.clear_cache();
    out
}

fn input_stats(maps: &MapSeries, idx: &[usize]) -> (f64, f64) {
    let (mut sum, mut sq, mut n) = (0.0f64, 0.0f64, 0usize);
    for &i in idx {
        for &v in maps.frame(i) {
            sum += v as f64;
            sq += (v as f64) * (v as f64);
            n += 1;
        }
    }
    let mean = sum / n as f64;
    let var = (sq / n as f64 - mean * mean).max(0.0);
    (mean, var.sqrt().max(1e-6))
}

fn mse(pred: &[f32], idx: &[usize], y: &[f64]) -> f64 {
    pred.iter().zip(idx).map(|(p, &i)| (*p as f64 - y[i]).powi(2)).sum::<f64>() / idx.len() as f64
}

/// MAE in MW of clamped, unscaled predictions against unscaled targets.
fn mae_mw(pred: &[f64], idx: &[usize], y: &[f64], cap: &[f64]) -> f64 {
    pred.iter()
        .zip(idx)
        .map(|(p, &i)| (p.max(0.0) * cap[i] - y[i] * cap[i]).abs())
        .sum::<f64>()
        / idx.len() as f64
}

/// Trains a conv, patch-attention or searched network on MSE of scaled
/// targets with Adam, early stopping on the validation tail and
/// restoration of the best epoch's weights.
pub fn train_map_regressor(spec: &ModelSpec, data: RegionData<'_>, cfg: &TrainConfig) -> Result<TrainedModel> {
    spec.validate()?;
    cfg.validate()?;
    if !spec.kind.is_network() {
        return Err(ModelError::spec(format!("{} is not trained by gradient descent", spec.kind)));
    }
    data.check()?;
    let crop = data.crop;
    if (crop.height(), crop.width()) != spec.input {
        return Err(ModelError::input(format!(
            "crop is {}x{} but the spec expects {}x{}",
            crop.height(),
            crop.width(),
            spec.input.0,
            spec.input.1
        )));
    }
    let (train, val) = data.split(cfg)?;
    let val_fast: Vec<usize> = val.iter().copied().step_by(cfg.sample_stride).collect();
    let y = data.scaled.values();
    let cap = capacity_for(crop.maps.timestamps().as_slice(), data.capacity)?;
    let (mean, std) = input_stats(&crop.maps, &train);
    let frames = Frames::new(&crop.maps, mean, std);

    let mut net = spec.build_network(derive(cfg.seed, "init"))?;
    let mut opt = Adam::new(cfg.learning_rate as f32);
    let mut loss_history = Vec::new();
    let mut validation_history = Vec::new();
    let mut best = (f64::INFINITY, 0usize, snapshot(net.as_mut()));
    let mut stale = 0;
    let mut order = train.clone();
    let mut step = 0u64;
    for epoch in 0..cfg.epochs {
        order.copy_from_slice(&train);
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_indexed(cfg.seed, "shuffle", epoch as u64)));
        let mut total = 0.0f64;
        for chunk in order.chunks(cfg.batch_size) {
            let x = frames.batch(chunk);
            let mut ctx = Ctx::new(true, derive_indexed(cfg.seed, "dropout", step));
            step += 1;
            let out = net.forward(&x, &mut ctx);
            let b = chunk.len() as f32;
            let mut grad = Vec::with_capacity(chunk.len());
            let mut batch_loss = 0.0f64;
            for (o, &i) in out.data.iter().zip(chunk) {
                let d = *o - y[i] as f32;
                batch_loss += (d as f64) * (d as f64);
                grad.push(2.0 * d / b);
            }
            if !batch_loss.is_finite() {
                return Err(ModelError::Diverged {
                    epoch,
                    learning_rate: cfg.learning_rate,
                    reason: format!("non-finite batch loss after {step} steps"),
                });
            }
            total += batch_loss;
            net.backward(&Tensor::from_vec(out.n, out.dims, grad));
            clip_gradients(net.as_mut(), cfg.clip_norm);
            opt.step(net.as_mut());
        }
        loss_history.push(total / train.len() as f64);
        let v = mse(&forward_all(net.as_mut(), &frames, &val_fast), &val_fast, y);
        if !v.is_finite() {
            return Err(ModelError::Diverged {
                epoch,
                learning_rate: cfg.learning_rate,
                reason: "non-finite validation loss".into(),
            });
        }
        validation_history.push(v);
        if v < best.0 {
            best = (v, epoch, snapshot(net.as_mut()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.early_stop_patience {
                break;
            }
        }
    }
    let (_, best_epoch, arrays) = best;
    restore(net.as_mut(), &arrays)?;
    let pred: Vec<f64> = forward_all(net.as_mut(), &frames, &val).into_iter().map(f64::from).collect();
    let validation_mae_mw = mae_mw(&pred, &val, y, &cap);
    Ok(TrainedModel {
        spec: spec.clone(),
        region_id: crop.region_id.clone(),
        capacity_series: data.capacity.to_vec(),
        learned: Learned::Network {
            arrays,
            input_mean: mean,
            input_std: std,
        },
        loss_history,
        validation_history,
        best_epoch,
        validation_mae_mw,
    })
}

/// Boosted trees on the regional mean wind speed.
pub fn fit_mean_tree(spec: &ModelSpec, data: RegionData<'_>, cfg: &TrainConfig) -> Result<TrainedModel> {
    let params = spec.tree_params()?;
    cfg.validate()?;
    data.check()?;
    let crop = data.crop;
    let mut split_cfg = cfg.clone();
    split_cfg.sample_stride = 1;
    let (train, val) = data.split(&split_cfg)?;
    let feature = regional_mean_series(crop)?;
    let y = data.scaled.values();
    let xs: Vec<f64> = train.iter().map(|&i| feature[i]).collect();
    let ys: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let model = TreeEnsemble::fit(&xs, &ys, &params, derive(cfg.seed, "trees"))?;
    let train_mse = xs.iter().zip(&ys).map(|(x, t)| (model.predict(*x) - t).powi(2)).sum::<f64>() / xs.len() as f64;
    let pred: Vec<f64> = val.iter().map(|&i| model.predict(feature[i])).collect();
    let val_mse = pred.iter().zip(&val).map(|(p, &i)| (p - y[i]).powi(2)).sum::<f64>() / val.len() as f64;
    let cap = capacity_for(crop.maps.timestamps().as_slice(), data.capacity)?;
    Ok(TrainedModel {
        spec: spec.clone(),
        region_id: crop.region_id.clone(),
        capacity_series: data.capacity.to_vec(),
        learned: Learned::Trees(model),
        loss_history: vec![train_mse],
        validation_history: vec![val_mse],
        best_epoch: 0,
        validation_mae_mw: mae_mw(&pred, &val, y, &cap),
    })
}

/// Dispatches to the right trainer for the spec's kind.
pub fn train_model(spec: &ModelSpec, data: RegionData<'_>, cfg: &TrainConfig) -> Result<TrainedModel> {
    match spec.kind {
        ModelKind::MeanTree => fit_mean_tree(spec, data, cfg),
        ModelKind::Persistence => Err(ModelError::spec("persistence has nothing to train")),
        _ => train_map_regressor(spec, data, cfg),
    }
}

impl TrainedModel {
    /// Rebuilds the network with the learned weights.
    pub fn network(&self) -> Result<Box<dyn Layer>> {
        let Learned::Network { arrays, .. } = &self.learned else {
            return Err(ModelError::spec(format!("{} is not a network model", self.spec.kind)));
        };
        let mut net = self.spec.build_network(0)?;
        restore(net.as_mut(), arrays)?;
        Ok(net)
    }

    /// Scaled predictions for every step of the crop.
    pub fn predict_scaled(&self, crop: &RegionCrop) -> Result<Vec<f64>> {
        match &self.learned {
            Learned::Trees(t) => Ok(regional_mean_series(crop)?.into_iter().map(|x| t.predict(x)).collect()),
            Learned::Network {
                input_mean, input_std, ..
            } => {
                if (crop.height(), crop.width()) != self.spec.input {
                    return Err(ModelError::input(format!(
                        "crop is {}x{} but the model expects {}x{}",
                        crop.height(),
                        crop.width(),
                        self.spec.input.0,
                        self.spec.input.1
                    )));
                }
                let mut net = self.network()?;
                let frames = Frames::new(&crop.maps, *input_mean, *input_std);
                let idx: Vec<usize> = (0..crop.maps.steps()).collect();
                Ok(forward_all(net.as_mut(), &frames, &idx).into_iter().map(f64::from).collect())
            }
        }
    }

    pub fn final_loss(&self) -> f64 {
        self.loss_history.last().copied().unwrap_or(f64::NAN)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| ModelError::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        m.spec.validate()?;
        if m.loss_history.is_empty() || !m.final_loss().is_finite() {
            return Err(ModelError::Checkpoint("loss history must be non-empty with a finite final loss".into()));
        }
        if matches!(m.learned, Learned::Network { .. }) {
            m.network()?;
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| ventus_core::CoreError::io(path, e).into())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::from(ventus_core::CoreError::io(path, e)))?;
        Self::from_json(&text)
    }
}

/// `max(0, scaled * installed capacity)` at each timestamp.
pub fn scaled_to_power(timestamps: &[i64], scaled: &[f64], capacity: &[CapacityEntry]) -> Result<PowerSeries> {
    if timestamps.len() != scaled.len() {
        return Err(ModelError::input(format!(
            "{} timestamps vs {} predictions",
            timestamps.len(),
            scaled.len()
        )));
    }
    let cap = capacity_for(timestamps, capacity)?;
    let mw = scaled.iter().zip(&cap).map(|(s, c)| (s * c).max(0.0)).collect();
    Ok(PowerSeries::new(timestamps.to_vec(), mw)?)
}

/// Forecast in MW for every step of the crop.
pub fn predict_power(model: &TrainedModel, crop: &RegionCrop) -> Result<PowerSeries> {
    let scaled = model.predict_scaled(crop)?;
    scaled_to_power(&crop.maps.timestamps(), &scaled, &model.capacity_series)
}
