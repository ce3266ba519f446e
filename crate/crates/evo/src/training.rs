//! Evaluation by actually training the candidate on a region.

use std::collections::BTreeMap;

use ventus_core::prep::RegionCrop;
use ventus_core::{CapacityEntry, PowerSeries};
use ventus_models::{train_map_regressor, ModelSpec, RegionData, TrainConfig};

use crate::search::{EvalJob, Evaluation, Evaluator};

/// A region's training material.
#[derive(Debug, Clone)]
pub struct RegionTask {
    pub crop: RegionCrop,
    pub scaled: PowerSeries,
    pub capacity: Vec<CapacityEntry>,
}

impl RegionTask {
    pub fn data(&self) -> RegionData<'_> {
        RegionData {
            crop: &self.crop,
            scaled: &self.scaled,
            capacity: &self.capacity,
        }
    }
}

/// Trains each candidate from scratch with its own learning rate and batch
/// size; the raw loss is the validation MAE in MW.
pub struct TrainingEvaluator {
    pub tasks: BTreeMap<String, RegionTask>,
    pub train: TrainConfig,
}

impl Evaluator for TrainingEvaluator {
    fn evaluate(&self, job: &EvalJob) -> Evaluation {
        let Some(task) = self.tasks.get(&job.region) else {
            return Evaluation::failed();
        };
        let Ok(spec) = ModelSpec::dragon(&job.arch, (task.crop.height(), task.crop.width())) else {
            return Evaluation::failed();
        };
        let cfg = TrainConfig {
            learning_rate: job.arch.train.learning_rate,
            batch_size: job.arch.train.batch_size,
            seed: job.seed,
            ..self.train.clone()
        };
        match train_map_regressor(&spec, task.data(), &cfg) {
            Ok(m) => Evaluation {
                raw_loss: m.validation_mae_mw,
                model: Some(m),
            },
            Err(_) => Evaluation::failed(),
        }
    }

    fn check_region(&self, region: &str) -> Result<(), String> {
        match self.tasks.get(region) {
            None => Err("no training data".into()),
            Some(t) if t.scaled.is_empty() => Err("empty training split".into()),
            Some(_) => Ok(()),
        }
    }
}
