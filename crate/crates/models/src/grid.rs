//! Grid search over conv regressor hyperparameters.

use ventus_core::seed::derive_indexed;

use crate::error::{ModelError, Result};
use crate::spec::{ConvGrid, ConvSpec, ModelSpec};
use crate::train::{train_map_regressor, RegionData, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearch {
    pub best: ModelSpec,
    /// Every grid member with its validation MAE (MW), in grid order.
    pub scores: Vec<(ConvSpec, f64)>,
}

/// Scores each candidate and keeps the lowest score; ties go to the
/// earlier candidate. Non-finite scores never win.
pub fn select_best<F>(candidates: &[ConvSpec], mut score: F) -> Result<(usize, Vec<f64>)>
where
    F: FnMut(usize, &ConvSpec) -> Result<f64>,
{
    if candidates.is_empty() {
        return Err(ModelError::spec("empty conv grid"));
    }
    let scores = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| score(i, c))
        .collect::<Result<Vec<f64>>>()?;
    let best = scores
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .ok_or_else(|| ModelError::spec("every grid member failed to train"))?;
    Ok((best, scores))
}

/// Picks the conv spec with the lowest validation MAE on the chronological
/// tail of the training data. A member whose training diverges scores +inf.
pub fn build_conv_spec(input: (usize, usize), grid: &ConvGrid, data: RegionData<'_>, cfg: &TrainConfig) -> Result<GridSearch> {
    let candidates = grid.specs();
    let (best, scores) = select_best(&candidates, |i, c| {
        let spec = ModelSpec::conv(*c, input)?;
        let mut run = cfg.clone();
        run.seed = derive_indexed(cfg.seed, "grid", i as u64);
        match train_map_regressor(&spec, data, &run) {
            Ok(m) => Ok(m.validation_mae_mw),
            Err(ModelError::Diverged { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    })?;
    Ok(GridSearch {
        best: ModelSpec::conv(candidates[best], input)?,
        scores: candidates.into_iter().zip(scores).collect(),
    })
}
