//! Dataset loading, the train/test split and per-region model inputs.

use ventus_core::prep::{build_region_crop, chronological_split, scale_by_capacity, RegionCrop};
use ventus_core::synth::generate_benchmark;
use ventus_core::{Dataset, PowerSeries, RegionSpec};
use ventus_evo::RegionTask;

use crate::config::BenchConfig;
use crate::error::Result;

/// One region's inputs for both periods.
#[derive(Debug, Clone)]
pub struct PreparedRegion {
    pub spec: RegionSpec,
    /// Training crop, capacity-scaled targets and capacity series.
    pub train: RegionTask,
    pub test_crop: RegionCrop,
    pub test_truth: PowerSeries,
    /// Observed power over the whole dataset; persistence looks back
    /// across the split boundary.
    pub observed: PowerSeries,
}

impl PreparedRegion {
    pub fn id(&self) -> &str {
        &self.spec.region_id
    }

    pub fn crop_dims(&self) -> (usize, usize) {
        (self.train.crop.height(), self.train.crop.width())
    }
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset_hash: String,
    pub train_steps: usize,
    pub test_steps: usize,
    pub regions: Vec<PreparedRegion>,
}

impl Prepared {
    /// The largest crop over all regions, the input the search space must
    /// accommodate.
    pub fn max_crop(&self) -> (usize, usize) {
        self.regions.iter().fold((0, 0), |(h, w), r| {
            let (rh, rw) = r.crop_dims();
            (h.max(rh), w.max(rw))
        })
    }

    pub fn test_timestamps(&self) -> &[i64] {
        self.regions[0].test_truth.timestamps()
    }
}

pub fn load_dataset(cfg: &BenchConfig) -> Result<Dataset> {
    Ok(match &cfg.dataset_dir {
        Some(dir) => Dataset::load(dir)?,
        None => generate_benchmark(&cfg.benchmark)?,
    })
}

pub fn prepare(cfg: &BenchConfig, ds: &Dataset) -> Result<Prepared> {
    let (train, test) = chronological_split(ds, &cfg.split.train_years, &cfg.split.test_years)?;
    let mut regions = Vec::with_capacity(ds.regions.len());
    for spec in &ds.regions {
        let id = &spec.region_id;
        let crop = build_region_crop(&train.maps, spec, cfg.buffer_cells)?;
        let scaled = scale_by_capacity(&train.power[id], &spec.capacity_series)?;
        regions.push(PreparedRegion {
            spec: spec.clone(),
            train: RegionTask {
                crop,
                scaled,
                capacity: spec.capacity_series.clone(),
            },
            test_crop: build_region_crop(&test.maps, spec, cfg.buffer_cells)?,
            test_truth: test.power[id].clone(),
            observed: ds.power[id].clone(),
        });
    }
    Ok(Prepared {
        dataset_hash: ds.content_hash(),
        train_steps: train.maps.steps(),
        test_steps: test.maps.steps(),
        regions,
    })
}
