//! The TOML run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use ventus_arch::SpaceConfig;
use ventus_core::dataset::hex;
use ventus_core::synth::BenchmarkConfig;
use ventus_models::{AttentionSpec, ConvGrid, ModelKind, TrainConfig, TreeParams};
use ventus_nn::Activation;

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Master seed for training and search; the dataset has its own seed
    /// under `[benchmark]`.
    pub seed: u64,
    pub workers: usize,
    /// Load a saved dataset instead of generating one.
    pub dataset_dir: Option<PathBuf>,
    /// Models to run, any of `persistence`, `mean_tree`, `conv_net`,
    /// `patch_attention`, `dragon`.
    pub models: Vec<String>,
    /// Buffer (grid cells) around each farm when building region hulls.
    pub buffer_cells: f64,
    pub split: SplitConfig,
    pub benchmark: BenchmarkConfig,
    /// Shared by the final conv, attention and search-candidate trainings.
    pub train: TrainConfig,
    pub grid: GridConfig,
    pub attention: AttentionConfig,
    pub tree: TreeConfig,
    pub search: SearchSection,
    pub report: ReportConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            seed: 2020,
            workers: 1,
            dataset_dir: None,
            models: ModelKind::ALL.iter().rev().map(|k| k.name().to_string()).collect(),
            buffer_cells: ventus_core::prep::DEFAULT_BUFFER_CELLS,
            split: SplitConfig::default(),
            benchmark: BenchmarkConfig::default(),
            train: TrainConfig {
                epochs: 15,
                early_stop_patience: 5,
                sample_stride: 8,
                ..TrainConfig::default()
            },
            grid: GridConfig::default(),
            attention: AttentionConfig::default(),
            tree: TreeConfig::default(),
            search: SearchSection::default(),
            report: ReportConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_years: Vec<i32>,
    pub test_years: Vec<i32>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_years: vec![2018, 2019],
            test_years: vec![2020],
        }
    }
}

/// Conv hyperparameter grid and the reduced training budget used to score
/// its members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub layers: Vec<usize>,
    pub kernels: Vec<usize>,
    pub channels: Vec<usize>,
    pub activations: Vec<String>,
    pub epochs: usize,
    pub sample_stride: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = ConvGrid::default();
        Self {
            layers: g.layers,
            kernels: g.kernels,
            channels: g.channels,
            activations: g.activations.iter().map(|a| a.name().to_string()).collect(),
            epochs: 5,
            sample_stride: 32,
        }
    }
}

impl GridConfig {
    pub fn grid(&self) -> Result<ConvGrid> {
        let activations = self
            .activations
            .iter()
            .map(|a| Activation::parse(a).ok_or_else(|| BenchError::config(format!("unknown activation `{a}`"))))
            .collect::<Result<Vec<_>>>()?;
        let g = ConvGrid {
            layers: self.layers.clone(),
            kernels: self.kernels.clone(),
            channels: self.channels.clone(),
            activations,
        };
        if g.specs().is_empty() {
            return Err(BenchError::config("conv grid is empty"));
        }
        for s in g.specs() {
            s.validate()?;
        }
        Ok(g)
    }

    pub fn train(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            sample_stride: self.sample_stride,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttentionConfig {
    pub patch: usize,
    pub dim: usize,
    pub heads: usize,
    pub blocks: usize,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        let a = AttentionSpec::new(2);
        Self {
            patch: a.patch,
            dim: a.dim,
            heads: a.heads,
            blocks: a.blocks,
        }
    }
}

impl AttentionConfig {
    pub fn spec(&self) -> AttentionSpec {
        AttentionSpec {
            patch: self.patch,
            dim: self.dim,
            heads: self.heads,
            blocks: self.blocks,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeConfig {
    pub trees: usize,
    pub depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
    pub subsample: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        let t = TreeParams::default();
        Self {
            trees: t.trees,
            depth: t.depth,
            learning_rate: t.learning_rate,
            min_leaf: t.min_leaf,
            subsample: t.subsample,
        }
    }
}

impl TreeConfig {
    pub fn params(&self) -> TreeParams {
        TreeParams {
            trees: self.trees,
            depth: self.depth,
            learning_rate: self.learning_rate,
            min_leaf: self.min_leaf,
            subsample: self.subsample,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub population: usize,
    pub budget: usize,
    pub min_nodes_2d: usize,
    pub max_nodes_2d: usize,
    pub min_nodes_1d: usize,
    pub max_nodes_1d: usize,
    /// Cap on forward multiply-adds per sample, at the largest crop.
    pub max_macs: u64,
    pub extra_edge_prob: f64,
    pub train_mutation_prob: f64,
    pub starvation_factor: usize,
}

impl Default for SearchSection {
    fn default() -> Self {
        let s = SpaceConfig::default();
        Self {
            population: 8,
            budget: 60,
            min_nodes_2d: s.min_nodes_2d,
            max_nodes_2d: s.max_nodes_2d,
            min_nodes_1d: s.min_nodes_1d,
            max_nodes_1d: s.max_nodes_1d,
            max_macs: 1_000_000,
            extra_edge_prob: s.extra_edge_prob,
            train_mutation_prob: 0.2,
            starvation_factor: 3,
        }
    }
}

impl SearchSection {
    pub fn space(&self, input: (usize, usize)) -> SpaceConfig {
        SpaceConfig {
            min_nodes_2d: self.min_nodes_2d,
            max_nodes_2d: self.max_nodes_2d,
            min_nodes_1d: self.min_nodes_1d,
            max_nodes_1d: self.max_nodes_1d,
            input,
            max_macs: self.max_macs,
            extra_edge_prob: self.extra_edge_prob,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Start of the plotted week, `YYYY-MM-DD` or `YYYY-MM-DDTHH:00`;
    /// defaults to the first Monday of the test period.
    pub week_start: Option<String>,
    /// Also write MAE per lead time.
    pub per_horizon: bool,
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| BenchError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Model kinds in report order.
    pub fn model_kinds(&self) -> Result<Vec<ModelKind>> {
        let mut wanted = BTreeMap::new();
        for m in &self.models {
            let k = ModelKind::parse(m).ok_or_else(|| BenchError::config(format!("unknown model `{m}`")))?;
            if wanted.insert(k.name(), k).is_some() {
                return Err(BenchError::config(format!("model `{m}` listed twice")));
            }
        }
        Ok(ModelKind::ALL.iter().copied().filter(|k| wanted.contains_key(k.name())).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(BenchError::config("no models listed"));
        }
        let kinds = self.model_kinds()?;
        if self.workers == 0 {
            return Err(BenchError::config("workers must be positive"));
        }
        if !(self.buffer_cells > 0.0 && self.buffer_cells.is_finite()) {
            return Err(BenchError::config("buffer_cells must be positive"));
        }
        if self.dataset_dir.is_none() {
            self.benchmark.validate()?;
        }
        self.train.validate()?;
        if kinds.contains(&ModelKind::ConvNet) || kinds.contains(&ModelKind::Dragon) {
            self.grid.grid()?;
            self.grid.train(&self.train).validate()?;
        }
        if kinds.contains(&ModelKind::MeanTree) {
            self.tree.params().validate()?;
        }
        if kinds.contains(&ModelKind::Dragon) {
            let s = &self.search;
            if s.population < 2 || s.budget < s.population {
                return Err(BenchError::config("search needs population >= 2 and budget >= population"));
            }
        }
        if let Some(w) = &self.report.week_start {
            crate::plot::parse_week_start(w)?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_toml().as_bytes()))
    }
}
