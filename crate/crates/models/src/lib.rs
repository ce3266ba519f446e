//! Reference forecasters (persistence, boosted trees on the regional mean
//! wind speed, a convolutional regressor and a patch self-attention
//! regressor) plus the training and prediction code shared with searched
//! architectures.

pub mod error;
pub mod grid;
pub mod persistence;
pub mod spec;
pub mod train;
pub mod tree;

pub use error::{ModelError, Result};
pub use grid::{build_conv_spec, select_best, GridSearch};
pub use persistence::{persistence_by_run, persistence_forecast, regional_mean_feature, regional_mean_series};
pub use spec::{build_attention_spec, patch_count, AttentionSpec, ConvGrid, ConvSpec, ModelKind, ModelSpec, TreeParams};
pub use train::{
    fit_mean_tree, predict_power, scaled_to_power, train_map_regressor, train_model, Learned, Loss, NamedArray,
    RegionData, TrainConfig, TrainedModel,
};
pub use tree::TreeEnsemble;
