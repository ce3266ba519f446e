//! Model specifications: a kind, a validated key/value hyperparameter map
//! and the crop size the model is built for.

use std::collections::BTreeMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use ventus_arch::{materialize, CandidateArchitecture};
use ventus_nn::{
    Activation, ActivationLayer, AddPositional, Conv2d, Dense, Dims, GlobalAvgPool, Layer, MultiHeadAttention,
    Patchify, Residual, Sequential, TokenNorm,
};

use crate::error::{ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Persistence,
    MeanTree,
    ConvNet,
    PatchAttention,
    Dragon,
}

impl ModelKind {
    /// Report column order.
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Dragon,
        ModelKind::ConvNet,
        ModelKind::PatchAttention,
        ModelKind::MeanTree,
        ModelKind::Persistence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Persistence => "persistence",
            ModelKind::MeanTree => "mean_tree",
            ModelKind::ConvNet => "conv_net",
            ModelKind::PatchAttention => "patch_attention",
            ModelKind::Dragon => "dragon",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Kinds trained by gradient descent on map crops.
    pub fn is_network(self) -> bool {
        matches!(self, ModelKind::ConvNet | ModelKind::PatchAttention | ModelKind::Dragon)
    }

    fn schema(self) -> &'static [&'static str] {
        match self {
            ModelKind::Persistence => &[],
            ModelKind::MeanTree => &["trees", "depth", "learning_rate", "min_leaf", "subsample"],
            ModelKind::ConvNet => &["layers", "kernel", "channels", "activation"],
            ModelKind::PatchAttention => &["patch", "dim", "heads", "blocks"],
            ModelKind::Dragon => &["arch"],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub hyperparameters: BTreeMap<String, String>,
    /// Crop height and width.
    pub input: (usize, usize),
}

impl ModelSpec {
    fn from_pairs(kind: ModelKind, input: (usize, usize), pairs: &[(&str, String)]) -> Result<Self> {
        let spec = Self {
            kind,
            hyperparameters: pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
            input,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn persistence() -> Self {
        Self {
            kind: ModelKind::Persistence,
            hyperparameters: BTreeMap::new(),
            input: (0, 0),
        }
    }

    pub fn mean_tree(params: TreeParams) -> Result<Self> {
        Self::from_pairs(
            ModelKind::MeanTree,
            (0, 0),
            &[
                ("trees", params.trees.to_string()),
                ("depth", params.depth.to_string()),
                ("learning_rate", params.learning_rate.to_string()),
                ("min_leaf", params.min_leaf.to_string()),
                ("subsample", params.subsample.to_string()),
            ],
        )
    }

    pub fn conv(c: ConvSpec, input: (usize, usize)) -> Result<Self> {
        Self::from_pairs(
            ModelKind::ConvNet,
            input,
            &[
                ("layers", c.layers.to_string()),
                ("kernel", c.kernel.to_string()),
                ("channels", c.channels.to_string()),
                ("activation", c.act.name().to_string()),
            ],
        )
    }

    pub fn attention(a: AttentionSpec, input: (usize, usize)) -> Result<Self> {
        Self::from_pairs(
            ModelKind::PatchAttention,
            input,
            &[
                ("patch", a.patch.to_string()),
                ("dim", a.dim.to_string()),
                ("heads", a.heads.to_string()),
                ("blocks", a.blocks.to_string()),
            ],
        )
    }

    pub fn dragon(arch: &CandidateArchitecture, input: (usize, usize)) -> Result<Self> {
        Self::from_pairs(ModelKind::Dragon, input, &[("arch", arch.encode())])
    }

    /// Checks keys and values against the kind's schema.
    pub fn validate(&self) -> Result<()> {
        let schema = self.kind.schema();
        for key in self.hyperparameters.keys() {
            if !schema.contains(&key.as_str()) {
                return Err(ModelError::spec(format!("{}: unknown hyperparameter `{key}`", self.kind)));
            }
        }
        for key in schema {
            if !self.hyperparameters.contains_key(*key) {
                return Err(ModelError::spec(format!("{}: missing hyperparameter `{key}`", self.kind)));
            }
        }
        if self.kind.is_network() && (self.input.0 == 0 || self.input.1 == 0) {
            return Err(ModelError::spec(format!("{}: input dims must be positive", self.kind)));
        }
        match self.kind {
            ModelKind::Persistence => Ok(()),
            ModelKind::MeanTree => self.tree_params().map(|_| ()),
            ModelKind::ConvNet => self.conv_spec().map(|_| ()),
            ModelKind::PatchAttention => self.attention_spec().map(|_| ()),
            ModelKind::Dragon => self.architecture().map(|_| ()),
        }
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .hyperparameters
            .get(key)
            .ok_or_else(|| ModelError::spec(format!("{}: missing hyperparameter `{key}`", self.kind)))?;
        raw.parse()
            .map_err(|_| ModelError::spec(format!("{}: bad value `{raw}` for `{key}`", self.kind)))
    }

    fn expect_kind(&self, kind: ModelKind) -> Result<()> {
        if self.kind != kind {
            return Err(ModelError::spec(format!("expected a {kind} spec, got {}", self.kind)));
        }
        Ok(())
    }

    pub fn tree_params(&self) -> Result<TreeParams> {
        self.expect_kind(ModelKind::MeanTree)?;
        let p = TreeParams {
            trees: self.get("trees")?,
            depth: self.get("depth")?,
            learning_rate: self.get("learning_rate")?,
            min_leaf: self.get("min_leaf")?,
            subsample: self.get("subsample")?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn conv_spec(&self) -> Result<ConvSpec> {
        self.expect_kind(ModelKind::ConvNet)?;
        let act: String = self.get("activation")?;
        let c = ConvSpec {
            layers: self.get("layers")?,
            kernel: self.get("kernel")?,
            channels: self.get("channels")?,
            act: Activation::parse(&act).ok_or_else(|| ModelError::spec(format!("unknown activation `{act}`")))?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn attention_spec(&self) -> Result<AttentionSpec> {
        self.expect_kind(ModelKind::PatchAttention)?;
        let a = AttentionSpec {
            patch: self.get("patch")?,
            dim: self.get("dim")?,
            heads: self.get("heads")?,
            blocks: self.get("blocks")?,
        };
        a.validate(self.input)?;
        Ok(a)
    }

    pub fn architecture(&self) -> Result<CandidateArchitecture> {
        self.expect_kind(ModelKind::Dragon)?;
        let text: String = self.get("arch")?;
        Ok(CandidateArchitecture::decode(&text)?)
    }

    /// Fresh network for this spec; initialization is fixed by `seed`.
    pub fn build_network(&self, seed: u64) -> Result<Box<dyn Layer>> {
        let (h, w) = self.input;
        match self.kind {
            ModelKind::ConvNet => Ok(Box::new(self.conv_spec()?.build(seed))),
            ModelKind::PatchAttention => Ok(Box::new(self.attention_spec()?.build(h, w, seed))),
            ModelKind::Dragon => Ok(Box::new(materialize(&self.architecture()?, h, w, seed)?)),
            k => Err(ModelError::spec(format!("{k} is not a network model"))),
        }
    }

    /// Short human-readable description.
    pub fn summary(&self) -> String {
        if self.kind == ModelKind::Dragon {
            return match self.architecture() {
                Ok(a) => format!("dragon {}", a.summary()),
                Err(_) => "dragon <invalid>".into(),
            };
        }
        let kv: Vec<String> = self.hyperparameters.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{} {}", self.kind, kv.join(","))
    }
}

/// Gradient-boosted tree settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub trees: usize,
    pub depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
    pub subsample: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            trees: 150,
            depth: 3,
            learning_rate: 0.1,
            min_leaf: 20,
            subsample: 0.8,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 || self.depth == 0 || self.min_leaf == 0 {
            return Err(ModelError::spec("trees, depth and min_leaf must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(ModelError::spec("tree learning_rate must lie in (0, 1]"));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(ModelError::spec("subsample must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Convolutional regressor: `layers` same-padded conv blocks, global
/// average pooling, a small dense head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConvSpec {
    pub layers: usize,
    pub kernel: usize,
    pub channels: usize,
    pub act: Activation,
}

pub const CONV_HEAD_WIDTH: usize = 32;

impl ConvSpec {
    pub fn validate(&self) -> Result<()> {
        if !(1..=8).contains(&self.layers) {
            return Err(ModelError::spec(format!("conv layers {} outside 1..=8", self.layers)));
        }
        if self.kernel % 2 == 0 || self.kernel > 9 {
            return Err(ModelError::spec(format!("conv kernel {} must be odd and at most 9", self.kernel)));
        }
        if self.channels == 0 || self.channels > 256 {
            return Err(ModelError::spec(format!("conv channels {} outside 1..=256", self.channels)));
        }
        Ok(())
    }

    pub fn build(&self, seed: u64) -> Sequential {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Sequential::new();
        let mut cin = 1;
        for _ in 0..self.layers {
            net.push(Conv2d::new(cin, self.channels, self.kernel, self.kernel, &mut rng));
            net.push(ActivationLayer::new(self.act));
            cin = self.channels;
        }
        net.push(GlobalAvgPool::new());
        net.push(Dense::new(self.channels, CONV_HEAD_WIDTH, &mut rng));
        net.push(ActivationLayer::new(self.act));
        net.push(Dense::new(CONV_HEAD_WIDTH, 1, &mut rng));
        net
    }
}

impl fmt::Display for ConvSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "layers={} kernel={} channels={} act={}", self.layers, self.kernel, self.channels, self.act.name())
    }
}

/// The grid enumerated by the conv hyperparameter search.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrid {
    pub layers: Vec<usize>,
    pub kernels: Vec<usize>,
    pub channels: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl Default for ConvGrid {
    fn default() -> Self {
        Self {
            layers: vec![2, 3, 4],
            kernels: vec![3, 5],
            channels: vec![8, 16, 32],
            activations: vec![Activation::Relu, Activation::Gelu],
        }
    }
}

impl ConvGrid {
    pub fn single(spec: ConvSpec) -> Self {
        Self {
            layers: vec![spec.layers],
            kernels: vec![spec.kernel],
            channels: vec![spec.channels],
            activations: vec![spec.act],
        }
    }

    /// All combinations, layers varying slowest.
    pub fn specs(&self) -> Vec<ConvSpec> {
        let mut out = Vec::new();
        for &layers in &self.layers {
            for &kernel in &self.kernels {
                for &channels in &self.channels {
                    for &act in &self.activations {
                        out.push(ConvSpec {
                            layers,
                            kernel,
                            channels,
                            act,
                        });
                    }
                }
            }
        }
        out
    }
}

/// Patch self-attention regressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AttentionSpec {
    pub patch: usize,
    pub dim: usize,
    pub heads: usize,
    pub blocks: usize,
}

impl AttentionSpec {
    pub fn new(patch: usize) -> Self {
        Self {
            patch,
            dim: 32,
            heads: 4,
            blocks: 2,
        }
    }

    pub fn validate(&self, input: (usize, usize)) -> Result<()> {
        if self.patch == 0 {
            return Err(ModelError::spec("patch size must be positive"));
        }
        if self.patch > input.0 || self.patch > input.1 {
            return Err(ModelError::spec(format!(
                "patch {} larger than the {}x{} crop",
                self.patch, input.0, input.1
            )));
        }
        if self.heads == 0 || self.dim == 0 || self.dim % self.heads != 0 {
            return Err(ModelError::spec(format!("dim {} not divisible by heads {}", self.dim, self.heads)));
        }
        if self.blocks == 0 {
            return Err(ModelError::spec("at least one attention block is required"));
        }
        Ok(())
    }

    pub fn build(&self, h: usize, w: usize, seed: u64) -> Sequential {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tokens = Patchify::output_dims(Dims::new(1, h, w), self.patch);
        let d = self.dim;
        let mut net = Sequential::new();
        net.push(Patchify::new(self.patch));
        net.push(Conv2d::pointwise(tokens.c, d, &mut rng));
        net.push(AddPositional::sincos(Dims::new(d, 1, tokens.w)));
        for _ in 0..self.blocks {
            let mut attn = Sequential::new();
            attn.push(TokenNorm::new(d));
            attn.push(MultiHeadAttention::new(d, self.heads, &mut rng));
            net.push(Residual::new(attn));
            let mut mlp = Sequential::new();
            mlp.push(TokenNorm::new(d));
            mlp.push(Conv2d::pointwise(d, 2 * d, &mut rng));
            mlp.push(ActivationLayer::new(Activation::Gelu));
            mlp.push(Conv2d::pointwise(2 * d, d, &mut rng));
            net.push(Residual::new(mlp));
        }
        net.push(TokenNorm::new(d));
        net.push(GlobalAvgPool::new());
        net.push(Dense::new(d, 1, &mut rng));
        net
    }
}

/// Number of patches after edge-replication padding to a multiple of `patch`.
pub fn patch_count(input: (usize, usize), patch: usize) -> Result<usize> {
    AttentionSpec::new(patch).validate(input)?;
    Ok(Patchify::layout(Dims::new(1, input.0, input.1), patch).2)
}

/// Patch-attention spec for a crop.
pub fn build_attention_spec(input: (usize, usize), patch: usize) -> Result<ModelSpec> {
    ModelSpec::attention(AttentionSpec::new(patch), input)
}
