//! Layer operations and their hyperparameter domains.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use ventus_nn::{Activation, PoolMode};

use crate::error::ArchError;

pub const KERNELS: [usize; 2] = [3, 5];
pub const CHANNELS: [usize; 4] = [4, 8, 16, 32];
pub const POOL_KERNELS: [usize; 2] = [2, 3];
pub const HEADS: [usize; 3] = [1, 2, 4];
pub const WIDTHS: [usize; 5] = [16, 32, 64, 128, 256];
pub const ACTIVATIONS: [Activation; 3] = [Activation::Relu, Activation::Gelu, Activation::Tanh];
pub const POOL_MODES: [PoolMode; 2] = [PoolMode::Avg, PoolMode::Max];
/// Dropout rates in tenths: 0.0 ..= 0.5.
pub const DROPOUT_TENTHS: [u8; 6] = [0, 1, 2, 3, 4, 5];
/// Channel cap after a concat combiner.
pub const CONCAT_MAX_CHANNELS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Map,
    Seq,
}

impl Stage {
    pub fn tag(self) -> &'static str {
        match self {
            Stage::Map => "2d",
            Stage::Seq => "1d",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "2d" => Some(Stage::Map),
            "1d" => Some(Stage::Seq),
            _ => None,
        }
    }

    pub fn kinds(self) -> &'static [OpKind] {
        match self {
            Stage::Map => &[
                OpKind::Conv2d,
                OpKind::AvgPool,
                OpKind::MaxPool,
                OpKind::Norm,
                OpKind::Dropout,
                OpKind::SpatialAttention,
                OpKind::Identity,
            ],
            Stage::Seq => &[
                OpKind::Mlp,
                OpKind::SelfAttention,
                OpKind::Conv1d,
                OpKind::Pool1d,
                OpKind::Identity,
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    Conv2d,
    AvgPool,
    MaxPool,
    Norm,
    Dropout,
    SpatialAttention,
    Identity,
    Mlp,
    SelfAttention,
    Conv1d,
    Pool1d,
}

impl OpKind {
    pub const ALL: [OpKind; 11] = [
        OpKind::Conv2d,
        OpKind::AvgPool,
        OpKind::MaxPool,
        OpKind::Norm,
        OpKind::Dropout,
        OpKind::SpatialAttention,
        OpKind::Identity,
        OpKind::Mlp,
        OpKind::SelfAttention,
        OpKind::Conv1d,
        OpKind::Pool1d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Conv2d => "conv2d",
            OpKind::AvgPool => "avg_pool",
            OpKind::MaxPool => "max_pool",
            OpKind::Norm => "norm",
            OpKind::Dropout => "dropout",
            OpKind::SpatialAttention => "spatial_attention",
            OpKind::Identity => "identity",
            OpKind::Mlp => "mlp",
            OpKind::SelfAttention => "self_attention",
            OpKind::Conv1d => "conv1d",
            OpKind::Pool1d => "pool1d",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Conv2d { kernel: usize, channels: usize, act: Activation },
    AvgPool { kernel: usize },
    MaxPool { kernel: usize },
    Norm,
    Dropout { tenths: u8 },
    SpatialAttention { heads: usize, channels: usize },
    Identity,
    Mlp { width: usize, act: Activation },
    SelfAttention { heads: usize },
    Conv1d { kernel: usize, channels: usize, act: Activation },
    Pool1d { kernel: usize, mode: PoolMode },
}

fn pick<T: Copy, R: Rng + ?Sized>(rng: &mut R, xs: &[T]) -> T {
    xs[rng.random_range(0..xs.len())]
}

/// Moves one step along an ordered domain, bouncing off the ends.
fn step<T: Copy + PartialEq, R: Rng + ?Sized>(rng: &mut R, xs: &[T], cur: T) -> T {
    let i = xs.iter().position(|x| *x == cur).unwrap_or(0);
    let up = if i == 0 {
        true
    } else if i + 1 == xs.len() {
        false
    } else {
        rng.random_bool(0.5)
    };
    if up {
        xs[i + 1]
    } else {
        xs[i - 1]
    }
}

impl Op {
    pub fn kind(&self) -> OpKind {
        match self {
            Op::Conv2d { .. } => OpKind::Conv2d,
            Op::AvgPool { .. } => OpKind::AvgPool,
            Op::MaxPool { .. } => OpKind::MaxPool,
            Op::Norm => OpKind::Norm,
            Op::Dropout { .. } => OpKind::Dropout,
            Op::SpatialAttention { .. } => OpKind::SpatialAttention,
            Op::Identity => OpKind::Identity,
            Op::Mlp { .. } => OpKind::Mlp,
            Op::SelfAttention { .. } => OpKind::SelfAttention,
            Op::Conv1d { .. } => OpKind::Conv1d,
            Op::Pool1d { .. } => OpKind::Pool1d,
        }
    }

    pub fn random<R: Rng + ?Sized>(stage: Stage, rng: &mut R) -> Self {
        let kind = pick(rng, stage.kinds());
        Self::random_of_kind(kind, rng)
    }

    pub fn random_of_kind<R: Rng + ?Sized>(kind: OpKind, rng: &mut R) -> Self {
        match kind {
            OpKind::Conv2d => Op::Conv2d {
                kernel: pick(rng, &KERNELS),
                channels: pick(rng, &CHANNELS),
                act: pick(rng, &ACTIVATIONS),
            },
            OpKind::AvgPool => Op::AvgPool {
                kernel: pick(rng, &POOL_KERNELS),
            },
            OpKind::MaxPool => Op::MaxPool {
                kernel: pick(rng, &POOL_KERNELS),
            },
            OpKind::Norm => Op::Norm,
            OpKind::Dropout => Op::Dropout {
                tenths: pick(rng, &DROPOUT_TENTHS),
            },
            OpKind::SpatialAttention => Op::SpatialAttention {
                heads: pick(rng, &HEADS),
                channels: pick(rng, &CHANNELS),
            },
            OpKind::Identity => Op::Identity,
            OpKind::Mlp => Op::Mlp {
                width: pick(rng, &WIDTHS),
                act: pick(rng, &ACTIVATIONS),
            },
            OpKind::SelfAttention => Op::SelfAttention {
                heads: pick(rng, &HEADS),
            },
            OpKind::Conv1d => Op::Conv1d {
                kernel: pick(rng, &KERNELS),
                channels: pick(rng, &CHANNELS),
                act: pick(rng, &ACTIVATIONS),
            },
            OpKind::Pool1d => Op::Pool1d {
                kernel: pick(rng, &POOL_KERNELS),
                mode: pick(rng, &POOL_MODES),
            },
        }
    }

    /// Number of tunable hyperparameters.
    pub fn arity(&self) -> usize {
        match self {
            Op::Norm | Op::Identity => 0,
            Op::AvgPool { .. } | Op::MaxPool { .. } | Op::Dropout { .. } | Op::SelfAttention { .. } => 1,
            Op::SpatialAttention { .. } | Op::Mlp { .. } | Op::Pool1d { .. } => 2,
            Op::Conv2d { .. } | Op::Conv1d { .. } => 3,
        }
    }

    /// Moves hyperparameter `which` (< arity) one step in its domain.
    pub fn perturbed<R: Rng + ?Sized>(&self, which: usize, rng: &mut R) -> Self {
        let mut op = *self;
        match &mut op {
            Op::Conv2d { kernel, channels, act } | Op::Conv1d { kernel, channels, act } => match which {
                0 => *kernel = step(rng, &KERNELS, *kernel),
                1 => *channels = step(rng, &CHANNELS, *channels),
                _ => *act = step(rng, &ACTIVATIONS, *act),
            },
            Op::AvgPool { kernel } | Op::MaxPool { kernel } => *kernel = step(rng, &POOL_KERNELS, *kernel),
            Op::Dropout { tenths } => *tenths = step(rng, &DROPOUT_TENTHS, *tenths),
            Op::SpatialAttention { heads, channels } => match which {
                0 => *heads = step(rng, &HEADS, *heads),
                _ => *channels = step(rng, &CHANNELS, *channels),
            },
            Op::Mlp { width, act } => match which {
                0 => *width = step(rng, &WIDTHS, *width),
                _ => *act = step(rng, &ACTIVATIONS, *act),
            },
            Op::SelfAttention { heads } => *heads = step(rng, &HEADS, *heads),
            Op::Pool1d { kernel, mode } => match which {
                0 => *kernel = step(rng, &POOL_KERNELS, *kernel),
                _ => *mode = step(rng, &POOL_MODES, *mode),
            },
            Op::Norm | Op::Identity => {}
        }
        op
    }

    pub fn allowed_in(&self, stage: Stage) -> bool {
        stage.kinds().contains(&self.kind())
    }

    pub fn in_domain(&self) -> bool {
        match *self {
            Op::Conv2d { kernel, channels, act } | Op::Conv1d { kernel, channels, act } => {
                KERNELS.contains(&kernel) && CHANNELS.contains(&channels) && ACTIVATIONS.contains(&act)
            }
            Op::AvgPool { kernel } | Op::MaxPool { kernel } => POOL_KERNELS.contains(&kernel),
            Op::Dropout { tenths } => DROPOUT_TENTHS.contains(&tenths),
            Op::SpatialAttention { heads, channels } => HEADS.contains(&heads) && CHANNELS.contains(&channels),
            Op::Mlp { width, act } => WIDTHS.contains(&width) && ACTIVATIONS.contains(&act),
            Op::SelfAttention { heads } => HEADS.contains(&heads),
            Op::Pool1d { kernel, .. } => POOL_KERNELS.contains(&kernel),
            Op::Norm | Op::Identity => true,
        }
    }

    /// `key=value` pairs for the text encoding.
    pub fn params(&self) -> Vec<(&'static str, String)> {
        match *self {
            Op::Conv2d { kernel, channels, act } | Op::Conv1d { kernel, channels, act } => vec![
                ("k", kernel.to_string()),
                ("c", channels.to_string()),
                ("act", act.name().to_string()),
            ],
            Op::AvgPool { kernel } | Op::MaxPool { kernel } => vec![("k", kernel.to_string())],
            Op::Dropout { tenths } => vec![("rate", format!("0.{tenths}"))],
            Op::SpatialAttention { heads, channels } => {
                vec![("heads", heads.to_string()), ("c", channels.to_string())]
            }
            Op::Mlp { width, act } => vec![("w", width.to_string()), ("act", act.name().to_string())],
            Op::SelfAttention { heads } => vec![("heads", heads.to_string())],
            Op::Pool1d { kernel, mode } => vec![
                ("k", kernel.to_string()),
                (
                    "mode",
                    match mode {
                        PoolMode::Avg => "avg",
                        PoolMode::Max => "max",
                    }
                    .to_string(),
                ),
            ],
            Op::Norm | Op::Identity => vec![],
        }
    }

    pub fn from_params(kind: OpKind, p: &BTreeMap<String, String>) -> Result<Self, ArchError> {
        let get = |k: &str| {
            p.get(k)
                .map(String::as_str)
                .ok_or_else(|| ArchError::Parse(format!("{} is missing `{k}`", kind.name())))
        };
        let num = |k: &str| -> Result<usize, ArchError> {
            get(k)?
                .parse()
                .map_err(|_| ArchError::Parse(format!("{} has a non-integer `{k}`", kind.name())))
        };
        let act = |k: &str| -> Result<Activation, ArchError> {
            Activation::parse(get(k)?).ok_or_else(|| ArchError::Parse(format!("unknown activation in {}", kind.name())))
        };
        let op = match kind {
            OpKind::Conv2d => Op::Conv2d {
                kernel: num("k")?,
                channels: num("c")?,
                act: act("act")?,
            },
            OpKind::Conv1d => Op::Conv1d {
                kernel: num("k")?,
                channels: num("c")?,
                act: act("act")?,
            },
            OpKind::AvgPool => Op::AvgPool { kernel: num("k")? },
            OpKind::MaxPool => Op::MaxPool { kernel: num("k")? },
            OpKind::Norm => Op::Norm,
            OpKind::Identity => Op::Identity,
            OpKind::Dropout => {
                let r = get("rate")?;
                let tenths = r
                    .strip_prefix("0.")
                    .and_then(|d| d.parse::<u8>().ok())
                    .filter(|d| *d < 10)
                    .ok_or_else(|| ArchError::Parse(format!("bad dropout rate {r:?}")))?;
                Op::Dropout { tenths }
            }
            OpKind::SpatialAttention => Op::SpatialAttention {
                heads: num("heads")?,
                channels: num("c")?,
            },
            OpKind::Mlp => Op::Mlp {
                width: num("w")?,
                act: act("act")?,
            },
            OpKind::SelfAttention => Op::SelfAttention { heads: num("heads")? },
            OpKind::Pool1d => Op::Pool1d {
                kernel: num("k")?,
                mode: match get("mode")? {
                    "avg" => PoolMode::Avg,
                    "max" => PoolMode::Max,
                    m => return Err(ArchError::Parse(format!("unknown pool mode {m:?}"))),
                },
            },
        };
        let expected = op.params().len();
        if p.len() != expected + usize::from(p.contains_key("comb")) {
            return Err(ArchError::Parse(format!("unexpected keys for {}", kind.name())));
        }
        Ok(op)
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind().name())?;
        let params = self.params();
        if !params.is_empty() {
            let body: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            write!(f, "({})", body.join(","))?;
        }
        Ok(())
    }
}

/// How a node merges several incoming tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Combiner {
    Add,
    Concat,
}

impl Combiner {
    pub fn name(self) -> &'static str {
        match self {
            Combiner::Add => "add",
            Combiner::Concat => "concat",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "add" => Some(Combiner::Add),
            "concat" => Some(Combiner::Concat),
            _ => None,
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.random_bool(0.5) {
            Combiner::Add
        } else {
            Combiner::Concat
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Combiner::Add => Combiner::Concat,
            Combiner::Concat => Combiner::Add,
        }
    }
}

/// Largest head count `<= heads` (halving) that divides `dim`.
pub fn effective_heads(heads: usize, dim: usize) -> usize {
    let mut h = heads.max(1);
    while h > 1 && dim % h != 0 {
        h /= 2;
    }
    h
}
