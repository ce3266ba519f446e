//! Complete candidate architectures and their text encoding.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use sha2::{Digest, Sha256};
use ventus_nn::{Activation, Dims};

use crate::error::ArchError;
use crate::graph::{DagGraph, LayerNode};
use crate::op::{Combiner, Op, OpKind, Stage, ACTIVATIONS, WIDTHS};
use crate::shapes::{infer_shapes, ShapeTable};

pub const LEARNING_RATES: [f64; 3] = [3e-4, 1e-3, 3e-3];
pub const BATCH_SIZES: [usize; 3] = [32, 64, 128];

/// Final dense block: `hidden` units, activation, then one output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OutputHead {
    pub hidden: usize,
    pub act: Activation,
}

/// Training hyperparameters carried with the architecture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 64,
        }
    }
}

/// Map graph, flatten, sequence graph, output head.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateArchitecture {
    pub graph2d: DagGraph,
    pub graph1d: DagGraph,
    pub head: OutputHead,
    pub train: TrainParams,
}

/// Bounds of the search space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceConfig {
    pub min_nodes_2d: usize,
    pub max_nodes_2d: usize,
    pub min_nodes_1d: usize,
    pub max_nodes_1d: usize,
    /// Largest region crop the architecture must handle.
    pub input: (usize, usize),
    /// Upper bound on forward multiply-adds per sample.
    pub max_macs: u64,
    /// Probability of an extra incoming edge per node when sampling.
    pub extra_edge_prob: f64,
}

impl Default for SpaceConfig {
    fn default() -> Self {
        Self {
            min_nodes_2d: 1,
            max_nodes_2d: 6,
            min_nodes_1d: 1,
            max_nodes_1d: 4,
            input: (16, 16),
            max_macs: 4_000_000,
            extra_edge_prob: 0.3,
        }
    }
}

impl SpaceConfig {
    pub fn with_input(mut self, h: usize, w: usize) -> Self {
        self.input = (h, w);
        self
    }

    pub fn bounds(&self, stage: Stage) -> (usize, usize) {
        match stage {
            Stage::Map => (self.min_nodes_2d, self.max_nodes_2d),
            Stage::Seq => (self.min_nodes_1d, self.max_nodes_1d),
        }
    }

    pub fn input_dims(&self) -> Dims {
        Dims::new(1, self.input.0, self.input.1)
    }
}

impl CandidateArchitecture {
    pub fn graph(&self, stage: Stage) -> &DagGraph {
        match stage {
            Stage::Map => &self.graph2d,
            Stage::Seq => &self.graph1d,
        }
    }

    pub fn graph_mut(&mut self, stage: Stage) -> &mut DagGraph {
        match stage {
            Stage::Map => &mut self.graph2d,
            Stage::Seq => &mut self.graph1d,
        }
    }

    /// Full validity: structure, op domains, node bounds, shapes and cost.
    pub fn validate(&self, space: &SpaceConfig) -> Result<ShapeTable, ArchError> {
        for stage in [Stage::Map, Stage::Seq] {
            let g = self.graph(stage);
            if g.stage != stage {
                return Err(ArchError::Invalid(format!("graph in the {} slot is tagged {}", stage.tag(), g.stage.tag())));
            }
            g.check()?;
            let (lo, hi) = space.bounds(stage);
            if g.len() < lo || g.len() > hi {
                return Err(ArchError::Invalid(format!(
                    "{} graph has {} nodes, allowed {lo}..={hi}",
                    stage.tag(),
                    g.len()
                )));
            }
        }
        if !WIDTHS.contains(&self.head.hidden) || !ACTIVATIONS.contains(&self.head.act) {
            return Err(ArchError::Invalid("output head out of range".into()));
        }
        if !crate::arch::LEARNING_RATES.contains(&self.train.learning_rate) || !BATCH_SIZES.contains(&self.train.batch_size) {
            return Err(ArchError::Invalid("training hyperparameters out of range".into()));
        }
        let shapes = infer_shapes(self, space.input_dims())?;
        if shapes.macs > space.max_macs {
            return Err(ArchError::Invalid(format!(
                "{} multiply-adds per sample exceed the budget of {}",
                shapes.macs, space.max_macs
            )));
        }
        Ok(shapes)
    }

    pub fn is_valid(&self, space: &SpaceConfig) -> bool {
        self.validate(space).is_ok()
    }

    /// Stable text form, one line per node, edge, head and training setting.
    pub fn encode(&self) -> String {
        let mut s = String::new();
        for g in [&self.graph2d, &self.graph1d] {
            for (i, n) in g.nodes.iter().enumerate() {
                let mut kv: Vec<String> = n.op.params().into_iter().map(|(k, v)| format!("{k}={v}")).collect();
                kv.push(format!("comb={}", n.combiner.name()));
                let _ = writeln!(s, "{}|{i}|{}|{}", g.stage.tag(), n.op.kind().name(), kv.join(","));
            }
            for (a, b) in &g.edges {
                let _ = writeln!(s, "edge|{}|{a}|{b}", g.stage.tag());
            }
        }
        let _ = writeln!(s, "head|w={},act={}", self.head.hidden, self.head.act.name());
        let _ = writeln!(s, "train|lr={},bs={}", self.train.learning_rate, self.train.batch_size);
        s
    }

    pub fn decode(text: &str) -> Result<Self, ArchError> {
        let mut nodes: BTreeMap<Stage, Vec<LayerNode>> = BTreeMap::new();
        let mut edges: BTreeMap<Stage, Vec<(usize, usize)>> = BTreeMap::new();
        let mut head = None;
        let mut train = None;
        for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| ArchError::Parse(format!("line {lineno}: {what}: {line:?}"));
            let fields: Vec<&str> = line.split('|').collect();
            match fields[0] {
                "2d" | "1d" => {
                    let stage = Stage::parse(fields[0]).expect("matched tag");
                    if fields.len() != 4 {
                        return Err(bad("expected stage|index|op|params"));
                    }
                    let idx: usize = fields[1].parse().map_err(|_| bad("bad node index"))?;
                    let list = nodes.entry(stage).or_default();
                    if idx != list.len() {
                        return Err(bad("node indices must be consecutive from 0"));
                    }
                    let kind = OpKind::parse(fields[2]).ok_or_else(|| bad("unknown op"))?;
                    let kv = parse_kv(fields[3]).map_err(|e| bad(&e))?;
                    let combiner = kv
                        .get("comb")
                        .and_then(|c| Combiner::parse(c))
                        .ok_or_else(|| bad("missing or unknown combiner"))?;
                    let op = Op::from_params(kind, &kv).map_err(|e| bad(&e.to_string()))?;
                    list.push(LayerNode { op, combiner });
                }
                "edge" => {
                    if fields.len() != 4 {
                        return Err(bad("expected edge|stage|from|to"));
                    }
                    let stage = Stage::parse(fields[1]).ok_or_else(|| bad("unknown stage"))?;
                    let a = fields[2].parse().map_err(|_| bad("bad edge source"))?;
                    let b = fields[3].parse().map_err(|_| bad("bad edge target"))?;
                    edges.entry(stage).or_default().push((a, b));
                }
                "head" => {
                    let kv = parse_kv(fields.get(1).copied().unwrap_or("")).map_err(|e| bad(&e))?;
                    let hidden = kv.get("w").and_then(|v| v.parse().ok()).ok_or_else(|| bad("bad head width"))?;
                    let act = kv
                        .get("act")
                        .and_then(|v| Activation::parse(v))
                        .ok_or_else(|| bad("bad head activation"))?;
                    head = Some(OutputHead { hidden, act });
                }
                "train" => {
                    let kv = parse_kv(fields.get(1).copied().unwrap_or("")).map_err(|e| bad(&e))?;
                    let learning_rate = kv.get("lr").and_then(|v| v.parse().ok()).ok_or_else(|| bad("bad learning rate"))?;
                    let batch_size = kv.get("bs").and_then(|v| v.parse().ok()).ok_or_else(|| bad("bad batch size"))?;
                    train = Some(TrainParams {
                        learning_rate,
                        batch_size,
                    });
                }
                _ => return Err(bad("unknown record type")),
            }
        }
        let mut graph = |stage: Stage| -> Result<DagGraph, ArchError> {
            let list = nodes
                .remove(&stage)
                .ok_or_else(|| ArchError::Parse(format!("no {} nodes", stage.tag())))?;
            let e = edges.remove(&stage).unwrap_or_default();
            let mut set = std::collections::BTreeSet::new();
            for pair in e {
                if !set.insert(pair) {
                    return Err(ArchError::Parse(format!("duplicate {} edge {:?}", stage.tag(), pair)));
                }
            }
            Ok(DagGraph {
                stage,
                nodes: list,
                edges: set,
            })
        };
        let arch = Self {
            graph2d: graph(Stage::Map)?,
            graph1d: graph(Stage::Seq)?,
            head: head.ok_or_else(|| ArchError::Parse("missing head line".into()))?,
            train: train.ok_or_else(|| ArchError::Parse("missing train line".into()))?,
        };
        arch.graph2d.check()?;
        arch.graph1d.check()?;
        Ok(arch)
    }

    /// Short content hash of the text encoding.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.encode().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// One-line summary, e.g. `conv2d(k=3,...)>max_pool(k=2) | mlp(...) | head 64`.
    pub fn summary(&self) -> String {
        let stage = |g: &DagGraph| g.nodes.iter().map(|n| n.op.to_string()).collect::<Vec<_>>().join(">");
        format!(
            "{} | {} | head {} {}",
            stage(&self.graph2d),
            stage(&self.graph1d),
            self.head.hidden,
            self.head.act.name()
        )
    }

    /// Draws a random member of the space, retrying until it is valid.
    pub fn sample<R: Rng + ?Sized>(space: &SpaceConfig, rng: &mut R) -> Result<Self, ArchError> {
        const ATTEMPTS: usize = 200;
        for _ in 0..ATTEMPTS {
            let arch = Self {
                graph2d: sample_graph(Stage::Map, space, rng),
                graph1d: sample_graph(Stage::Seq, space, rng),
                head: OutputHead {
                    hidden: WIDTHS[rng.random_range(0..WIDTHS.len())],
                    act: ACTIVATIONS[rng.random_range(0..ACTIVATIONS.len())],
                },
                train: TrainParams {
                    learning_rate: LEARNING_RATES[rng.random_range(0..LEARNING_RATES.len())],
                    batch_size: BATCH_SIZES[rng.random_range(0..BATCH_SIZES.len())],
                },
            };
            if arch.is_valid(space) {
                return Ok(arch);
            }
        }
        Err(ArchError::Exhausted(ATTEMPTS))
    }
}

fn parse_kv(s: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for part in s.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("expected key=value, got {part:?}"))?;
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(format!("duplicate key {k:?}"));
        }
    }
    Ok(out)
}

pub(crate) fn sample_graph<R: Rng + ?Sized>(stage: Stage, space: &SpaceConfig, rng: &mut R) -> DagGraph {
    let (lo, hi) = space.bounds(stage);
    let n = rng.random_range(lo..=hi);
    let nodes = (0..n)
        .map(|_| LayerNode {
            op: Op::random(stage, rng),
            combiner: Combiner::random(rng),
        })
        .collect();
    let mut g = DagGraph {
        stage,
        nodes,
        edges: Default::default(),
    };
    for j in 1..n {
        g.edges.insert((rng.random_range(0..j), j));
        if j >= 2 && rng.random_bool(space.extra_edge_prob) {
            g.edges.insert((rng.random_range(0..j), j));
        }
    }
    g.repair();
    g
}
