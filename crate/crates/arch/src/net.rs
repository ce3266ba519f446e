//! Executable networks built from an architecture.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ventus_nn::{
    ActivationLayer, AdaptiveAvgPool, AddPositional, Conv2d, Ctx, Dense, Dims, Dropout, Flatten, Identity, Layer,
    MultiHeadAttention, Param, Pool2d, PoolMode, Residual, SampleNorm, Sequential, Tensor,
};

use crate::arch::CandidateArchitecture;
use crate::error::ArchError;
use crate::graph::DagGraph;
use crate::op::{effective_heads, Combiner, Op};
use crate::shapes::{infer_shapes, NodeShape, ShapeTable};

fn op_layer(op: &Op, d: Dims, rng: &mut ChaCha8Rng) -> Box<dyn Layer> {
    let with_act = |first: Box<dyn Layer>, act| {
        let mut s = Sequential::new();
        s.push_boxed(first);
        s.push(ActivationLayer::new(act));
        Box::new(s) as Box<dyn Layer>
    };
    match *op {
        Op::Conv2d { kernel, channels, act } => with_act(Box::new(Conv2d::new(d.c, channels, kernel, kernel, rng)), act),
        Op::AvgPool { kernel } => Box::new(Pool2d::new(PoolMode::Avg, kernel, kernel)),
        Op::MaxPool { kernel } => Box::new(Pool2d::new(PoolMode::Max, kernel, kernel)),
        Op::Norm => Box::new(SampleNorm::new(d.c)),
        Op::Dropout { tenths } => Box::new(Dropout::new(tenths as f32 / 10.0)),
        Op::SpatialAttention { heads, channels } => {
            let mut s = Sequential::new();
            s.push(Conv2d::pointwise(d.c, channels, rng));
            s.push(AddPositional::new(Dims::new(channels, d.h, d.w), rng));
            s.push(Residual::new(MultiHeadAttention::new(channels, heads, rng)));
            Box::new(s)
        }
        Op::Identity => Box::new(Identity),
        Op::Mlp { width, act } => with_act(Box::new(Dense::new(d.len(), width, rng)), act),
        Op::SelfAttention { heads } => Box::new(Residual::new(MultiHeadAttention::new(
            d.c,
            effective_heads(heads, d.c),
            rng,
        ))),
        Op::Conv1d { kernel, channels, act } => with_act(Box::new(Conv2d::new(d.c, channels, 1, kernel, rng)), act),
        Op::Pool1d { kernel, mode } => Box::new(Pool2d::new(mode, 1, kernel)),
    }
}

struct NodeExec {
    preds: Vec<usize>,
    combiner: Combiner,
    /// Per input: spatial adapter to the merged extent.
    adapters: Vec<Option<AdaptiveAvgPool>>,
    /// Per input (add only): channel projection to the first input.
    projections: Vec<Option<Conv2d>>,
    /// Per input channel counts (concat only, after adapters).
    channels: Vec<usize>,
    concat_proj: Option<Conv2d>,
    op: Box<dyn Layer>,
}

impl NodeExec {
    fn new(preds: Vec<usize>, combiner: Combiner, op: &Op, shape: &NodeShape, rng: &mut ChaCha8Rng) -> Self {
        let merged = shape.merged;
        let multi = shape.inputs.len() > 1;
        let adapters = shape
            .inputs
            .iter()
            .map(|d| (multi && (d.h != merged.h || d.w != merged.w)).then(|| AdaptiveAvgPool::new(merged.h, merged.w)))
            .collect();
        let projections = shape
            .inputs
            .iter()
            .map(|d| (multi && combiner == Combiner::Add && d.c != merged.c).then(|| Conv2d::pointwise(d.c, merged.c, rng)))
            .collect();
        let total: usize = shape.inputs.iter().map(|d| d.c).sum();
        let concat_proj =
            (multi && combiner == Combiner::Concat && total != merged.c).then(|| Conv2d::pointwise(total, merged.c, rng));
        Self {
            preds,
            combiner,
            adapters,
            projections,
            channels: shape.inputs.iter().map(|d| d.c).collect(),
            concat_proj,
            op: op_layer(op, merged, rng),
        }
    }

    fn combine(&mut self, inputs: Vec<&Tensor>, ctx: &mut Ctx) -> Tensor {
        if inputs.len() == 1 {
            return inputs[0].clone();
        }
        let adapted: Vec<Tensor> = inputs
            .into_iter()
            .zip(&mut self.adapters)
            .map(|(t, a)| match a {
                Some(a) => a.forward(t, ctx),
                None => t.clone(),
            })
            .collect();
        match self.combiner {
            Combiner::Add => {
                let mut acc: Option<Tensor> = None;
                for (t, p) in adapted.into_iter().zip(&mut self.projections) {
                    let t = match p {
                        Some(p) => p.forward(&t, ctx),
                        None => t,
                    };
                    match &mut acc {
                        Some(a) => a.add_assign(&t),
                        None => acc = Some(t),
                    }
                }
                acc.expect("at least one input")
            }
            Combiner::Concat => {
                let refs: Vec<&Tensor> = adapted.iter().collect();
                let cat = Tensor::concat_channels(&refs);
                match &mut self.concat_proj {
                    Some(p) => p.forward(&cat, ctx),
                    None => cat,
                }
            }
        }
    }

    /// Gradient w.r.t. each input, in `preds` order.
    fn combine_backward(&mut self, g: Tensor) -> Vec<Tensor> {
        if self.channels.len() == 1 {
            return vec![g];
        }
        let per_input: Vec<Tensor> = match self.combiner {
            Combiner::Add => self
                .projections
                .iter_mut()
                .map(|p| match p {
                    Some(p) => p.backward(&g),
                    None => g.clone(),
                })
                .collect(),
            Combiner::Concat => {
                let g = match &mut self.concat_proj {
                    Some(p) => p.backward(&g),
                    None => g,
                };
                g.split_channels(&self.channels)
            }
        };
        per_input
            .into_iter()
            .zip(&mut self.adapters)
            .map(|(t, a)| match a {
                Some(a) => a.backward(&t),
                None => t,
            })
            .collect()
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        for p in self.projections.iter_mut().flatten() {
            p.visit_params(f);
        }
        if let Some(p) = &mut self.concat_proj {
            p.visit_params(f);
        }
        self.op.visit_params(f);
    }

    fn clear_cache(&mut self) {
        for a in self.adapters.iter_mut().flatten() {
            a.clear_cache();
        }
        for p in self.projections.iter_mut().flatten() {
            p.clear_cache();
        }
        if let Some(p) = &mut self.concat_proj {
            p.clear_cache();
        }
        self.op.clear_cache();
    }
}

/// One DAG stage as a layer.
pub struct StageNet {
    nodes: Vec<NodeExec>,
}

impl StageNet {
    fn new(g: &DagGraph, shapes: &[NodeShape], rng: &mut ChaCha8Rng) -> Self {
        let nodes = g
            .nodes
            .iter()
            .enumerate()
            .map(|(j, n)| NodeExec::new(g.preds(j), n.combiner, &n.op, &shapes[j], rng))
            .collect();
        Self { nodes }
    }
}

impl Layer for StageNet {
    fn forward(&mut self, x: &Tensor, ctx: &mut Ctx) -> Tensor {
        let mut outs: Vec<Tensor> = Vec::with_capacity(self.nodes.len());
        for j in 0..self.nodes.len() {
            let node = &mut self.nodes[j];
            let merged = if j == 0 {
                x.clone()
            } else {
                let inputs: Vec<&Tensor> = node.preds.iter().map(|p| &outs[*p]).collect();
                node.combine(inputs, ctx)
            };
            outs.push(node.op.forward(&merged, ctx));
        }
        outs.pop().expect("non-empty stage")
    }

    fn backward(&mut self, grad: &Tensor) -> Tensor {
        let n = self.nodes.len();
        let mut grads: Vec<Option<Tensor>> = vec![None; n];
        grads[n - 1] = Some(grad.clone());
        for j in (0..n).rev() {
            let g = grads[j].take().expect("every node reaches the sink");
            let node = &mut self.nodes[j];
            let g_in = node.op.backward(&g);
            if j == 0 {
                return g_in;
            }
            let parts = node.combine_backward(g_in);
            for (p, gp) in node.preds.clone().into_iter().zip(parts) {
                match &mut grads[p] {
                    Some(acc) => acc.add_assign(&gp),
                    slot => *slot = Some(gp),
                }
            }
        }
        unreachable!("node 0 returns the input gradient")
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        for n in &mut self.nodes {
            n.visit_params(f);
        }
    }

    fn clear_cache(&mut self) {
        for n in &mut self.nodes {
            n.clear_cache();
        }
    }
}

/// Map stage, flatten, sequence stage and output head; `[n,1,h,w] -> [n,1,1,1]`.
pub struct DragonNet {
    stage2d: StageNet,
    flatten: Flatten,
    stage1d: StageNet,
    head: Sequential,
    pub shapes: ShapeTable,
}

impl Layer for DragonNet {
    fn forward(&mut self, x: &Tensor, ctx: &mut Ctx) -> Tensor {
        let a = self.stage2d.forward(x, ctx);
        let b = self.flatten.forward(&a, ctx);
        let c = self.stage1d.forward(&b, ctx);
        self.head.forward(&c, ctx)
    }

    fn backward(&mut self, grad: &Tensor) -> Tensor {
        let g = self.head.backward(grad);
        let g = self.stage1d.backward(&g);
        let g = self.flatten.backward(&g);
        self.stage2d.backward(&g)
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.stage2d.visit_params(f);
        self.stage1d.visit_params(f);
        self.head.visit_params(f);
    }

    fn clear_cache(&mut self) {
        self.stage2d.clear_cache();
        self.stage1d.clear_cache();
        self.head.clear_cache();
    }
}

/// Builds a trainable network for `h x w` single-channel maps.
pub fn materialize(arch: &CandidateArchitecture, h: usize, w: usize, seed: u64) -> Result<DragonNet, ArchError> {
    arch.graph2d.check()?;
    arch.graph1d.check()?;
    let shapes = infer_shapes(arch, Dims::new(1, h, w))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stage2d = StageNet::new(&arch.graph2d, &shapes.nodes2d, &mut rng);
    let stage1d = StageNet::new(&arch.graph1d, &shapes.nodes1d, &mut rng);
    let mut head = Sequential::new();
    head.push(Dense::new(shapes.head_inputs, arch.head.hidden, &mut rng));
    head.push(ActivationLayer::new(arch.head.act));
    head.push(Dense::new(arch.head.hidden, 1, &mut rng));
    Ok(DragonNet {
        stage2d,
        flatten: Flatten::new(),
        stage1d,
        head,
        shapes,
    })
}
