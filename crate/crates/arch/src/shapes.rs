//! Shape inference and cost accounting.
//!
//! Multi-input nodes first average-pool every input down to the smallest
//! spatial extent among them. `add` then projects (1x1) each input to the
//! channel count of the first predecessor; `concat` stacks channels and
//! projects down to 64 when the stack is wider. Convolutions use "same"
//! padding; pooling divides with floor (never below 1).

use ventus_nn::{Dims, Pool2d};

use crate::arch::CandidateArchitecture;
use crate::error::ArchError;
use crate::graph::DagGraph;
use crate::op::{Combiner, Op, CONCAT_MAX_CHANNELS};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeShape {
    pub inputs: Vec<Dims>,
    /// Shape after combining the inputs.
    pub merged: Dims,
    pub output: Dims,
    pub macs: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeTable {
    pub input: Dims,
    pub nodes2d: Vec<NodeShape>,
    pub flattened: Dims,
    pub nodes1d: Vec<NodeShape>,
    pub head_inputs: usize,
    /// Forward multiply-adds per sample.
    pub macs: u64,
}

impl ShapeTable {
    pub fn output_2d(&self) -> Dims {
        self.nodes2d.last().expect("non-empty").output
    }

    pub fn output_1d(&self) -> Dims {
        self.nodes1d.last().expect("non-empty").output
    }
}

/// Shape after combining `inputs` with `comb`, plus the combining cost.
pub fn merge_dims(inputs: &[Dims], comb: Combiner) -> (Dims, u64) {
    if inputs.len() == 1 {
        return (inputs[0], 0);
    }
    let h = inputs.iter().map(|d| d.h).min().expect("non-empty");
    let w = inputs.iter().map(|d| d.w).min().expect("non-empty");
    let l = (h * w) as u64;
    let mut macs: u64 = inputs
        .iter()
        .filter(|d| d.h != h || d.w != w)
        .map(|d| d.len() as u64)
        .sum();
    let c = match comb {
        Combiner::Add => {
            let c0 = inputs[0].c;
            macs += inputs
                .iter()
                .filter(|d| d.c != c0)
                .map(|d| l * (d.c * c0) as u64)
                .sum::<u64>();
            c0
        }
        Combiner::Concat => {
            let total: usize = inputs.iter().map(|d| d.c).sum();
            if total > CONCAT_MAX_CHANNELS {
                macs += l * (total * CONCAT_MAX_CHANNELS) as u64;
                CONCAT_MAX_CHANNELS
            } else {
                total
            }
        }
    };
    (Dims::new(c, h, w), macs)
}

fn attention_macs(l: u64, c: u64) -> u64 {
    4 * l * c * c + 2 * l * l * c
}

/// Output shape and cost of `op` applied to `d`.
pub fn op_output(op: &Op, d: Dims) -> (Dims, u64) {
    let l = d.positions() as u64;
    match *op {
        Op::Conv2d { kernel, channels, .. } => (
            Dims::new(channels, d.h, d.w),
            l * (channels * d.c * kernel * kernel) as u64,
        ),
        Op::AvgPool { kernel } | Op::MaxPool { kernel } => (Pool2d::output_dims(d, kernel, kernel), d.len() as u64),
        Op::Norm | Op::Dropout { .. } | Op::Identity => (d, d.len() as u64),
        Op::SpatialAttention { channels, .. } => (
            Dims::new(channels, d.h, d.w),
            l * (d.c * channels) as u64 + attention_macs(l, channels as u64),
        ),
        Op::Mlp { width, .. } => (Dims::new(width, 1, 1), (d.len() * width) as u64),
        Op::SelfAttention { .. } => (d, attention_macs(l, d.c as u64)),
        Op::Conv1d { kernel, channels, .. } => (Dims::new(channels, d.h, d.w), l * (channels * d.c * kernel) as u64),
        Op::Pool1d { kernel, .. } => (Pool2d::output_dims(d, 1, kernel), d.len() as u64),
    }
}

fn infer_graph(g: &DagGraph, input: Dims) -> Result<Vec<NodeShape>, ArchError> {
    let mut out: Vec<NodeShape> = Vec::with_capacity(g.len());
    for j in 0..g.len() {
        let node = &g.nodes[j];
        let inputs: Vec<Dims> = if j == 0 {
            vec![input]
        } else {
            g.preds(j).into_iter().map(|p| out[p].output).collect()
        };
        let name = || format!("{} node {j} ({})", g.stage.tag(), node.op);
        if inputs.is_empty() {
            return Err(ArchError::Shape {
                node: name(),
                reason: "no inputs".into(),
            });
        }
        let (merged, merge_macs) = merge_dims(&inputs, node.combiner);
        if g.stage == crate::op::Stage::Seq && merged.h != 1 {
            return Err(ArchError::Shape {
                node: name(),
                reason: format!("sequence stage got a {merged} map"),
            });
        }
        let (output, macs) = op_output(&node.op, merged);
        if output.is_empty() {
            return Err(ArchError::Shape {
                node: name(),
                reason: format!("empty output from {merged}"),
            });
        }
        out.push(NodeShape {
            inputs,
            merged,
            output,
            macs: macs + merge_macs,
        });
    }
    Ok(out)
}

/// Per-node shapes for a `1 x h x w` map input.
pub fn infer_shapes(arch: &CandidateArchitecture, input: Dims) -> Result<ShapeTable, ArchError> {
    if input.is_empty() {
        return Err(ArchError::Shape {
            node: "input".into(),
            reason: "empty input map".into(),
        });
    }
    let nodes2d = infer_graph(&arch.graph2d, input)?;
    let out2d = nodes2d.last().expect("non-empty").output;
    let flattened = ventus_nn::Flatten::output_dims(out2d);
    let nodes1d = infer_graph(&arch.graph1d, flattened)?;
    let head_inputs = nodes1d.last().expect("non-empty").output.len();
    let head_macs = (head_inputs * arch.head.hidden + arch.head.hidden) as u64;
    let macs = nodes2d.iter().chain(&nodes1d).map(|n| n.macs).sum::<u64>() + head_macs;
    Ok(ShapeTable {
        input,
        nodes2d,
        flattened,
        nodes1d,
        head_inputs,
        macs,
    })
}
