//! Mutation and crossover.

use rand::Rng;

use crate::arch::{CandidateArchitecture, SpaceConfig, TrainParams, BATCH_SIZES, LEARNING_RATES};
use crate::graph::{DagGraph, LayerNode};
use crate::op::{Combiner, Op, Stage, ACTIVATIONS, WIDTHS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MutationKind {
    AddNode,
    RemoveNode,
    SwapOp,
    PerturbHyperparameter,
    AddEdge,
    RemoveEdge,
}

impl MutationKind {
    pub const ALL: [MutationKind; 6] = [
        MutationKind::AddNode,
        MutationKind::RemoveNode,
        MutationKind::SwapOp,
        MutationKind::PerturbHyperparameter,
        MutationKind::AddEdge,
        MutationKind::RemoveEdge,
    ];
}

/// Retries of a single mutation kind before moving on to another kind.
const TRIES_PER_KIND: usize = 8;

fn random_stage<R: Rng + ?Sized>(rng: &mut R) -> Stage {
    if rng.random_bool(0.5) {
        Stage::Map
    } else {
        Stage::Seq
    }
}

fn add_node<R: Rng + ?Sized>(g: &mut DagGraph, max: usize, rng: &mut R) -> bool {
    if g.len() >= max {
        return false;
    }
    let n = g.len();
    let p = rng.random_range(0..=n);
    let node = LayerNode {
        op: Op::random(g.stage, rng),
        combiner: Combiner::random(rng),
    };
    g.insert_node(p, node);
    if p > 0 {
        g.edges.insert((rng.random_range(0..p), p));
    }
    if p < n {
        g.edges.insert((p, rng.random_range(p + 1..=n)));
    }
    g.repair();
    true
}

fn remove_node<R: Rng + ?Sized>(g: &mut DagGraph, min: usize, rng: &mut R) -> bool {
    if g.len() <= min.max(1) {
        return false;
    }
    g.remove_node(rng.random_range(0..g.len()));
    g.repair();
    true
}

fn swap_op<R: Rng + ?Sized>(g: &mut DagGraph, rng: &mut R) -> bool {
    let i = rng.random_range(0..g.len());
    let kinds: Vec<_> = g
        .stage
        .kinds()
        .iter()
        .copied()
        .filter(|k| *k != g.nodes[i].op.kind())
        .collect();
    let kind = kinds[rng.random_range(0..kinds.len())];
    g.nodes[i].op = Op::random_of_kind(kind, rng);
    true
}

fn add_edge<R: Rng + ?Sized>(g: &mut DagGraph, rng: &mut R) -> bool {
    let n = g.len();
    let free: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .filter(|e| !g.edges.contains(e))
        .collect();
    if free.is_empty() {
        return false;
    }
    g.edges.insert(free[rng.random_range(0..free.len())]);
    true
}

fn remove_edge<R: Rng + ?Sized>(g: &mut DagGraph, rng: &mut R) -> bool {
    let removable: Vec<(usize, usize)> = g
        .edges
        .iter()
        .copied()
        .filter(|&(a, b)| g.succs(a).len() > 1 && g.preds(b).len() > 1)
        .collect();
    if removable.is_empty() {
        return false;
    }
    g.edges.remove(&removable[rng.random_range(0..removable.len())]);
    true
}

/// Slots that can be perturbed: (stage, node, hyperparameter) or the head.
enum Slot {
    Node(Stage, usize, usize),
    Combiner(Stage, usize),
    HeadWidth,
    HeadAct,
}

fn perturb<R: Rng + ?Sized>(arch: &mut CandidateArchitecture, rng: &mut R) -> bool {
    let mut slots = vec![Slot::HeadWidth, Slot::HeadAct];
    for stage in [Stage::Map, Stage::Seq] {
        let g = arch.graph(stage);
        for (i, n) in g.nodes.iter().enumerate() {
            slots.extend((0..n.op.arity()).map(|k| Slot::Node(stage, i, k)));
            if g.preds(i).len() > 1 {
                slots.push(Slot::Combiner(stage, i));
            }
        }
    }
    match slots.swap_remove(rng.random_range(0..slots.len())) {
        Slot::Node(stage, i, k) => {
            let g = arch.graph_mut(stage);
            g.nodes[i].op = g.nodes[i].op.perturbed(k, rng);
        }
        Slot::Combiner(stage, i) => {
            let g = arch.graph_mut(stage);
            g.nodes[i].combiner = g.nodes[i].combiner.flipped();
        }
        Slot::HeadWidth => {
            let i = WIDTHS.iter().position(|w| *w == arch.head.hidden).unwrap_or(0);
            let j = if i == 0 || (i + 1 < WIDTHS.len() && rng.random_bool(0.5)) {
                i + 1
            } else {
                i - 1
            };
            arch.head.hidden = WIDTHS[j];
        }
        Slot::HeadAct => {
            let others: Vec<_> = ACTIVATIONS.iter().copied().filter(|a| *a != arch.head.act).collect();
            arch.head.act = others[rng.random_range(0..others.len())];
        }
    }
    true
}

/// Applies one mutation of the given kind; `None` when it cannot apply.
pub fn try_mutation<R: Rng + ?Sized>(
    arch: &CandidateArchitecture,
    kind: MutationKind,
    space: &SpaceConfig,
    rng: &mut R,
) -> Option<CandidateArchitecture> {
    let mut out = arch.clone();
    let stage = random_stage(rng);
    let (lo, hi) = space.bounds(stage);
    let g = out.graph_mut(stage);
    let applied = match kind {
        MutationKind::AddNode => add_node(g, hi, rng),
        MutationKind::RemoveNode => remove_node(g, lo, rng),
        MutationKind::SwapOp => swap_op(g, rng),
        MutationKind::AddEdge => add_edge(g, rng),
        MutationKind::RemoveEdge => remove_edge(g, rng),
        MutationKind::PerturbHyperparameter => perturb(&mut out, rng),
    };
    (applied && out != *arch && out.is_valid(space)).then_some(out)
}

/// One uniformly chosen mutation, falling back to other kinds when the
/// chosen one cannot produce a valid architecture. Returns the kind used.
pub fn mutate_architecture<R: Rng + ?Sized>(
    arch: &CandidateArchitecture,
    space: &SpaceConfig,
    rng: &mut R,
) -> (CandidateArchitecture, Option<MutationKind>) {
    let mut kinds = MutationKind::ALL.to_vec();
    while !kinds.is_empty() {
        let kind = kinds.swap_remove(rng.random_range(0..kinds.len()));
        for _ in 0..TRIES_PER_KIND {
            if let Some(m) = try_mutation(arch, kind, space, rng) {
                return (m, Some(kind));
            }
        }
    }
    (arch.clone(), None)
}

/// Redraws one training hyperparameter.
pub fn mutate_training<R: Rng + ?Sized>(train: &TrainParams, rng: &mut R) -> TrainParams {
    let mut t = *train;
    if rng.random_bool(0.5) {
        let others: Vec<f64> = LEARNING_RATES.iter().copied().filter(|v| *v != t.learning_rate).collect();
        t.learning_rate = others[rng.random_range(0..others.len())];
    } else {
        let others: Vec<usize> = BATCH_SIZES.iter().copied().filter(|v| *v != t.batch_size).collect();
        t.batch_size = others[rng.random_range(0..others.len())];
    }
    t
}

/// Contiguous segment `[lo, hi)`; a proper subset whenever `n >= 2`.
fn segment<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (usize, usize) {
    if n == 1 {
        return (0, 1);
    }
    let len = rng.random_range(1..n);
    let lo = rng.random_range(0..=n - len);
    (lo, lo + len)
}

/// `host` with its nodes `[h0, h1)` replaced by `donor`'s nodes `[d0, d1)`.
///
/// Host edges into the removed block are redirected to the first inserted
/// node and edges out of it leave from the last inserted node.
pub fn splice(host: &DagGraph, (h0, h1): (usize, usize), donor: &DagGraph, (d0, d1): (usize, usize)) -> DagGraph {
    let inserted = d1 - d0;
    let first = h0;
    let last = h0 + inserted - 1;
    let map_host = |i: usize| -> usize {
        if i < h0 {
            i
        } else if i >= h1 {
            i - (h1 - h0) + inserted
        } else {
            unreachable!("segment nodes are handled separately")
        }
    };
    let mut nodes = host.nodes[..h0].to_vec();
    nodes.extend_from_slice(&donor.nodes[d0..d1]);
    nodes.extend_from_slice(&host.nodes[h1..]);
    let mut g = DagGraph {
        stage: host.stage,
        nodes,
        edges: Default::default(),
    };
    let in_seg = |i: usize| (h0..h1).contains(&i);
    for &(a, b) in &host.edges {
        let e = match (in_seg(a), in_seg(b)) {
            (false, false) => (map_host(a), map_host(b)),
            (false, true) => (map_host(a), first),
            (true, false) => (last, map_host(b)),
            (true, true) => continue,
        };
        if e.0 < e.1 {
            g.edges.insert(e);
        }
    }
    for &(a, b) in &donor.edges {
        if (d0..d1).contains(&a) && (d0..d1).contains(&b) {
            g.edges.insert((a - d0 + first, b - d0 + first));
        }
    }
    g.repair();
    g
}

/// Bounded attempts at a segment swap before returning the parents.
const CROSSOVER_TRIES: usize = 16;

/// Swaps node segments between the parents' map graph, sequence graph or
/// both. Identical parents come back unchanged.
pub fn crossover_architectures<R: Rng + ?Sized>(
    a: &CandidateArchitecture,
    b: &CandidateArchitecture,
    space: &SpaceConfig,
    rng: &mut R,
) -> (CandidateArchitecture, CandidateArchitecture) {
    if a == b {
        return (a.clone(), b.clone());
    }
    for _ in 0..CROSSOVER_TRIES {
        let u: f64 = rng.random();
        let stages: &[Stage] = if u < 0.4 {
            &[Stage::Map]
        } else if u < 0.8 {
            &[Stage::Seq]
        } else {
            &[Stage::Map, Stage::Seq]
        };
        let (mut c, mut d) = (a.clone(), b.clone());
        for &stage in stages {
            let (ga, gb) = (a.graph(stage), b.graph(stage));
            let sa = segment(ga.len(), rng);
            let sb = segment(gb.len(), rng);
            *c.graph_mut(stage) = splice(ga, sa, gb, sb);
            *d.graph_mut(stage) = splice(gb, sb, ga, sa);
        }
        if c.is_valid(space) && d.is_valid(space) {
            return (c, d);
        }
    }
    (a.clone(), b.clone())
}
