use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ventus_arch::op::Stage;
use ventus_arch::variation::{try_mutation, MutationKind};
use ventus_arch::{
    crossover_architectures, infer_shapes, materialize, mutate_architecture, CandidateArchitecture, Combiner,
    DagGraph, LayerNode, Op, OutputHead, SpaceConfig, TrainParams,
};
use ventus_nn::{sgd_step, Activation, Ctx, Dims, Layer, PoolMode, Tensor};

fn node(op: Op) -> LayerNode {
    LayerNode {
        op,
        combiner: Combiner::Add,
    }
}

fn arch(ops2d: Vec<Op>, ops1d: Vec<Op>) -> CandidateArchitecture {
    CandidateArchitecture {
        graph2d: DagGraph::chain(Stage::Map, ops2d.into_iter().map(node).collect()),
        graph1d: DagGraph::chain(Stage::Seq, ops1d.into_iter().map(node).collect()),
        head: OutputHead {
            hidden: 32,
            act: Activation::Relu,
        },
        train: TrainParams::default(),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn shape_examples() {
    let a = arch(
        vec![
            Op::Conv2d {
                kernel: 3,
                channels: 4,
                act: Activation::Relu,
            },
            Op::MaxPool { kernel: 2 },
        ],
        vec![Op::Identity],
    );
    let s = infer_shapes(&a, Dims::new(1, 16, 16)).unwrap();
    assert_eq!(s.nodes2d[0].output, Dims::new(4, 16, 16));
    assert_eq!(s.nodes2d[1].output, Dims::new(4, 8, 8));
    assert_eq!(s.flattened.len(), 256);
    assert_eq!(s.head_inputs, 256);
}

#[test]
fn merge_rules() {
    // 0 -> conv(8ch) -> 2 ; 0 -> pool -> 2 ; node 2 adds after pooling both to 5x5
    let mut g = DagGraph::chain(
        Stage::Map,
        vec![
            node(Op::Identity),
            node(Op::Conv2d {
                kernel: 3,
                channels: 8,
                act: Activation::Tanh,
            }),
            node(Op::AvgPool { kernel: 2 }),
            node(Op::Identity),
        ],
    );
    g.edges = [(0, 1), (0, 2), (1, 3), (2, 3)].into_iter().collect();
    let mut a = arch(vec![Op::Identity], vec![Op::Identity]);
    a.graph2d = g.clone();
    let s = infer_shapes(&a, Dims::new(1, 10, 11)).unwrap();
    assert_eq!(s.nodes2d[3].merged, Dims::new(8, 5, 5));
    a.graph2d.nodes[3].combiner = Combiner::Concat;
    let s = infer_shapes(&a, Dims::new(1, 10, 11)).unwrap();
    assert_eq!(s.nodes2d[3].merged, Dims::new(9, 5, 5));
}

#[test]
fn minimal_architecture_gives_a_scalar() {
    let space = SpaceConfig {
        max_nodes_2d: 1,
        max_nodes_1d: 1,
        ..SpaceConfig::default().with_input(8, 8)
    };
    let a = CandidateArchitecture::sample(&space, &mut rng(1)).unwrap();
    assert_eq!((a.graph2d.len(), a.graph1d.len()), (1, 1));
    let mut net = materialize(&a, 8, 8, 0).unwrap();
    let y = net.forward(&Tensor::zeros(1, Dims::new(1, 8, 8)), &mut Ctx::new(false, 0));
    assert_eq!(y.data.len(), 1);
    assert!(y.data[0].is_finite());
}

#[test]
fn sampling_is_valid_and_deterministic() {
    let space = SpaceConfig::default().with_input(17, 23);
    let mut r = rng(2);
    for _ in 0..200 {
        let a = CandidateArchitecture::sample(&space, &mut r).unwrap();
        a.validate(&space).unwrap();
    }
    let a = CandidateArchitecture::sample(&space, &mut rng(9)).unwrap();
    let b = CandidateArchitecture::sample(&space, &mut rng(9)).unwrap();
    assert_eq!(a.encode(), b.encode());
}

#[test]
fn remove_node_on_single_node_graph_falls_back() {
    let space = SpaceConfig::default();
    let a = arch(
        vec![Op::Conv2d {
            kernel: 3,
            channels: 4,
            act: Activation::Relu,
        }],
        vec![Op::Mlp {
            width: 16,
            act: Activation::Relu,
        }],
    );
    let mut r = rng(3);
    for _ in 0..20 {
        assert!(try_mutation(&a, MutationKind::RemoveNode, &space, &mut r).is_none());
    }
    let (m, kind) = mutate_architecture(&a, &space, &mut r);
    assert!(m.is_valid(&space));
    assert_ne!(kind, Some(MutationKind::RemoveNode));
}

#[test]
fn add_edge_on_two_node_chain_is_rejected() {
    let space = SpaceConfig::default();
    let a = arch(vec![Op::Norm, Op::Identity], vec![Op::Identity, Op::Identity]);
    let mut r = rng(4);
    for _ in 0..20 {
        assert!(try_mutation(&a, MutationKind::AddEdge, &space, &mut r).is_none());
    }
}

#[test]
fn a_thousand_mutations_stay_valid() {
    let space = SpaceConfig::default().with_input(12, 12);
    let mut r = rng(5);
    let mut cur = CandidateArchitecture::sample(&space, &mut r).unwrap();
    for i in 0..1000 {
        if i % 50 == 0 {
            cur = CandidateArchitecture::sample(&space, &mut r).unwrap();
        }
        let before = cur.encode();
        let (next, _) = mutate_architecture(&cur, &space, &mut r);
        assert_eq!(cur.encode(), before, "parent modified in place");
        next.validate(&space).unwrap();
        cur = next;
    }
}

#[test]
fn a_thousand_crossovers_stay_valid() {
    let space = SpaceConfig::default().with_input(12, 12);
    let mut r = rng(6);
    let pool: Vec<_> = (0..40)
        .map(|_| CandidateArchitecture::sample(&space, &mut r).unwrap())
        .collect();
    let mut changed = 0;
    for i in 0..1000 {
        let a = &pool[i % 40];
        let b = &pool[(i * 7 + 3) % 40];
        let (c, d) = crossover_architectures(a, b, &space, &mut r);
        c.validate(&space).unwrap();
        d.validate(&space).unwrap();
        if c != *a {
            changed += 1;
        }
    }
    assert!(changed > 500, "only {changed} crossovers changed the first parent");
}

#[test]
fn identical_parents_are_a_fixed_point() {
    let space = SpaceConfig::default();
    let mut r = rng(7);
    let a = CandidateArchitecture::sample(&space, &mut r).unwrap();
    let (c, d) = crossover_architectures(&a, &a.clone(), &space, &mut r);
    assert_eq!(c, a);
    assert_eq!(d, a);
}

#[test]
fn children_mix_disjoint_parents() {
    let space = SpaceConfig::default();
    let conv = Op::Conv2d {
        kernel: 3,
        channels: 8,
        act: Activation::Gelu,
    };
    let mlp = Op::Mlp {
        width: 32,
        act: Activation::Relu,
    };
    let a = arch(vec![conv, Op::Norm, conv], vec![mlp, Op::Conv1d { kernel: 3, channels: 4, act: Activation::Tanh }]);
    let b = arch(
        vec![Op::MaxPool { kernel: 2 }, Op::Dropout { tenths: 2 }],
        vec![Op::SelfAttention { heads: 2 }, Op::Pool1d { kernel: 2, mode: PoolMode::Avg }, Op::Identity],
    );
    let kinds = |x: &CandidateArchitecture| -> BTreeSet<_> {
        x.graph2d.op_kinds().into_iter().chain(x.graph1d.op_kinds()).collect()
    };
    let (ka, kb) = (kinds(&a), kinds(&b));
    assert!(ka.is_disjoint(&kb));
    let mut r = rng(8);
    let mut ok = 0;
    for _ in 0..100 {
        let (c, d) = crossover_architectures(&a, &b, &space, &mut r);
        let mixed = |x: &CandidateArchitecture| {
            let k = kinds(x);
            !k.is_disjoint(&ka) && !k.is_disjoint(&kb)
        };
        if mixed(&c) && mixed(&d) {
            ok += 1;
        }
    }
    assert!(ok >= 95, "{ok}/100 crossovers mixed both parents");
}

#[test]
fn random_networks_are_finite_on_odd_inputs() {
    let space = SpaceConfig::default().with_input(17, 23);
    let mut r = rng(10);
    let x = Tensor::from_vec(
        2,
        Dims::new(1, 17, 23),
        (0..2 * 17 * 23).map(|i| ((i * 37) % 23) as f32 / 5.0).collect(),
    );
    let zeros = Tensor::zeros(1, Dims::new(1, 17, 23));
    for k in 0..200 {
        let a = CandidateArchitecture::sample(&space, &mut r).unwrap();
        let mut net = materialize(&a, 17, 23, k).unwrap();
        let mut ctx = Ctx::new(false, 0);
        let y = net.forward(&x, &mut ctx);
        assert_eq!(y.data.len(), 2);
        assert!(y.is_finite(), "{}", a.encode());
        assert!(net.forward(&zeros, &mut ctx).is_finite());
        assert!(ventus_nn::param_count(&mut net) > 0);
    }
}

fn batch_mse(net: &mut dyn Layer, x: &Tensor, y: &[f32]) -> f32 {
    let out = net.forward(x, &mut Ctx::new(false, 0));
    out.data.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f32>() / y.len() as f32
}

#[test]
fn one_step_reduces_batch_loss() {
    let space = SpaceConfig::default().with_input(10, 10);
    let mut r = rng(11);
    let n = 16;
    let x = Tensor::from_vec(
        n,
        Dims::new(1, 10, 10),
        (0..n * 100).map(|i| (((i * 7919) % 1000) as f32 / 1000.0) * 2.0 - 1.0).collect(),
    );
    let y: Vec<f32> = (0..n).map(|i| (i as f32 / n as f32) - 0.3).collect();
    let mut decreased = 0;
    for k in 0..100 {
        let a = CandidateArchitecture::sample(&space, &mut r).unwrap();
        let mut net = materialize(&a, 10, 10, k).unwrap();
        let before = batch_mse(&mut net, &x, &y);
        let out = net.forward(&x, &mut Ctx::new(false, 0));
        let grad: Vec<f32> = out.data.iter().zip(&y).map(|(o, t)| 2.0 * (o - t) / n as f32).collect();
        net.backward(&Tensor::from_vec(n, Dims::new(1, 1, 1), grad));
        sgd_step(&mut net, 1e-3);
        let after = batch_mse(&mut net, &x, &y);
        if after < before {
            decreased += 1;
        }
    }
    assert!(decreased >= 95, "{decreased}/100 architectures improved");
}

#[test]
fn dag_gradients_match_finite_differences() {
    let mut g2 = DagGraph::chain(
        Stage::Map,
        vec![
            node(Op::Conv2d {
                kernel: 3,
                channels: 4,
                act: Activation::Tanh,
            }),
            node(Op::AvgPool { kernel: 2 }),
            node(Op::Conv2d {
                kernel: 3,
                channels: 8,
                act: Activation::Gelu,
            }),
            LayerNode {
                op: Op::Identity,
                combiner: Combiner::Concat,
            },
        ],
    );
    g2.edges = [(0, 1), (0, 2), (1, 3), (2, 3)].into_iter().collect();
    let mut g1 = DagGraph::chain(
        Stage::Seq,
        vec![
            node(Op::Conv1d {
                kernel: 3,
                channels: 4,
                act: Activation::Tanh,
            }),
            node(Op::SelfAttention { heads: 2 }),
            node(Op::Identity),
        ],
    );
    g1.edges = [(0, 1), (0, 2), (1, 2)].into_iter().collect();
    let a = CandidateArchitecture {
        graph2d: g2,
        graph1d: g1,
        head: OutputHead {
            hidden: 16,
            act: Activation::Tanh,
        },
        train: TrainParams::default(),
    };
    let mut net = materialize(&a, 6, 5, 3).unwrap();
    let d = Dims::new(1, 6, 5);
    let x: Vec<f32> = (0..30).map(|i| ((i * 13) % 11) as f32 / 11.0 - 0.5).collect();
    let f = |net: &mut dyn Layer, v: &[f32]| -> f64 {
        net.forward(&Tensor::from_vec(1, d, v.to_vec()), &mut Ctx::new(false, 0)).data[0] as f64
    };
    f(&mut net, &x);
    let gx = net.backward(&Tensor::from_vec(1, Dims::new(1, 1, 1), vec![1.0]));
    let eps = 1e-2f32;
    for i in (0..30).step_by(3) {
        let mut p = x.clone();
        p[i] += eps;
        let mut m = x.clone();
        m[i] -= eps;
        let fd = (f(&mut net, &p) - f(&mut net, &m)) / (2.0 * eps as f64);
        let an = gx.data[i] as f64;
        assert!((fd - an).abs() < 2e-2 * (1.0 + fd.abs()), "input {i}: fd {fd} vs analytic {an}");
    }
}

fn arch_strategy() -> impl Strategy<Value = CandidateArchitecture> {
    any::<u64>().prop_map(|seed| {
        CandidateArchitecture::sample(&SpaceConfig::default(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn text_encoding_round_trips(a in arch_strategy()) {
        let text = a.encode();
        let back = CandidateArchitecture::decode(&text).unwrap();
        prop_assert_eq!(&back, &a);
        prop_assert_eq!(back.hash(), a.hash());
    }

    #[test]
    fn variation_preserves_validity(a in arch_strategy(), b in arch_strategy(), seed in any::<u64>()) {
        let space = SpaceConfig::default();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let (c, d) = crossover_architectures(&a, &b, &space, &mut r);
        let (m, _) = mutate_architecture(&c, &space, &mut r);
        prop_assert!(c.is_valid(&space) && d.is_valid(&space) && m.is_valid(&space));
        for g in [&m.graph2d, &m.graph1d] {
            prop_assert!(g.topological_order().is_ok());
        }
    }
}

#[test]
fn decode_rejects_garbage() {
    assert!(CandidateArchitecture::decode("").is_err());
    assert!(CandidateArchitecture::decode("2d|0|warp|comb=add\n").is_err());
    let a = arch(vec![Op::Norm], vec![Op::Identity]);
    let cyclic = a.encode().replace("head|", "edge|1d|0|0\nhead|");
    assert!(CandidateArchitecture::decode(&cyclic).is_err());
}
