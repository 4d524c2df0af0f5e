use d4x_core::diffusion::{compose_beta_bar, corrupt, NoiseLevel};
use d4x_core::explain::{explain_with_dense, flip_budget, FlipStrategy};
use d4x_core::gcn::Gcn;
use d4x_core::graph::{extract_computational_subgraph, pairs, parse_dataset, write_dataset, Dataset, Graph, Label, Task};
use d4x_core::metrics::mmd::mmd_gaussian_emd;
use d4x_core::metrics::random_recurrence_expectation;
use d4x_core::metrics::stats::{emd, Histogram};
use d4x_core::ppgn::{Ppgn, PpgnConfig};
use d4x_core::rng;
use d4x_core::tensor::{Adam, GradBuffer, ParamSet, Tape, Tensor};
use d4x_core::train::sample_concrete;
use d4x_oracles::{adam_scalar_step, bfs_distances, emd_transport, total_variation, transition_enumeration, transition_matrix_product};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng as _;

fn graph_strategy(max_n: usize) -> impl Strategy<Value = Graph> {
    (2..=max_n).prop_flat_map(|n| {
        proptest::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |bits| {
            let edges: Vec<(usize, usize)> = pairs(n).zip(&bits).filter(|(_, &b)| b).map(|(p, _)| p).collect();
            Graph::from_edges(n, &edges).unwrap()
        })
    })
}

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng::seeded(seed));
    p
}

fn histogram_strategy(bins: usize) -> impl Strategy<Value = Histogram> {
    proptest::collection::vec(0.0f64..1.0, bins).prop_map(move |raw| {
        let mut mass = raw;
        mass[0] += 1e-3;
        let s: f64 = mass.iter().sum();
        mass.iter_mut().for_each(|m| *m /= s);
        Histogram { lo: 0.0, width: 0.5, mass }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compose_beta_bar_matches_matrix_product(betas in proptest::collection::vec(0.0f64..=0.5, 0..30)) {
        let bb = compose_beta_bar(&betas).unwrap();
        prop_assert!((0.0..=0.5).contains(&bb));
        let m = transition_matrix_product(&betas);
        prop_assert!((bb - m[0][1]).abs() < 1e-12);
        prop_assert!((1.0 - bb - m[0][0]).abs() < 1e-12);
    }

    #[test]
    fn corrupt_preserves_graph_invariants(g in graph_strategy(9), bb in 0.0f64..=0.5, seed in any::<u64>()) {
        let out = corrupt(&g, NoiseLevel::new(bb, 100).unwrap(), &mut rng::seeded(seed));
        prop_assert!(out.validate().is_ok());
        prop_assert_eq!(out.n(), g.n());
        prop_assert_eq!(out.features(), g.features());
    }

    #[test]
    fn corrupt_at_zero_is_identity(g in graph_strategy(9), seed in any::<u64>()) {
        prop_assert_eq!(corrupt(&g, NoiseLevel::clean(), &mut rng::seeded(seed)), g);
    }

    #[test]
    fn classifier_probabilities_are_a_distribution(g in graph_strategy(8), seed in 0u64..1000) {
        let gcn = Gcn::new(1, 3, Task::GraphClassification, 3, 8, seed).unwrap();
        let p = gcn.predict(&g).unwrap();
        prop_assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.probs.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn graph_classifier_is_permutation_invariant(g in graph_strategy(8), seed in 0u64..1000) {
        let gcn = Gcn::new(1, 3, Task::GraphClassification, 3, 8, seed).unwrap();
        let a = gcn.predict(&g).unwrap();
        let b = gcn.predict(&g.permuted(&permutation(g.n(), seed))).unwrap();
        for (x, y) in a.probs.iter().zip(&b.probs) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn node_classifier_is_permutation_equivariant(g in graph_strategy(8), seed in 0u64..1000) {
        let gcn = Gcn::new(1, 2, Task::NodeClassification, 2, 8, seed).unwrap();
        let perm = permutation(g.n(), seed);
        let a = gcn.predict_nodes(&g).unwrap();
        let b = gcn.predict_nodes(&g.permuted(&perm)).unwrap();
        for i in 0..g.n() {
            for (x, y) in a[i].probs.iter().zip(&b[perm[i]].probs) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn denoiser_is_permutation_equivariant(g in graph_strategy(7), bb in 0.0f64..=0.5, seed in 0u64..1000) {
        let cfg = PpgnConfig { blocks: 2, hidden: 4, time_hidden: 4, feature_dim: 1, center_channel: false };
        let ppgn = Ppgn::new(cfg, seed).unwrap();
        let level = NoiseLevel::new(bb, 100).unwrap();
        let perm = permutation(g.n(), seed);
        let a = ppgn.denoise(&g, &g, level).unwrap();
        let h = g.permuted(&perm);
        let b = ppgn.denoise(&h, &h, level).unwrap();
        let n = g.n();
        for i in 0..n {
            for j in 0..n {
                let x = a.data()[i * n + j];
                prop_assert!((x - b.data()[perm[i] * n + perm[j]]).abs() < 1e-9);
                prop_assert!((x - a.data()[j * n + i]).abs() < 1e-12);
                if i == j { prop_assert_eq!(x, 0.0); } else { prop_assert!(x > 0.0 && x < 1.0); }
            }
        }
    }

    #[test]
    fn emd_matches_transport_oracle(a in histogram_strategy(12), b in histogram_strategy(12)) {
        let ours = emd(&a, &b).unwrap();
        prop_assert!((ours - emd_transport(&a.mass, &b.mass, a.width)).abs() < 1e-9);
    }

    #[test]
    fn emd_is_a_metric(a in histogram_strategy(8), b in histogram_strategy(8), c in histogram_strategy(8)) {
        let ab = emd(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - emd(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!(ab <= emd(&a, &c).unwrap() + emd(&c, &b).unwrap() + 1e-12);
    }

    #[test]
    fn mmd_is_symmetric(a in proptest::collection::vec(histogram_strategy(6), 1..5), b in proptest::collection::vec(histogram_strategy(6), 1..5)) {
        let ab = mmd_gaussian_emd(&a, &b, 1.0).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - mmd_gaussian_emd(&b, &a, 1.0).unwrap()).abs() < 1e-12);
        prop_assert!(mmd_gaussian_emd(&a, &a, 1.0).unwrap() < 1e-6);
    }

    #[test]
    fn achieved_mr_equals_budget(g in graph_strategy(9), mr in 0.0f64..=1.0, seed in any::<u64>()) {
        prop_assume!(g.num_edges() > 0);
        let gcn = Gcn::new(1, 2, Task::GraphClassification, 2, 4, 0).unwrap();
        let mut r = rng::seeded(seed);
        let n = g.n();
        let mut dense = Tensor::zeros(&[n, n]);
        for (i, j) in pairs(n) {
            let v: f64 = r.gen_range(0.01..0.99);
            dense.data_mut()[i * n + j] = v;
            dense.data_mut()[j * n + i] = v;
        }
        let rec = explain_with_dense(&gcn, &g, &dense, mr, FlipStrategy::TopK, &mut r).unwrap();
        let budget = flip_budget(mr, g.num_edges(), g.num_pairs());
        prop_assert_eq!(rec.added.len() + rec.deleted.len(), budget);
        prop_assert!((rec.achieved_mr - budget as f64 / g.num_edges() as f64).abs() < 1e-12);
        prop_assert!(rec.explanation.validate().is_ok());
    }

    #[test]
    fn dataset_text_round_trip(gs in proptest::collection::vec(graph_strategy(7), 1..6), labels in proptest::collection::vec(0usize..3, 6)) {
        let graphs: Vec<Graph> = gs.into_iter().zip(&labels).map(|(g, &y)| g.with_label(Label::Graph(y))).collect();
        let ds = Dataset::new(graphs, Task::GraphClassification, 3, 1, 4).unwrap();
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        let back = parse_dataset(buf.as_slice()).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn subgraph_matches_bfs(g in graph_strategy(10), center in 0usize..10) {
        let center = center % g.n();
        let lists: Vec<Vec<usize>> = (0..g.n()).map(|i| g.neighbors(i).collect()).collect();
        let dist = bfs_distances(&lists, center);
        let sub = extract_computational_subgraph(&g, center, usize::MAX).unwrap();
        let reachable: Vec<usize> = (0..g.n()).filter(|&i| dist[i] != usize::MAX).collect();
        prop_assert_eq!(&sub.mapping, &reachable);
        for hops in 0..4 {
            let s = extract_computational_subgraph(&g, center, hops).unwrap();
            let within: Vec<usize> = (0..g.n()).filter(|&i| dist[i] <= hops).collect();
            prop_assert_eq!(&s.mapping, &within);
            for (a, &u) in s.mapping.iter().enumerate() {
                for (b, &v) in s.mapping.iter().enumerate() {
                    prop_assert_eq!(s.graph.has_edge(a, b), g.has_edge(u, v));
                }
            }
        }
    }

    #[test]
    fn adam_first_step_matches_scalar_oracle(values in proptest::collection::vec(-2.0f64..2.0, 1..6), grads in proptest::collection::vec(-3.0f64..3.0, 6), lr in 1e-4f64..1e-1) {
        let k = values.len();
        let mut params = ParamSet::new();
        params.push("w", Tensor::vector(values.clone()));
        let mut buf = GradBuffer::zeros_like(&params);
        buf.grads_mut()[0].copy_from_slice(&grads[..k]);
        let mut adam = Adam::new(&params, lr);
        adam.step(&mut params, &buf);
        for i in 0..k {
            let want = adam_scalar_step(values[i], grads[i], lr, adam.beta1, adam.beta2, adam.eps, 1);
            prop_assert!((params.values()[0].data()[i] - want).abs() < 1e-12);
        }
    }
}

fn dense_rows(g: &Graph) -> Vec<Vec<u8>> {
    (0..g.n()).map(|i| (0..g.n()).map(|j| u8::from(g.has_edge(i, j))).collect()).collect()
}

#[test]
fn corrupt_matches_exhaustive_enumeration() {
    let shapes = [
        Graph::from_edges(3, &[(0, 1)]).unwrap(),
        Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap(),
        Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2)]).unwrap(),
    ];
    for (k, g) in shapes.iter().enumerate() {
        for &bb in &[0.1, 0.3] {
            let table = transition_enumeration(&dense_rows(g), bb).unwrap();
            let mut counts = vec![0u64; table.probs.len()];
            let mut r = rng::stream(11, "tv", k as u64);
            for _ in 0..100_000 {
                let c = corrupt(g, NoiseLevel::new(bb, 100).unwrap(), &mut r);
                let present: Vec<bool> = table.pairs.iter().map(|&(i, j)| c.has_edge(i, j)).collect();
                counts[table.index_of(&present)] += 1;
            }
            let tv = total_variation(&table.probs, &counts);
            assert!(tv < 0.01, "graph {k} beta_bar {bb}: TV {tv}");
        }
    }
}

#[test]
fn random_recurrence_matches_monte_carlo() {
    let (k, p) = (5usize, 36usize);
    let mut r = rng::seeded(3);
    let idx: Vec<usize> = (0..p).collect();
    let trials = 20_000;
    let mut total = 0.0;
    for _ in 0..trials {
        let a: Vec<usize> = idx.choose_multiple(&mut r, k).copied().collect();
        let b: Vec<usize> = idx.choose_multiple(&mut r, k).copied().collect();
        total += a.iter().filter(|x| b.contains(x)).count() as f64 / k as f64;
    }
    let mc = total / trials as f64;
    assert!((mc - random_recurrence_expectation(k, p)).abs() < 0.01, "monte carlo {mc}");
}

fn concrete_mean(p: f64, lambda: f64, draws: usize, seed: u64) -> f64 {
    let mut r = rng::seeded(seed);
    let mut dense = Tensor::zeros(&[2, 2]);
    dense.data_mut()[1] = p;
    dense.data_mut()[2] = p;
    let draw = |r: &mut rng::Rng| {
        let tape = Tape::new();
        let v = sample_concrete(tape.constant(dense.clone()), lambda, 1e-7, r).unwrap().value().data()[1];
        v
    };
    (0..draws).map(|_| draw(&mut r)).sum::<f64>() / draws as f64
}

#[test]
fn concrete_mean_tracks_bernoulli() {
    let m = concrete_mean(0.9, 0.01, 100_000, 1);
    assert!((m - 0.9).abs() < 0.01, "mean {m}");
}

#[test]
fn concrete_is_symmetric_at_one_half() {
    let m = concrete_mean(0.5, 1.0, 100_000, 2);
    assert!((0.49..=0.51).contains(&m), "mean {m}");
}
