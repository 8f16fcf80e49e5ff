use gpo_core::features::state_features;
use gpo_core::policy::{load_checkpoint, save_checkpoint, NetConfig, PolicyValueNet};
use gpo_core::symbolic::symbolic_factorize;
use gpo_core::trainer::{greedy_order, rollout, RolloutMode};
use gpo_core::{EliminationGraph, Ordering, SparsityPattern};
use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_graph(rng: &mut ChaCha8Rng, n: usize, density: f64) -> SparsityPattern {
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(density) {
                pairs.push((i, j));
            }
        }
    }
    SparsityPattern::from_edges(n, pairs).unwrap()
}

/// `sum_i w_i * log_probs_i + c * value`.
fn objective(net: &PolicyValueNet, g: &EliminationGraph, w: &Array1<f64>, c: f64) -> f64 {
    let out = net.forward(g, &state_features(g)).unwrap();
    out.log_probs.dot(w) + c * out.value
}

fn check_gradients(config: NetConfig, g: &EliminationGraph, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = PolicyValueNet::new(config, seed).unwrap();
    let m = g.live_count();
    let w = Array1::from_shape_fn(m, |_| rng.random_range(-1.0..1.0));
    let c = rng.random_range(-1.0..1.0);

    let out = net.forward(g, &state_features(g)).unwrap();
    let analytic = net.backward(&out.tape, w.view(), c).unwrap();

    let h = 1e-4;
    let mut worst = 0.0f64;
    for i in 0..net.num_params() {
        let orig = net.params()[i];
        net.params_mut()[i] = orig + h;
        let plus = objective(&net, g, &w, c);
        net.params_mut()[i] = orig - h;
        let minus = objective(&net, g, &w, c);
        net.params_mut()[i] = orig;
        let fd = (plus - minus) / (2.0 * h);
        let a = analytic.0[i];
        let scale = a.abs().max(fd.abs());
        let err = if scale < 1e-7 { 0.0 } else { (a - fd).abs() / scale };
        assert!(err <= 1e-3, "parameter {i}: analytic {a}, finite difference {fd}");
        worst = worst.max(err);
    }
    assert!(worst.is_finite());
}

#[test]
fn mixhop_gradients_mid_episode() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p = random_graph(&mut rng, 9, 0.4);
    let mut g = EliminationGraph::new(&p);
    g.eliminate(2).unwrap();
    g.eliminate(5).unwrap();
    check_gradients(NetConfig::default(), &g, 3);
}

#[test]
fn single_hop_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    // Includes an isolated node, whose neighbor mean is zero.
    let mut p = random_graph(&mut rng, 6, 0.5);
    p = SparsityPattern::from_edges(7, p.edges().iter().copied()).unwrap();
    check_gradients(NetConfig::single_hop(2, 8), &EliminationGraph::new(&p), 4);
}

#[test]
fn three_layer_gradients() {
    let p = SparsityPattern::from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 4)]).unwrap();
    check_gradients(NetConfig::mixhop(&[0, 1, 2], 3, 4), &EliminationGraph::new(&p), 5);
}

#[test]
fn relabeling_permutes_outputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for config in [NetConfig::default(), NetConfig::single_hop(2, 16)] {
        let net = PolicyValueNet::new(config, 8).unwrap();
        for _ in 0..20 {
            let n = rng.random_range(2..25);
            let density = rng.random_range(0.1..0.5);
            let p = random_graph(&mut rng, n, density);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let q = p.relabel(&perm).unwrap();

            let (gp, gq) = (EliminationGraph::new(&p), EliminationGraph::new(&q));
            let a = net.forward(&gp, &state_features(&gp)).unwrap();
            let b = net.forward(&gq, &state_features(&gq)).unwrap();
            for (v, &lp) in a.nodes.iter().zip(a.log_probs.iter()) {
                let j = b.nodes.iter().position(|&u| u == perm[*v]).unwrap();
                assert!((lp - b.log_probs[j]).abs() <= 1e-9);
            }
            assert!((a.value - b.value).abs() <= 1e-9);
        }
    }
}

#[test]
fn forward_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = random_graph(&mut rng, 30, 0.2);
    let g = EliminationGraph::new(&p);
    let a = PolicyValueNet::new(NetConfig::default(), 17).unwrap();
    let b = PolicyValueNet::new(NetConfig::default(), 17).unwrap();
    assert_eq!(a.params(), b.params());
    let (fa, fb) = (
        a.forward(&g, &state_features(&g)).unwrap(),
        b.forward(&g, &state_features(&g)).unwrap(),
    );
    assert_eq!(fa.log_probs, fb.log_probs);
    assert_eq!(fa.value.to_bits(), fb.value.to_bits());
    assert_ne!(
        PolicyValueNet::new(NetConfig::default(), 18).unwrap().params(),
        a.params()
    );
}

#[test]
fn rollout_trace_matches_symbolic_factorization() {
    let net = PolicyValueNet::new(NetConfig::default(), 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut patterns = vec![SparsityPattern::star(4), SparsityPattern::cycle(7)];
    patterns.extend((0..10).map(|_| random_graph(&mut rng, 15, 0.3)));
    for p in &patterns {
        let (record, ord) = rollout(&net, p, &mut rng, RolloutMode::Sample).unwrap();
        let f = symbolic_factorize(p, &ord).unwrap();
        assert_eq!(record.len(), p.n());
        for (step, trace) in record.steps.iter().zip(&f.trace.steps) {
            assert_eq!(step.node, trace.node);
            assert_eq!(step.reward, trace.reward());
            assert_eq!(step.edges_before, trace.edges_before);
        }
        assert_eq!(record.total_fill(), f.fill_count());
    }
}

/// Logit of a live node is a decreasing function of its degree, so the greedy
/// policy always removes a lowest-degree node.
fn leaf_preferring_net() -> PolicyValueNet {
    let mut net = PolicyValueNet::new(NetConfig::default(), 0).unwrap();
    net.params_mut().fill(0.0);
    net.param_block_mut("actor.layer0.op0.weight").unwrap()[0] = -1.0;
    net.param_block_mut("actor.layer1.op0.weight").unwrap()[0] = 1.0;
    net.param_block_mut("actor.head.weight").unwrap()[0] = 1.0;
    net
}

#[test]
fn leaf_preferring_policy_has_no_fill_on_paths() {
    let net = leaf_preferring_net();
    for n in [3, 4, 10] {
        let p = SparsityPattern::path(n);
        let ord = greedy_order(&net, &p).unwrap();
        assert_eq!(symbolic_factorize(&p, &ord).unwrap().fill_count(), 0);
    }
    // Eliminating the middle first would fill (0, 2).
    assert_eq!(
        greedy_order(&net, &SparsityPattern::path(3)).unwrap(),
        Ordering::new(vec![0, 1, 2]).unwrap()
    );
}

#[test]
fn checkpoint_round_trip_preserves_policy() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let net = PolicyValueNet::new(NetConfig::single_hop(2, 16), 21).unwrap();
    save_checkpoint(&net, &path).unwrap();
    let back = load_checkpoint(&path, Some(net.config())).unwrap();
    assert_eq!(back.params(), net.params());
    assert!(load_checkpoint(&path, Some(&NetConfig::default())).is_err());
    let p = SparsityPattern::cycle(9);
    assert_eq!(greedy_order(&back, &p).unwrap(), greedy_order(&net, &p).unwrap());
}
