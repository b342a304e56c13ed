#![allow(dead_code)]

use ndarray::Array2;
use rand::Rng;
use wellsim::dqn::{loss_and_grads, QNetwork, TrainConfig};
use wellsim::forest::{ForestParams, RfeConfig};
use wellsim::rng;
use wellsim::sim::{ConvergenceConfig, SimConfig, World, WorldConfig};

/// Largest relative gap between backprop and central differences over
/// every parameter, `|a − n| / max(|a| + |n|, 1e-6)`.
pub fn max_gradient_error(net: &QNetwork, states: &Array2<f64>, actions: &[usize], targets: &[f64], l2: f64, h: f64) -> f64 {
    let (_, grads) = loss_and_grads(net, states, actions, targets, l2, None);
    let loss = |n: &QNetwork| loss_and_grads(n, states, actions, targets, l2, None).0;
    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    for (li, g) in grads.iter().enumerate() {
        for idx in 0..g.w.len() {
            let (r, c) = (idx / g.w.ncols(), idx % g.w.ncols());
            let orig = probe.layers[li].w[[r, c]];
            probe.layers[li].w[[r, c]] = orig + h;
            let up = loss(&probe);
            probe.layers[li].w[[r, c]] = orig - h;
            let down = loss(&probe);
            probe.layers[li].w[[r, c]] = orig;
            worst = worst.max(rel_err(g.w[[r, c]], (up - down) / (2.0 * h)));
        }
        for j in 0..g.b.len() {
            let orig = probe.layers[li].b[j];
            probe.layers[li].b[j] = orig + h;
            let up = loss(&probe);
            probe.layers[li].b[j] = orig - h;
            let down = loss(&probe);
            probe.layers[li].b[j] = orig;
            worst = worst.max(rel_err(g.b[j], (up - down) / (2.0 * h)));
        }
    }
    worst
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-6)
}

/// A random small network with its 10-sample batch.
pub fn random_instance(seed: u64) -> (QNetwork, Array2<f64>, Vec<usize>, Vec<f64>) {
    let mut r = rng::seeded(seed);
    let d = r.random_range(2..8);
    let hidden: Vec<usize> = (0..4).map(|_| r.random_range(2..10)).collect();
    let actions = r.random_range(2..5);
    let mut net = QNetwork::new(d, &hidden, &[0.2, 0.25, 0.15, 0.2], actions, &mut r).unwrap();
    // nonzero biases keep pre-activations off the ReLU kink when a narrow
    // layer below is entirely inactive
    for l in &mut net.layers {
        l.b.mapv_inplace(|_| r.random_range(-0.5..0.5));
    }
    let states = Array2::from_shape_fn((10, d), |_| r.random_range(-2.0..2.0));
    let acts = (0..10).map(|_| r.random_range(0..actions)).collect();
    let targets = (0..10).map(|_| r.random_range(-3.0..3.0)).collect();
    (net, states, acts, targets)
}

/// Narrow network and short schedule for fast simulation tests.
pub fn small_train() -> TrainConfig {
    TrainConfig {
        hidden: vec![16, 16, 16, 16],
        replay_capacity: 20_000,
        target_sync: 500,
        ..TrainConfig::default()
    }
}

pub fn small_sim(agents: usize, episodes: usize) -> SimConfig {
    SimConfig {
        agents,
        episodes,
        feature_set: 10,
        train: small_train(),
        convergence: ConvergenceConfig {
            window: 5,
            rel_tol: 0.01,
            patience: 5,
            max_epsilon: 0.1,
        },
        eval_transitions: 200,
        ..SimConfig::default()
    }
}

/// 150-agent world with feature sets of 10 and 20, quick to build.
pub fn small_world() -> World {
    World::build(&WorldConfig {
        agents: 150,
        rfe: RfeConfig {
            grid: vec![10, 20],
            forest: ForestParams {
                n_trees: 20,
                seed: 3,
                ..ForestParams::default()
            },
            seed: 3,
            ..RfeConfig::default()
        },
        ..WorldConfig::default()
    })
    .unwrap()
}
