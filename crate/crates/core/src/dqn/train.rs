use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::{argmax, Dense, QNetwork, DEFAULT_DROPOUT, DEFAULT_HIDDEN};
use super::replay::{Experience, ReplayBuffer, DEFAULT_CAPACITY};
use super::schedule::ExplorationSchedule;
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Learning rates offered by the hyperparameter sweep.
pub const LR_GRID: [f64; 6] = [0.4, 0.3, 0.2, 0.1, 0.001, 0.0001];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub gamma: f64,
    pub batch: usize,
    /// Environment transitions between target-network copies.
    pub target_sync: u64,
    pub lr: f64,
    /// Multiply the learning rate by `lr_decay` every `lr_decay_every`
    /// optimizer steps, never going below `lr_floor`.
    pub lr_decay: f64,
    pub lr_decay_every: u64,
    pub lr_floor: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub l2_lambda: f64,
    pub hidden: Vec<usize>,
    pub dropout: Vec<f64>,
    pub replay_capacity: usize,
    pub exploration: ExplorationSchedule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            batch: 64,
            target_sync: 10_000,
            lr: 0.001,
            lr_decay: 0.9,
            lr_decay_every: 100,
            lr_floor: 1e-6,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            l2_lambda: 1e-4,
            hidden: DEFAULT_HIDDEN.to_vec(),
            dropout: DEFAULT_DROPOUT.to_vec(),
            replay_capacity: DEFAULT_CAPACITY,
            exploration: ExplorationSchedule::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma {} must lie in (0, 1)", self.gamma));
        }
        if self.batch == 0 || self.batch > self.replay_capacity {
            return bad(format!("batch {} must be in 1..=replay capacity", self.batch));
        }
        if self.lr.is_nan() || self.lr <= 0.0 || self.l2_lambda < 0.0 || self.target_sync == 0 {
            return bad("learning rate must be positive, l2 non-negative, target sync positive".into());
        }
        if self.exploration.eps_end < 0.0 || self.exploration.eps_end > self.exploration.eps_start {
            return bad("exploration needs 0 <= eps_end <= eps_start".into());
        }
        Ok(())
    }

    /// Learning rate in force at optimizer step `step` (0-based).
    pub fn lr_at(&self, step: u64) -> f64 {
        let k = (step / self.lr_decay_every.max(1)) as i32;
        (self.lr * self.lr_decay.powi(k)).max(self.lr_floor)
    }
}

/// Adam moment estimates, one buffer per weight and bias tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<Dense>,
    pub v: Vec<Dense>,
    pub t: u64,
}

impl AdamState {
    pub fn new(net: &QNetwork) -> Self {
        let zeros: Vec<Dense> = net
            .layers
            .iter()
            .map(|l| Dense::zeros(l.w.nrows(), l.w.ncols()))
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

/// One Adam update on a flat parameter slice with bias-corrected moments.
/// `t` is the 1-based step number.
#[allow(clippy::too_many_arguments)]
pub fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) {
    let c1 = 1.0 - beta1.powi(t as i32);
    let c2 = 1.0 - beta2.powi(t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// `(1/N)·Σ(yᵢ − ŷᵢ)²`.
pub fn mse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    crate::forest::mse(y, y_hat)
}

/// `Σ γᵏ·r_k`.
pub fn cumulative_reward(rewards: &[f64], gamma: f64) -> f64 {
    rewards
        .iter()
        .rev()
        .fold(0.0, |acc, r| r + gamma * acc)
}

fn stack(rows: impl ExactSizeIterator<Item = impl AsRef<[f64]>>, dim: usize) -> Array2<f64> {
    let n = rows.len();
    let mut data = Vec::with_capacity(n * dim);
    for r in rows {
        data.extend_from_slice(r.as_ref());
    }
    Array2::from_shape_vec((n, dim), data).expect("rows share the state dimension")
}

/// `r` for terminal transitions, otherwise `r + γ·max_a′ Q_target(s′, a′)`.
pub fn bellman_targets(batch: &[&Experience], target: &QNetwork, gamma: f64) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let next = stack(batch.iter().map(|e| &e.s_next), target.input_dim());
    let q = target.predict(next.view())?;
    Ok(batch
        .iter()
        .zip(q.rows())
        .map(|(e, row)| {
            if e.done {
                e.r
            } else {
                e.r + gamma * row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        })
        .collect())
}

/// Loss `mean((Q(s,a) − y)²) + λ·Σ‖W‖²` and its parameter gradients.
/// Dropout is active only when `dropout_rng` is given.
pub fn loss_and_grads(
    net: &QNetwork,
    states: &Array2<f64>,
    actions: &[usize],
    targets: &[f64],
    l2_lambda: f64,
    dropout_rng: Option<&mut SimRng>,
) -> (f64, Vec<Dense>) {
    let cache = net.forward_cache(states.view(), dropout_rng);
    let n = actions.len() as f64;
    let mut d_out = Array2::zeros(cache.output.dim());
    let mut sq = 0.0;
    for (i, (&a, &y)) in actions.iter().zip(targets).enumerate() {
        let err = cache.output[[i, a]] - y;
        sq += err * err;
        d_out[[i, a]] = 2.0 * err / n;
    }
    let mut grads = net.backward(&cache, d_out);
    for (g, l) in grads.iter_mut().zip(&net.layers) {
        g.w.scaled_add(2.0 * l2_lambda, &l.w);
    }
    (sq / n + l2_lambda * net.weight_sq_norm(), grads)
}

/// Online network, target network and optimizer state of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Learner {
    pub config: TrainConfig,
    pub net: QNetwork,
    pub target: QNetwork,
    pub adam: AdamState,
    /// Environment transitions observed; drives ε and target syncs.
    pub env_steps: u64,
    pub syncs: u64,
}

impl Learner {
    pub fn new(config: TrainConfig, input: usize, actions: usize, rng: &mut SimRng) -> Result<Self> {
        config.validate()?;
        let net = QNetwork::new(input, &config.hidden, &config.dropout, actions, rng)?;
        Ok(Self::from_network(config, net))
    }

    pub fn from_network(config: TrainConfig, net: QNetwork) -> Self {
        Self {
            adam: AdamState::new(&net),
            target: net.clone(),
            net,
            config,
            env_steps: 0,
            syncs: 0,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.config.exploration.epsilon(self.env_steps)
    }

    pub fn lr(&self) -> f64 {
        self.config.lr_at(self.net.step_count)
    }

    /// Record `n` environment transitions, copying the online weights into
    /// the target network whenever a multiple of `target_sync` is crossed.
    pub fn advance_env(&mut self, n: u64) {
        self.env_steps += n;
        let due = self.env_steps / self.config.target_sync;
        if due > self.syncs {
            self.target = self.net.clone();
            self.syncs = due;
        }
    }

    /// Restart optimization from the current weights: fresh moments and
    /// learning-rate schedule.
    pub fn reset_optimizer(&mut self) {
        self.adam = AdamState::new(&self.net);
        self.net.step_count = 0;
    }

    /// ε-greedy actions for a batch of states.
    pub fn select_actions(&self, states: &Array2<f64>, epsilon: f64, rng: &mut SimRng) -> Result<Vec<usize>> {
        select_actions(&self.net, states, epsilon, rng)
    }

    /// One minibatch update. Returns the batch loss.
    pub fn train_step(&mut self, buffer: &ReplayBuffer, rng: &mut SimRng) -> Result<f64> {
        let batch = buffer.sample(self.config.batch, rng)?;
        let targets = bellman_targets(&batch, &self.target, self.config.gamma)?;
        let states = stack(batch.iter().map(|e| &e.s), self.net.input_dim());
        let actions: Vec<usize> = batch.iter().map(|e| e.a).collect();
        let (loss, grads) = loss_and_grads(&self.net, &states, &actions, &targets, self.config.l2_lambda, Some(rng));
        if !loss.is_finite() {
            return Err(Error::Divergence {
                step: self.net.step_count,
                detail: format!("loss is {loss}"),
                checkpoint: None,
            });
        }
        let lr = self.lr();
        self.adam.t += 1;
        let c = &self.config;
        for ((layer, g), (m, v)) in self
            .net
            .layers
            .iter_mut()
            .zip(&grads)
            .zip(self.adam.m.iter_mut().zip(self.adam.v.iter_mut()))
        {
            adam_update(
                layer.w.as_slice_mut().unwrap(),
                g.w.as_slice().unwrap(),
                m.w.as_slice_mut().unwrap(),
                v.w.as_slice_mut().unwrap(),
                self.adam.t,
                lr,
                c.beta1,
                c.beta2,
                c.adam_eps,
            );
            adam_update(
                layer.b.as_slice_mut().unwrap(),
                g.b.as_slice().unwrap(),
                m.b.as_slice_mut().unwrap(),
                v.b.as_slice_mut().unwrap(),
                self.adam.t,
                lr,
                c.beta1,
                c.beta2,
                c.adam_eps,
            );
        }
        self.net.step_count += 1;
        if !self.net.is_finite() {
            return Err(Error::Divergence {
                step: self.net.step_count,
                detail: "parameters became non-finite".into(),
                checkpoint: None,
            });
        }
        Ok(loss)
    }

    /// Mean squared Bellman error on `batch`, without dropout.
    pub fn evaluate(&self, batch: &[&Experience]) -> Result<f64> {
        let targets = bellman_targets(batch, &self.target, self.config.gamma)?;
        let states = stack(batch.iter().map(|e| &e.s), self.net.input_dim());
        let q = self.net.predict(states.view())?;
        let pred: Vec<f64> = batch.iter().zip(q.rows()).map(|(e, r)| r[e.a]).collect();
        mse(&targets, &pred)
    }
}

/// ε-greedy selection over evaluation-mode Q-values.
pub fn select_actions(net: &QNetwork, states: &Array2<f64>, epsilon: f64, rng: &mut SimRng) -> Result<Vec<usize>> {
    let q = net.predict(states.view())?;
    let k = net.n_actions();
    Ok(q.rows()
        .into_iter()
        .map(|row| {
            if rng.random::<f64>() < epsilon {
                rng.random_range(0..k)
            } else {
                argmax(row.as_slice().expect("row-major output"))
            }
        })
        .collect())
}
