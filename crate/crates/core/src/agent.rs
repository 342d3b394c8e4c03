//! Double deep Q-network learner with experience replay, a periodically
//! synchronised target network, ε-greedy exploration, Huber loss and Adam.

use std::collections::VecDeque;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HUBER_DELTA: f64 = 1.0;
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_min: f64,
    pub epsilon_decay: f64,
    pub target_sync_every: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden: Vec<usize>,
    pub buffer_capacity: usize,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            gamma: 0.88,
            epsilon_start: 1.0,
            epsilon_min: 0.05,
            epsilon_decay: 0.99995,
            target_sync_every: 500,
            batch_size: 64,
            learning_rate: 1e-3,
            hidden: vec![128, 128],
            buffer_capacity: 20_000,
            seed: 0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1), got {}", self.gamma));
        }
        if !(0.0 <= self.epsilon_min && self.epsilon_min <= self.epsilon_start && self.epsilon_start <= 1.0) {
            return bad(format!(
                "need 0 <= epsilon_min <= epsilon_start <= 1, got {} and {}",
                self.epsilon_min, self.epsilon_start
            ));
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return bad(format!("epsilon_decay must lie in (0, 1], got {}", self.epsilon_decay));
        }
        if self.target_sync_every == 0 || self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return bad("target_sync_every and batch_size must be positive and fit in the buffer".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive".into());
        }
        Ok(())
    }
}

/// Fully connected network: rectifier on hidden layers, identity output.
///
/// Parameters are stored flat, layer by layer: the weight block
/// (input-major, `w[i * n_out + j]`) followed by the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl QNetwork {
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!("bad layer sizes {sizes:?}")));
        }
        Ok(QNetwork { sizes: sizes.to_vec(), params: vec![0.0; param_count(sizes)] })
    }

    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = QNetwork::zeros(sizes)?;
        let mut off = 0;
        for w in sizes.windows(2) {
            let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
            for p in &mut net.params[off..off + w[0] * w[1]] {
                *p = rng.random_range(-limit..limit);
            }
            off += w[0] * w[1] + w[1];
        }
        Ok(net)
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let net = QNetwork::zeros(sizes)?;
        if params.len() != net.params.len() {
            return Err(Error::DimensionMismatch { expected: net.params.len(), actual: params.len() });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("network parameters must be finite".into()));
        }
        Ok(QNetwork { params, ..net })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Outputs of every layer; the last entry holds the Q-values.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n_layers = self.sizes.len() - 1;
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        let mut off = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let input = if l == 0 { x } else { &acts[l - 1] };
            let w = &self.params[off..off + n_in * n_out];
            let mut out = self.params[off + n_in * n_out..off + n_in * n_out + n_out].to_vec();
            for (i, &xi) in input.iter().enumerate() {
                // Inputs are mostly zero bits; hidden rectifiers are often zero too.
                if xi != 0.0 {
                    for (o, wij) in out.iter_mut().zip(&w[i * n_out..(i + 1) * n_out]) {
                        *o += xi * wij;
                    }
                }
            }
            if l + 1 < n_layers {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(out);
            off += n_in * n_out + n_out;
        }
        acts
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_size() {
            return Err(Error::DimensionMismatch { expected: self.input_size(), actual: x.len() });
        }
        Ok(self.activations(x).pop().unwrap())
    }

    /// Adds `∂(Σ_j dout_j·q_j)/∂params` into `grad`.
    fn backward(&self, x: &[f64], acts: &[Vec<f64>], dout: &[f64], grad: &mut [f64]) {
        let n_layers = self.sizes.len() - 1;
        let offsets: Vec<usize> = self
            .sizes
            .windows(2)
            .scan(0, |acc, w| {
                let o = *acc;
                *acc += w[0] * w[1] + w[1];
                Some(o)
            })
            .collect();
        let mut delta = dout.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let input = if l == 0 { x } else { &acts[l - 1] };
            for (g, d) in grad[off + n_in * n_out..off + n_in * n_out + n_out].iter_mut().zip(&delta) {
                *g += d;
            }
            for (i, &xi) in input.iter().enumerate() {
                if xi != 0.0 {
                    for (g, d) in grad[off + i * n_out..off + (i + 1) * n_out].iter_mut().zip(&delta) {
                        *g += xi * d;
                    }
                }
            }
            if l > 0 {
                let w = &self.params[off..off + n_in * n_out];
                delta = (0..n_in)
                    .map(|i| {
                        if input[i] > 0.0 {
                            w[i * n_out..(i + 1) * n_out].iter().zip(&delta).map(|(a, b)| a * b).sum()
                        } else {
                            0.0
                        }
                    })
                    .collect();
            }
        }
    }

    /// Mean Huber loss of `Q(s_k, a_k)` against `targets[k]` and its gradient.
    pub fn loss_and_grad(&self, states: &[&[f64]], actions: &[usize], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
        if states.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if actions.len() != states.len() || targets.len() != states.len() {
            return Err(Error::DimensionMismatch { expected: states.len(), actual: actions.len().min(targets.len()) });
        }
        let scale = 1.0 / states.len() as f64;
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let mut dout = vec![0.0; self.output_size()];
        for ((s, &a), &y) in states.iter().zip(actions).zip(targets) {
            if s.len() != self.input_size() {
                return Err(Error::DimensionMismatch { expected: self.input_size(), actual: s.len() });
            }
            if a >= self.output_size() {
                return Err(Error::InvalidAction { action: a, size: self.output_size() });
            }
            let acts = self.activations(s);
            let err = acts.last().unwrap()[a] - y;
            loss += huber(err) * scale;
            dout.iter_mut().for_each(|d| *d = 0.0);
            dout[a] = huber_grad(err) * scale;
            self.backward(s, &acts, &dout, &mut grad);
        }
        Ok((loss, grad))
    }
}

pub fn huber(err: f64) -> f64 {
    let a = err.abs();
    if a <= HUBER_DELTA {
        0.5 * err * err
    } else {
        HUBER_DELTA * (a - 0.5 * HUBER_DELTA)
    }
}

pub fn huber_grad(err: f64) -> f64 {
    err.clamp(-HUBER_DELTA, HUBER_DELTA)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        Adam { learning_rate, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powf(self.t as f64);
        let c2 = 1.0 - ADAM_BETA2.powf(self.t as f64);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *p -= self.learning_rate * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Bounded FIFO; the oldest transition is evicted first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer { capacity, items: VecDeque::with_capacity(capacity.min(1 << 16)) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.capacity == 0 {
            return;
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// `k` distinct transitions drawn uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Vec<&Transition> {
        index::sample(rng, self.items.len(), k.min(self.items.len())).into_iter().map(|i| &self.items[i]).collect()
    }
}

/// First index of the maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn select_action<R: Rng + ?Sized>(net: &QNetwork, state: &[f64], epsilon: f64, rng: &mut R) -> Result<usize> {
    let explore: f64 = rng.random();
    if explore < epsilon {
        Ok(rng.random_range(0..net.output_size()))
    } else {
        Ok(argmax(&net.forward(state)?))
    }
}

/// Uniform over the `3n + n(n−1)` actions.
pub fn random_action<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> usize {
    rng.random_range(0..3 * n_qubits + n_qubits * n_qubits.saturating_sub(1))
}

/// `Y = r + γ Q_target(s', argmax_a Q_policy(s', a))`, or `Y = r` when done.
pub fn td_targets(batch: &[&Transition], policy: &QNetwork, target: &QNetwork, gamma: f64) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    batch
        .iter()
        .map(|t| {
            if t.done {
                return Ok(t.reward);
            }
            let a = argmax(&policy.forward(&t.next_state)?);
            Ok(t.reward + gamma * target.forward(&t.next_state)?[a])
        })
        .collect()
}

/// One Adam update on a uniform minibatch; `None` while the buffer is short.
pub fn train_step<R: Rng + ?Sized>(
    policy: &mut QNetwork,
    target: &QNetwork,
    buffer: &ReplayBuffer,
    adam: &mut Adam,
    cfg: &AgentConfig,
    rng: &mut R,
) -> Result<Option<f64>> {
    if buffer.len() < cfg.batch_size || cfg.batch_size == 0 {
        return Ok(None);
    }
    let batch = buffer.sample(cfg.batch_size, rng);
    let ys = td_targets(&batch, policy, target, cfg.gamma)?;
    let states: Vec<&[f64]> = batch.iter().map(|t| t.state.as_slice()).collect();
    let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
    let (loss, grad) = policy.loss_and_grad(&states, &actions, &ys)?;
    adam.step(&mut policy.params, &grad);
    Ok(Some(loss))
}

pub fn sync_target(policy: &QNetwork, target: &mut QNetwork) -> Result<()> {
    if policy.sizes != target.sizes {
        return Err(Error::ArchitectureMismatch(policy.sizes.clone(), target.sizes.clone()));
    }
    target.params.copy_from_slice(&policy.params);
    Ok(())
}

pub fn decay_epsilon(eps: f64, cfg: &AgentConfig) -> f64 {
    (eps * cfg.epsilon_decay).max(cfg.epsilon_min)
}

/// Policy and target networks, optimizer state, replay memory and RNG of one
/// training session.
#[derive(Debug, Clone)]
pub struct DdqnAgent {
    cfg: AgentConfig,
    policy: QNetwork,
    target: QNetwork,
    adam: Adam,
    buffer: ReplayBuffer,
    epsilon: f64,
    actions_seen: u64,
    train_steps: u64,
    rng: ChaCha8Rng,
}

impl DdqnAgent {
    pub fn new(cfg: AgentConfig, input_size: usize, n_actions: usize) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut sizes = vec![input_size];
        sizes.extend(&cfg.hidden);
        sizes.push(n_actions);
        let policy = QNetwork::glorot(&sizes, &mut rng)?;
        let target = policy.clone();
        Ok(DdqnAgent {
            adam: Adam::new(policy.params.len(), cfg.learning_rate),
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            epsilon: cfg.epsilon_start,
            actions_seen: 0,
            train_steps: 0,
            policy,
            target,
            rng,
            cfg,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn policy(&self) -> &QNetwork {
        &self.policy
    }

    pub fn target(&self) -> &QNetwork {
        &self.target
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn actions_seen(&self) -> u64 {
        self.actions_seen
    }

    /// ε-greedy when exploring, otherwise greedy.
    pub fn act(&mut self, state: &[f64], explore: bool) -> Result<usize> {
        let eps = if explore { self.epsilon } else { 0.0 };
        select_action(&self.policy, state, eps, &mut self.rng)
    }

    /// Stores a training transition, decays ε, trains once and syncs the
    /// target on schedule. Returns the loss when a gradient step ran.
    pub fn observe(&mut self, t: Transition) -> Result<Option<f64>> {
        if t.action >= self.policy.output_size() {
            return Err(Error::InvalidAction { action: t.action, size: self.policy.output_size() });
        }
        self.buffer.push(t);
        self.epsilon = decay_epsilon(self.epsilon, &self.cfg);
        self.actions_seen += 1;
        let loss = train_step(&mut self.policy, &self.target, &self.buffer, &mut self.adam, &self.cfg, &mut self.rng)?;
        if loss.is_some() {
            self.train_steps += 1;
        }
        if self.actions_seen.is_multiple_of(self.cfg.target_sync_every as u64) {
            sync_target(&self.policy, &mut self.target)?;
        }
        Ok(loss)
    }

    pub fn checkpoint(&self) -> AgentCheckpoint {
        AgentCheckpoint {
            layer_sizes: self.policy.sizes.clone(),
            policy: encode_f64(&self.policy.params),
            target: encode_f64(&self.target.params),
            adam_m: encode_f64(&self.adam.m),
            adam_v: encode_f64(&self.adam.v),
            adam_t: self.adam.t,
            epsilon: self.epsilon,
            actions_seen: self.actions_seen,
            train_steps: self.train_steps,
            rng: RngState {
                seed: B64.encode(self.rng.get_seed()),
                stream: self.rng.get_stream(),
                word_pos: self.rng.get_word_pos().to_string(),
            },
            config: self.cfg.clone(),
        }
    }

    /// Restores networks, optimizer moments, ε, counters and RNG. The replay
    /// memory starts empty.
    pub fn from_checkpoint(ck: &AgentCheckpoint) -> Result<Self> {
        ck.config.validate()?;
        let policy = QNetwork::from_params(&ck.layer_sizes, decode_f64(&ck.policy)?)?;
        let target = QNetwork::from_params(&ck.layer_sizes, decode_f64(&ck.target)?)?;
        let (m, v) = (decode_f64(&ck.adam_m)?, decode_f64(&ck.adam_v)?);
        if m.len() != policy.params.len() || v.len() != policy.params.len() {
            return Err(Error::Parse("Adam moments do not match the network".into()));
        }
        let seed: [u8; 32] = B64
            .decode(&ck.rng.seed)
            .map_err(|e| Error::Parse(e.to_string()))?
            .try_into()
            .map_err(|_| Error::Parse("RNG seed must be 32 bytes".into()))?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(ck.rng.stream);
        rng.set_word_pos(ck.rng.word_pos.parse().map_err(|e| Error::Parse(format!("word_pos: {e}")))?);
        Ok(DdqnAgent {
            adam: Adam { learning_rate: ck.config.learning_rate, m, v, t: ck.adam_t },
            buffer: ReplayBuffer::new(ck.config.buffer_capacity),
            epsilon: ck.epsilon,
            actions_seen: ck.actions_seen,
            train_steps: ck.train_steps,
            policy,
            target,
            rng,
            cfg: ck.config.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: String,
    pub stream: u64,
    pub word_pos: String,
}

/// JSON checkpoint; float arrays are base64 of little-endian `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub layer_sizes: Vec<usize>,
    pub policy: String,
    pub target: String,
    pub adam_m: String,
    pub adam_v: String,
    pub adam_t: u64,
    pub epsilon: f64,
    pub actions_seen: u64,
    pub train_steps: u64,
    pub rng: RngState,
    pub config: AgentConfig,
}

pub fn encode_f64(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    B64.encode(bytes)
}

pub fn decode_f64(text: &str) -> Result<Vec<f64>> {
    let bytes = B64.decode(text).map_err(|e| Error::Parse(e.to_string()))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Parse(format!("{} bytes is not a whole number of f64", bytes.len())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}
