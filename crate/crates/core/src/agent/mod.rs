//! One-step deep Q-learning with uniform replay, a periodically synced target
//! network and linearly annealed epsilon-greedy exploration.

mod checkpoint;
mod network;
mod replay;
mod view;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint};
pub use network::{argmax, ActionValues, Activations, AdamState, Dense, QNetwork, DEFAULT_SIZES};
pub use replay::{PackedObs, ReplayBuffer, Transition, ACTIVE_INPUTS};
pub use view::{agent_observation, rotate_to_north, VIEW_CENTER};

use crate::gridworld::{layout_hash, Action, EnvState, Layout, Status, OBSERVATION_LEN};
use crate::{Error, Result};

/// Parameter update rule used by [`td_update`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of `total_env_steps` over which epsilon decays linearly.
    pub epsilon_decay_fraction: f64,
    pub batch_size: usize,
    pub target_sync_interval: usize,
    pub total_env_steps: usize,
    pub buffer_capacity: usize,
    /// Environment steps collected before the first update.
    pub learning_starts: usize,
    /// One gradient update every this many environment steps.
    pub train_interval: usize,
    /// Also store the left-right mirror image of every transition.
    pub mirror_augment: bool,
    pub hidden: Vec<usize>,
    pub train_suite_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.00183,
            optimizer: Optimizer::Adam,
            gamma: 0.9,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.5,
            batch_size: 64,
            target_sync_interval: 1000,
            total_env_steps: 300_000,
            buffer_capacity: 50_000,
            learning_starts: 1_000,
            train_interval: 4,
            mirror_augment: true,
            hidden: vec![128, 64],
            train_suite_size: 200,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        let unit = 0.0..=1.0;
        if !unit.contains(&self.epsilon_start) || !unit.contains(&self.epsilon_end) {
            return bad("epsilon bounds must lie in [0, 1]");
        }
        if !(self.epsilon_decay_fraction > 0.0 && self.epsilon_decay_fraction <= 1.0) {
            return bad("epsilon_decay_fraction must lie in (0, 1]");
        }
        if self.batch_size == 0
            || self.target_sync_interval == 0
            || self.buffer_capacity == 0
            || self.train_interval == 0
        {
            return bad("batch_size, target_sync_interval, buffer_capacity and train_interval must be positive");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![OBSERVATION_LEN];
        sizes.extend(&self.hidden);
        sizes.push(Action::COUNT);
        sizes
    }

    /// Linear schedule from `epsilon_start` to `epsilon_end`, flat afterwards.
    pub fn epsilon_at(&self, step: usize) -> f64 {
        let horizon = (self.total_env_steps as f64 * self.epsilon_decay_fraction).max(1.0);
        let frac = (step as f64 / horizon).min(1.0);
        let eps = self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start);
        eps.clamp(0.0, 1.0)
    }
}

/// Epsilon-greedy action: uniform random with probability `epsilon`,
/// otherwise the argmax (lowest index on ties).
pub fn act<R: Rng + ?Sized>(net: &QNetwork, obs: &[f64], epsilon: f64, rng: &mut R) -> Result<Action> {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return Ok(Action::ALL[rng.gen_range(0..Action::COUNT)]);
    }
    Ok(greedy_action(&net.forward(obs)?))
}

pub fn greedy_action(values: &ActionValues) -> Action {
    Action::ALL[argmax(values)]
}

/// Scratch space reused across updates.
#[derive(Debug, Default)]
pub struct UpdateScratch {
    grads: Option<QNetwork>,
    adam: Option<AdamState>,
    acts: Activations,
    dense: Vec<f64>,
}

/// One SGD step on the mean squared TD error of `batch`. Returns the loss
/// before the step.
pub fn td_update(
    net: &mut QNetwork,
    target: &QNetwork,
    batch: &[&Transition],
    config: &TrainConfig,
    scratch: &mut UpdateScratch,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("training batch".into()));
    }
    let n = batch.len() as f64;
    let grads = scratch.grads.get_or_insert_with(|| net.zeros_like());
    if grads.sizes() != net.sizes() {
        *grads = net.zeros_like();
    }
    grads.params_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    for t in batch {
        let y = td_target(target, t, config.gamma, &mut scratch.dense)?;
        t.obs.unpack_into(&mut scratch.dense);
        net.forward_cached(&scratch.dense, &mut scratch.acts)?;
        let err = scratch.acts.output()[t.action.index()] - y;
        loss += err * err;
        let mut d_out = [0.0; Action::COUNT];
        d_out[t.action.index()] = 2.0 * err / n;
        net.accumulate_gradient(&scratch.acts, &d_out, grads);
    }
    match config.optimizer {
        Optimizer::Sgd => net.sgd_step(grads, config.learning_rate),
        Optimizer::Adam => {
            let adam = scratch.adam.get_or_insert_with(|| AdamState::new(net));
            adam.step(net, grads, config.learning_rate);
        }
    }
    Ok(loss / n)
}

fn td_target(target: &QNetwork, t: &Transition, gamma: f64, dense: &mut Vec<f64>) -> Result<f64> {
    if t.terminal {
        return Ok(t.reward);
    }
    t.next_obs.unpack_into(dense);
    let next = target.forward(dense)?;
    let best = next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(t.reward + gamma * best)
}

/// Mean squared TD error of `batch` without updating anything.
pub fn td_loss(net: &QNetwork, target: &QNetwork, batch: &[&Transition], gamma: f64) -> Result<f64> {
    let mut dense = Vec::new();
    let mut total = 0.0;
    for t in batch {
        let y = td_target(target, t, gamma, &mut dense)?;
        t.obs.unpack_into(&mut dense);
        let q = net.forward(&dense)?;
        total += (q[t.action.index()] - y).powi(2);
    }
    Ok(total / batch.len().max(1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub episode_return: f64,
    pub steps: usize,
    pub epsilon: f64,
    /// Mean TD loss of the updates made during the episode (NaN if none).
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: QNetwork,
    pub log: Vec<EpisodeLog>,
}

/// Renders the training log as comma-separated text.
pub fn render_train_log(log: &[EpisodeLog]) -> String {
    let mut s = String::from("episode,return,steps,epsilon,loss\n");
    for e in log {
        s.push_str(&format!("{},{},{},{},{}\n", e.episode, e.episode_return, e.steps, e.epsilon, e.loss));
    }
    s
}

/// Trains a fresh network on `suite`, picking a uniformly random layout for
/// every episode. Fully determined by `config` and `suite`.
pub fn train(config: &TrainConfig, suite: &[Layout], max_steps: usize) -> Result<TrainOutcome> {
    config.validate()?;
    if suite.is_empty() {
        return Err(Error::Empty("training suite".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = QNetwork::new(&config.layer_sizes(), &mut rng)?;
    let mut target = net.clone();
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let mut scratch = UpdateScratch::default();
    let mut log = Vec::new();

    let mut env: Option<EnvState> = None;
    let mut obs = Vec::new();
    let (mut ep_return, mut ep_loss, mut ep_updates) = (0.0, 0.0, 0usize);

    for step in 0..config.total_env_steps {
        let state = match env.as_mut() {
            Some(s) => s,
            None => {
                let layout = suite[rng.gen_range(0..suite.len())].clone();
                obs = agent_observation(env.insert(EnvState::new(layout, max_steps)?));
                env.as_mut().unwrap()
            }
        };
        let epsilon = config.epsilon_at(step);
        let action = act(&net, &obs, epsilon, &mut rng)?;
        let out = state.step(action)?;
        let next_obs = agent_observation(state);
        let transition = Transition {
            obs: PackedObs::pack(&obs).expect("encoder emits one-hot vectors"),
            action,
            reward: out.reward,
            next_obs: PackedObs::pack(&next_obs).expect("encoder emits one-hot vectors"),
            terminal: out.done,
        };
        buffer.push(transition);
        if config.mirror_augment {
            buffer.push(transition.mirrored());
        }
        ep_return += out.reward;

        if buffer.len() >= config.learning_starts.max(config.batch_size) && step % config.train_interval == 0 {
            let batch = buffer.sample(config.batch_size, &mut rng);
            ep_loss += td_update(&mut net, &target, &batch, config, &mut scratch)?;
            ep_updates += 1;
        }
        if (step + 1) % config.target_sync_interval == 0 {
            target.copy_from(&net);
        }

        if out.done {
            log.push(EpisodeLog {
                episode: log.len(),
                episode_return: ep_return,
                steps: state.steps_taken(),
                epsilon,
                loss: if ep_updates > 0 { ep_loss / ep_updates as f64 } else { f64::NAN },
            });
            env = None;
            (ep_return, ep_loss, ep_updates) = (0.0, 0.0, 0);
        } else {
            obs = next_obs;
        }
    }
    Ok(TrainOutcome { network: net, log })
}

/// Anything that picks an action for a running episode.
pub trait Policy: Sync {
    fn choose(&self, state: &EnvState) -> Result<Action>;
}

impl Policy for QNetwork {
    fn choose(&self, state: &EnvState) -> Result<Action> {
        Ok(greedy_action(&self.forward(&agent_observation(state))?))
    }
}

impl<F> Policy for F
where
    F: Fn(&EnvState) -> Action + Sync,
{
    fn choose(&self, state: &EnvState) -> Result<Action> {
        Ok(self(state))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub layout_hash: u64,
    pub episode_return: f64,
    pub steps: usize,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub mean_reward: f64,
    pub reward_stddev: f64,
    pub success_rate: f64,
    pub lava_rate: f64,
    pub timeout_rate: f64,
    pub episodes: usize,
    #[serde(skip)]
    pub log: Vec<EpisodeSummary>,
}

impl EvalResult {
    pub fn from_episodes(log: Vec<EpisodeSummary>) -> Self {
        let n = log.len().max(1) as f64;
        let mean = log.iter().map(|e| e.episode_return).sum::<f64>() / n;
        let var = log.iter().map(|e| (e.episode_return - mean).powi(2)).sum::<f64>() / n;
        let rate = |s: Status| log.iter().filter(|e| e.status == s).count() as f64 / n;
        EvalResult {
            mean_reward: mean,
            reward_stddev: var.sqrt(),
            success_rate: rate(Status::Success),
            lava_rate: rate(Status::LavaDeath),
            timeout_rate: rate(Status::Timeout),
            episodes: log.len(),
            log,
        }
    }
}

/// Runs one episode under `policy`, calling `observe` before every action.
pub fn run_episode<P: Policy + ?Sized>(
    policy: &P,
    layout: &Layout,
    max_steps: usize,
    mut observe: impl FnMut(&EnvState, Action),
) -> Result<EpisodeSummary> {
    let mut state = EnvState::new(layout.clone(), max_steps)?;
    let mut total = 0.0;
    while state.is_running() {
        let action = policy.choose(&state)?;
        observe(&state, action);
        total += state.step(action)?.reward;
    }
    Ok(EpisodeSummary {
        layout_hash: layout_hash(layout),
        episode_return: total,
        steps: state.steps_taken(),
        status: state.status(),
    })
}

/// Greedy rollouts, `episodes_per_layout` per layout, in suite order.
pub fn evaluate<P: Policy + ?Sized>(
    policy: &P,
    suite: &[Layout],
    episodes_per_layout: usize,
    max_steps: usize,
) -> Result<EvalResult> {
    if suite.is_empty() {
        return Err(Error::Empty("evaluation suite".into()));
    }
    let jobs: Vec<&Layout> = suite.iter().flat_map(|l| std::iter::repeat(l).take(episodes_per_layout)).collect();
    let log = jobs
        .par_iter()
        .map(|l| run_episode(policy, l, max_steps, |_, _| {}))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalResult::from_episodes(log))
}
