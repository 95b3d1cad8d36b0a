//! Style-adherent policies trained with Double Deep Q-Learning.
//!
//! Training runs single-agent episodes of the game (no co-player, hence no
//! collisions). The training reward is the base game reward plus the
//! style's preference reward. The value network is a small rectified
//! feedforward map from the one-hot board encoding to one value per
//! `(block, color)` action.
//!
//! The bootstrap target follows the pseudocode used for these experiments:
//! `y = r + gamma * max_a' Q_target(s', a')`, i.e. the maximizing action is
//! taken from the target network itself.

mod checkpoint;
mod network;
mod replay;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use network::{parameter_distance, smooth_l1, soft_update, AdamW, Gradients, QNetwork};
pub use replay::{Experience, ReplayBuffer};

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::game::{self, Action, BlockGraph, GameError, GameState, GridConfig};
use crate::styles::{self, StyleError, StyleSpec};

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("invalid hyperparameters: {0}")]
    Hyperparams(String),
    #[error("network shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite loss {loss} at episode {episode}, step {step}")]
    NonFiniteLoss { episode: usize, step: usize, loss: f64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Style(#[from] StyleError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub gamma: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub episodes: usize,
    /// Default 10^6.
    pub replay_capacity: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Share of the episodes over which epsilon decays exponentially.
    pub epsilon_decay_fraction: f64,
    pub huber_beta: f64,
    pub hidden_sizes: Vec<usize>,
    /// Episodes are truncated after this many steps.
    pub max_steps_per_episode: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            gamma: 0.7,
            lr: 5e-4,
            weight_decay: 1e-5,
            tau: 5e-3,
            batch_size: 64,
            episodes: 10_000,
            replay_capacity: 1_000_000,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.5,
            huber_beta: 1.0,
            hidden_sizes: vec![128, 128],
            max_steps_per_episode: 100,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), LearnerError> {
        let fail = |m: &str| Err(LearnerError::Hyperparams(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return fail("gamma must lie in (0, 1)");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return fail("tau must lie in (0, 1]");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1");
        }
        if self.replay_capacity <= self.batch_size {
            return fail("replay_capacity must exceed batch_size");
        }
        if !(self.lr > 0.0) || self.weight_decay < 0.0 || !(self.huber_beta > 0.0) {
            return fail("lr and huber_beta must be positive, weight_decay non-negative");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return fail("epsilon bounds must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon_decay_fraction) {
            return fail("epsilon_decay_fraction must lie in [0, 1]");
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return fail("at least one non-empty hidden layer is required");
        }
        if self.max_steps_per_episode == 0 {
            return fail("max_steps_per_episode must be positive");
        }
        Ok(())
    }

    /// Exploration rate at `episode`: exponential decay from start to end
    /// over the first `epsilon_decay_fraction` of the episodes, then flat.
    pub fn epsilon(&self, episode: usize) -> f64 {
        let horizon = self.epsilon_decay_fraction * self.episodes as f64;
        if horizon <= 0.0 || episode as f64 >= horizon || self.epsilon_start <= 0.0 {
            return self.epsilon_end;
        }
        let frac = episode as f64 / horizon;
        self.epsilon_start * (self.epsilon_end / self.epsilon_start).powf(frac)
    }
}

/// Number of one-hot columns per block: the palette plus hidden and white.
pub fn status_width(num_colors: usize) -> usize {
    num_colors + 2
}

/// One-hot `|B| x (|CR| + 2)` encoding; columns are the palette colors,
/// then hidden, then white.
pub fn encode_state(state: &GameState) -> Array2<f64> {
    let width = status_width(state.num_colors());
    let mut out = Array2::zeros((state.num_blocks(), width));
    for (b, code) in state.observation().into_iter().enumerate() {
        out[[b, code as usize]] = 1.0;
    }
    out
}

fn encode_observations<'a>(obs: impl ExactSizeIterator<Item = &'a [u8]>, num_colors: usize) -> Array2<f64> {
    let width = status_width(num_colors);
    let rows = obs.len();
    let mut out: Option<Array2<f64>> = None;
    for (i, o) in obs.enumerate() {
        let m = out.get_or_insert_with(|| Array2::zeros((rows, o.len() * width)));
        for (b, &code) in o.iter().enumerate() {
            m[[i, b * width + code as usize]] = 1.0;
        }
    }
    out.unwrap_or_else(|| Array2::zeros((0, 0)))
}

/// `r` if terminal, else `r + gamma * max_target_q`.
pub fn td_target(reward: f64, max_target_q: f64, terminal: bool, gamma: f64) -> f64 {
    if terminal {
        reward
    } else {
        reward + gamma * max_target_q
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// One minibatch update of `policy`; returns the loss before the update.
pub fn train_step(
    policy: &mut QNetwork,
    optimizer: &mut AdamW,
    target: &QNetwork,
    batch: &[&Experience],
    num_colors: usize,
    hp: &Hyperparams,
) -> f64 {
    let x = encode_observations(batch.iter().map(|e| e.state.as_slice()), num_colors);
    let next = encode_observations(batch.iter().map(|e| e.next_state.as_slice()), num_colors);
    let next_q = target.forward(&next);
    let targets: Vec<f64> = batch
        .iter()
        .zip(next_q.rows())
        .map(|(e, row)| {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            td_target(e.reward, max, e.terminal, hp.gamma)
        })
        .collect();
    let actions: Vec<usize> = batch.iter().map(|e| e.action).collect();
    let (loss, grads) = policy.loss_and_grad(&x, &actions, &targets, hp.huber_beta);
    if loss.is_finite() {
        optimizer.step(policy, &grads);
    }
    loss
}

/// A trained greedy policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub network: QNetwork,
    pub style: StyleSpec,
    pub fingerprint: String,
    pub num_blocks: usize,
    pub num_colors: usize,
}

impl Policy {
    pub fn q_values(&self, state: &GameState) -> Vec<f64> {
        let x = encode_state(state);
        self.network.forward_one(x.as_slice().expect("standard layout"))
    }

    /// Greedy action over all `|B| * |CR|` outputs, unmasked.
    pub fn greedy_action(&self, state: &GameState) -> Action {
        Action::from_index(argmax(&self.q_values(state)), self.num_colors)
    }
}

/// Short hex digest of the training setup of `style`.
pub fn training_fingerprint(style: &StyleSpec, grid: &GridConfig, hp: &Hyperparams) -> String {
    let payload = serde_json::json!({ "style": style, "grid": grid, "hyperparams": hp });
    let digest = Sha256::digest(payload.to_string().as_bytes());
    hex::encode(&digest[..8])
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub episode: usize,
    /// Mean loss over the episode's updates; NaN when none happened.
    pub loss: f64,
    pub episode_return: f64,
    pub epsilon: f64,
    pub steps: usize,
}

impl LogRow {
    pub const CSV_HEADER: &'static str = "episode,loss,return,epsilon";

    pub fn to_csv(&self) -> String {
        format!("{},{},{},{}", self.episode, self.loss, self.episode_return, self.epsilon)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub policy: Policy,
    pub log: Vec<LogRow>,
}

/// Trains a policy for `style` on the board described by `grid`.
pub fn train_policy<R: Rng + ?Sized>(
    style: &StyleSpec,
    grid: &GridConfig,
    hp: &Hyperparams,
    rng: &mut R,
) -> Result<TrainOutput, LearnerError> {
    hp.validate()?;
    style.validate()?;
    let graph = grid.build_graph()?;
    let num_colors = grid.num_colors;
    let num_actions = graph.num_blocks() * num_colors;
    let mut widths = vec![graph.num_blocks() * status_width(num_colors)];
    widths.extend(&hp.hidden_sizes);
    widths.push(num_actions);

    let mut policy_net = QNetwork::new(&widths, rng)?;
    let mut target_net = policy_net.clone();
    let mut optimizer = AdamW::new(&policy_net, hp.lr, hp.weight_decay);
    let mut memory = ReplayBuffer::new(hp.replay_capacity);
    let mut log = Vec::with_capacity(hp.episodes);

    for episode in 0..hp.episodes {
        let epsilon = hp.epsilon(episode);
        let mut state = game::init_state(&graph, grid, rng);
        let mut loss_sum = 0.0;
        let mut updates = 0usize;
        let mut ret = 0.0;
        let mut steps = 0;
        while !game::is_terminal(&state) && steps < hp.max_steps_per_episode {
            let obs = state.observation();
            let action_index = if rng.gen::<f64>() < epsilon {
                rng.gen_range(0..num_actions)
            } else {
                let x = encode_state(&state);
                argmax(&policy_net.forward_one(x.as_slice().expect("standard layout")))
            };
            let action = Action::from_index(action_index, num_colors);
            let preference = styles::preference_reward(style, &state, action, &graph)?;
            let outcome = game::step(&state, &[action], &graph, rng)?;
            let reward = outcome.base_reward[0] + preference;
            ret += reward;
            let next = outcome.next_state;
            let terminal = game::is_terminal(&next);
            memory.push(Experience {
                state: obs,
                action: action_index,
                reward,
                next_state: next.observation(),
                terminal,
            });
            if let Some(batch) = memory.sample(hp.batch_size, rng) {
                let loss = train_step(&mut policy_net, &mut optimizer, &target_net, &batch, num_colors, hp);
                if !loss.is_finite() {
                    return Err(LearnerError::NonFiniteLoss { episode, step: steps, loss });
                }
                loss_sum += loss;
                updates += 1;
            }
            soft_update(&mut target_net, &policy_net, hp.tau)?;
            state = next;
            steps += 1;
        }
        log.push(LogRow {
            episode,
            loss: if updates == 0 { f64::NAN } else { loss_sum / updates as f64 },
            episode_return: ret,
            epsilon,
            steps,
        });
    }

    Ok(TrainOutput {
        policy: Policy {
            network: policy_net,
            style: style.clone(),
            fingerprint: training_fingerprint(style, grid, hp),
            num_blocks: graph.num_blocks(),
            num_colors,
        },
        log,
    })
}

/// Plays `games` single-agent greedy games and counts rule breaches:
/// `(sanctions, penalty events)`. Games stop at `max_steps`.
pub fn evaluate_solo<R: Rng + ?Sized>(
    policy: &Policy,
    graph: &BlockGraph,
    grid: &GridConfig,
    games: usize,
    max_steps: usize,
    rng: &mut R,
) -> Result<(usize, usize), LearnerError> {
    let mut sanctions = 0;
    let mut penalties = 0;
    for _ in 0..games {
        let mut state = game::init_state(graph, grid, rng);
        let mut steps = 0;
        while !game::is_terminal(&state) && steps < max_steps {
            let out = game::step(&state, &[policy.greedy_action(&state)], graph, rng)?;
            sanctions += out.events[0].sanctioned as usize;
            penalties += out.events[0].penalties as usize;
            state = out.next_state;
            steps += 1;
        }
    }
    Ok((sanctions, penalties))
}
