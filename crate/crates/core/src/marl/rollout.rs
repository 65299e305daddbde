use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::policy::{MultiHeadValueTable, PolicyTable};
use crate::error::{Error, Result};
use crate::gridworld::MarkovGame;

/// What a policy row is keyed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observation {
    /// The full joint state.
    Joint,
    /// The agent's own observation.
    Local,
}

impl Observation {
    pub fn key<G: MarkovGame>(self, env: &G, state: &G::State, agent: usize) -> u64 {
        match self {
            Observation::Joint => env.state_key(state),
            Observation::Local => env.observation_key(state, agent),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: u64,
    /// Policy key per agent.
    pub obs: Vec<u64>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub next_state: u64,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    pub transitions: Vec<Transition>,
    pub episodes: Vec<Range<usize>>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Undiscounted return per episode and agent.
    pub fn episode_returns(&self) -> Vec<Vec<f64>> {
        self.episodes
            .iter()
            .map(|range| {
                let n = self.transitions[range.start].rewards.len();
                let mut total = vec![0.0; n];
                for t in &self.transitions[range.clone()] {
                    for (acc, r) in total.iter_mut().zip(&t.rewards) {
                        *acc += r;
                    }
                }
                total
            })
            .collect()
    }
}

/// Samples `episodes` on-policy episodes; deterministic given `seed`. Rows
/// for every visited observation are created in `policies` so the batch can
/// be differentiated against them.
pub fn collect<G: MarkovGame>(
    env: &G,
    policies: &mut [PolicyTable],
    observation: Observation,
    episodes: usize,
    seed: u64,
) -> Result<RolloutBatch> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("episode count must be positive".into()));
    }
    if policies.len() != env.num_agents() {
        return Err(Error::DimensionMismatch {
            expected: env.num_agents(),
            found: policies.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transitions = Vec::new();
    let mut ranges = Vec::with_capacity(episodes);
    for ep in 0..episodes {
        let start = transitions.len();
        let mut state = env.reset(seed.wrapping_add(ep as u64));
        loop {
            let obs: Vec<u64> = (0..policies.len()).map(|i| observation.key(env, &state, i)).collect();
            let actions: Vec<usize> = policies
                .iter_mut()
                .zip(&obs)
                .map(|(p, &o)| {
                    p.ensure(o);
                    p.sample(o, &mut rng)
                })
                .collect();
            let (next, rewards, done) = env.step(&state, &actions);
            transitions.push(Transition {
                state: env.state_key(&state),
                obs,
                actions,
                rewards,
                next_state: env.state_key(&next),
                done,
            });
            state = next;
            if done {
                break;
            }
        }
        ranges.push(start..transitions.len());
    }
    Ok(RolloutBatch {
        transitions,
        episodes: ranges,
    })
}

/// Runs one episode with every agent acting greedily; returns per-agent
/// undiscounted returns.
pub fn greedy_episode<G: MarkovGame>(
    env: &G,
    policies: &[PolicyTable],
    observation: Observation,
    seed: u64,
) -> Vec<f64> {
    let mut state = env.reset(seed);
    let mut total = vec![0.0; env.num_agents()];
    loop {
        let actions: Vec<usize> = policies
            .iter()
            .enumerate()
            .map(|(i, p)| p.greedy(observation.key(env, &state, i)))
            .collect();
        let (next, rewards, done) = env.step(&state, &actions);
        for (acc, r) in total.iter_mut().zip(&rewards) {
            *acc += r;
        }
        state = next;
        if done {
            return total;
        }
    }
}

/// Per-head advantages and λ-return regression targets, indexed
/// `[head][transition]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Advantages {
    pub advantages: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

/// GAE(γ, λ) per head against that head's rewards; terminal transitions do
/// not bootstrap.
pub fn advantages(batch: &RolloutBatch, values: &MultiHeadValueTable, gamma: f64, lambda: f64) -> Advantages {
    let heads = values.heads();
    let len = batch.len();
    let mut adv = vec![vec![0.0; len]; heads];
    let mut targets = vec![vec![0.0; len]; heads];
    for range in &batch.episodes {
        for j in 0..heads {
            let mut running = 0.0;
            for t in range.clone().rev() {
                let tr = &batch.transitions[t];
                let v = values.get(tr.state)[j];
                let next_v = if tr.done { 0.0 } else { values.get(tr.next_state)[j] };
                let delta = tr.rewards[j] + gamma * next_v - v;
                let carry = if tr.done { 0.0 } else { gamma * lambda * running };
                running = delta + carry;
                adv[j][t] = running;
                targets[j][t] = running + v;
            }
        }
    }
    Advantages {
        advantages: adv,
        targets,
    }
}

/// Moves each visited state's values toward its targets:
/// `V ← V + lr · (target − V)`, transitions in batch order.
pub fn update_values(values: &mut MultiHeadValueTable, batch: &RolloutBatch, adv: &Advantages, lr: f64) {
    for (t, tr) in batch.transitions.iter().enumerate() {
        let row = values.get_mut(tr.state);
        for (j, v) in row.iter_mut().enumerate() {
            *v += lr * (adv.targets[j][t] - *v);
        }
    }
}
