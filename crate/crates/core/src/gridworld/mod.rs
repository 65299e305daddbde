//! Deterministic cooperative grid environments and a one-shot matrix game.

mod env;
mod layout;
mod matrix;

pub use env::{Action, EnvState, GridworldEnv, JointStep, COLLISION_PENALTY, DEFAULT_HORIZON, GOAL_REWARD};
pub use layout::{Cell, GridLayout, MAX_AGENTS, MAX_CELLS};
pub use matrix::{MatrixGame, A, B};

use crate::error::{Error, Result};

/// Episodic multi-agent environment with per-agent rewards.
pub trait MarkovGame: Sync {
    type State: Clone + Send;

    fn num_agents(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn horizon(&self) -> usize;
    fn reset(&self, seed: u64) -> Self::State;
    /// Returns the next state, one reward per agent and whether the episode
    /// ended.
    fn step(&self, state: &Self::State, actions: &[usize]) -> (Self::State, Vec<f64>, bool);
    /// Key of the full joint state.
    fn state_key(&self, state: &Self::State) -> u64;
    /// Key of what `agent` observes.
    fn observation_key(&self, state: &Self::State, agent: usize) -> u64;
    /// Action a greedy policy takes when tied; defaults to the first.
    fn noop_action(&self) -> usize {
        0
    }
}

pub const SCENARIOS: [&str; 4] = ["door", "dead_end", "two_corridors", "two_rooms"];

pub fn scenario_map(name: &str) -> Result<&'static str> {
    match name {
        "door" => Ok(include_str!("../../maps/door.map")),
        "dead_end" => Ok(include_str!("../../maps/dead_end.map")),
        "two_corridors" => Ok(include_str!("../../maps/two_corridors.map")),
        "two_rooms" => Ok(include_str!("../../maps/two_rooms.map")),
        other => Err(Error::UnknownScenario(other.to_string())),
    }
}

pub fn make_scenario(name: &str) -> Result<GridLayout> {
    GridLayout::parse(scenario_map(name)?)
}
