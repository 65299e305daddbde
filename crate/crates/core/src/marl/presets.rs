//! Tuned training configurations for the bundled environments.

use super::rollout::Observation;
use super::trainer::TrainConfig;
use crate::error::{Error, Result};

/// Logit given to Stay in every new gridworld policy row.
pub const STAY_PRIOR: f64 = 0.25;

fn gridworld(learning_rate: f64, episodes_per_batch: usize, entropy_coef: f64, epsilon: f64) -> TrainConfig {
    TrainConfig {
        learning_rate,
        episodes_per_batch,
        entropy_coef,
        epsilon,
        gae_lambda: 1.0,
        observation: Observation::Local,
        initial_logits: Some(vec![0.0, 0.0, 0.0, 0.0, STAY_PRIOR]),
        ..TrainConfig::default()
    }
}

/// Training configuration for a gridworld scenario or `matrix_game`.
pub fn scenario_config(name: &str) -> Result<TrainConfig> {
    match name {
        "door" => Ok(gridworld(1.0, 1, 0.01, 0.05)),
        "dead_end" => Ok(gridworld(1.0, 16, 0.0, 0.1)),
        "two_corridors" => Ok(gridworld(2.0, 6, 0.0, 0.05)),
        "two_rooms" => Ok(gridworld(2.0, 3, 0.01, 0.05)),
        "matrix_game" => Ok(matrix_game_config()),
        other => Err(Error::UnknownScenario(other.to_string())),
    }
}

/// Both agents start preferring B, the non-optimal joint action.
pub fn matrix_game_config() -> TrainConfig {
    TrainConfig {
        total_steps: 50_000,
        episodes_per_batch: 64,
        learning_rate: 1.0,
        entropy_coef: 0.0,
        epsilon: 0.01,
        observation: Observation::Joint,
        initial_logits: Some(vec![0.0, 1.5]),
        ..TrainConfig::default()
    }
}
