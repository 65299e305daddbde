//! Tabular multi-agent policy gradients with per-reward value heads and
//! min-norm coupling of the per-reward gradients.

mod policy;
mod presets;
mod rollout;
mod surrogate;
mod trainer;

pub use policy::{softmax, MultiHeadValueTable, PolicyTable, TIE_TOL};
pub use presets::{matrix_game_config, scenario_config, STAY_PRIOR};
pub use rollout::{
    advantages, collect, greedy_episode, update_values, Advantages, Observation, RolloutBatch, Transition,
};
pub use surrogate::{
    entropy_gradient, matrix_game_gradient, surrogate_gradient, zero_gradient_diagnostic, ZeroGradientReport,
};
pub use trainer::{
    mean_std, read_eval_csv, train, write_eval_csv, EvalRecord, TrainConfig, Trainer, TrainingTrace, UpdateRecord,
};
