use super::policy::{softmax, PolicyTable};
use super::rollout::RolloutBatch;
use crate::gridworld::MatrixGame;

/// Gradient of the clipped surrogate
/// `mean_t min(ρ_t Â_t, clip(ρ_t, 1 − ε, 1 + ε) Â_t)`, `ρ_t = π(a_t|o_t) / π_old(a_t|o_t)`,
/// with respect to agent `agent`'s logits in `current`. Maximisation
/// convention. `advantages` is one head's per-transition estimate; the
/// result has `current.num_params()` entries.
pub fn surrogate_gradient(
    agent: usize,
    advantages: &[f64],
    batch: &RolloutBatch,
    old: &PolicyTable,
    current: &PolicyTable,
    clip_eps: f64,
) -> Vec<f64> {
    let k = current.num_actions();
    let mut grad = vec![0.0; current.num_params()];
    if batch.is_empty() {
        return grad;
    }
    let inv_len = 1.0 / batch.len() as f64;
    for (tr, &adv) in batch.transitions.iter().zip(advantages) {
        let key = tr.obs[agent];
        let a = tr.actions[agent];
        let row = current.row_index(key).expect("batch observations have policy rows");
        let pi = current.probs(key);
        let ratio = pi[a] / old.probs(key)[a];
        let clipped = (adv > 0.0 && ratio > 1.0 + clip_eps) || (adv < 0.0 && ratio < 1.0 - clip_eps);
        if clipped {
            continue;
        }
        // ∇ρ = ρ · ∇ log π(a|o) = ρ · (e_a − π)
        let scale = adv * ratio * inv_len;
        for (b, p) in pi.iter().enumerate() {
            let indicator = if b == a { 1.0 } else { 0.0 };
            grad[row * k + b] += scale * (indicator - p);
        }
    }
    grad
}

/// Gradient of the mean per-transition policy entropy for `agent`.
pub fn entropy_gradient(agent: usize, batch: &RolloutBatch, policy: &PolicyTable) -> Vec<f64> {
    let k = policy.num_actions();
    let mut grad = vec![0.0; policy.num_params()];
    if batch.is_empty() {
        return grad;
    }
    let inv_len = 1.0 / batch.len() as f64;
    for tr in &batch.transitions {
        let key = tr.obs[agent];
        let row = policy.row_index(key).expect("batch observations have policy rows");
        let p = policy.probs(key);
        let h: f64 = -p.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum::<f64>();
        for (b, pb) in p.iter().enumerate() {
            if *pb > 0.0 {
                grad[row * k + b] -= inv_len * pb * (pb.ln() + h);
            }
        }
    }
    grad
}

/// Exact `∇_{z_i} J_j` on the matrix game for logits `z` (one pair per
/// agent), where `J_j` is agent `j`'s expected reward. Written as
/// `∂J/∂z_k = π_k Σ_a π_a (Q_k − Q_a)` so that equal action values give an
/// exact zero.
pub fn matrix_game_gradient(logits: &[[f64; 2]; 2], i: usize, j: usize) -> [f64; 2] {
    let pi = [softmax(&logits[0]), softmax(&logits[1])];
    let other = 1 - i;
    // Q_k: agent j's expected reward when agent i plays k
    let q: Vec<f64> = (0..2)
        .map(|k| {
            (0..2)
                .map(|b| {
                    let (a1, a2) = if i == 0 { (k, b) } else { (b, k) };
                    pi[other][b] * MatrixGame::payoff(a1, a2)[j]
                })
                .sum()
        })
        .collect();
    let mut g = [0.0; 2];
    for k in 0..2 {
        g[k] = pi[i][k] * (0..2).map(|a| pi[i][a] * (q[k] - q[a])).sum::<f64>();
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroGradientReport {
    /// `‖∇_{z_i} J_i‖` per agent.
    pub own: [f64; 2],
    /// `‖∇_{z_i} J_{other}‖` per agent.
    pub cross: [f64; 2],
}

/// Own-reward and cross-reward gradient norms on the matrix game, computed
/// analytically.
pub fn zero_gradient_diagnostic(logits: &[[f64; 2]; 2]) -> ZeroGradientReport {
    let norm = |g: [f64; 2]| g[0].hypot(g[1]);
    ZeroGradientReport {
        own: [
            norm(matrix_game_gradient(logits, 0, 0)),
            norm(matrix_game_gradient(logits, 1, 1)),
        ],
        cross: [
            norm(matrix_game_gradient(logits, 0, 1)),
            norm(matrix_game_gradient(logits, 1, 0)),
        ],
    }
}
