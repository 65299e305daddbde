use super::MarkovGame;

/// Action `A`; `B` is 1.
pub const A: usize = 0;
pub const B: usize = 1;

/// Two-agent, two-action one-shot game in which each agent's action only
/// affects the other agent's reward:
///
/// |       | A      | B      |
/// |-------|--------|--------|
/// | **A** | (1, 2) | (0, 2) |
/// | **B** | (1, 0) | (0, 0) |
///
/// Rows are agent 1's action, columns agent 2's. Every profile is a Nash
/// equilibrium; `(A, A)` is the only Pareto optimum.
#[derive(Debug, Clone, Copy, Default)]
pub struct MatrixGame;

impl MatrixGame {
    pub fn payoff(a1: usize, a2: usize) -> [f64; 2] {
        let r1 = if a2 == A { 1.0 } else { 0.0 };
        let r2 = if a1 == A { 2.0 } else { 0.0 };
        [r1, r2]
    }

    /// Expected rewards when agent `i` plays `A` with probability `p[i]`.
    pub fn expected_rewards(p: [f64; 2]) -> [f64; 2] {
        [p[1], 2.0 * p[0]]
    }
}

impl MarkovGame for MatrixGame {
    type State = ();

    fn num_agents(&self) -> usize {
        2
    }

    fn num_actions(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        1
    }

    fn reset(&self, _seed: u64) {}

    fn step(&self, _state: &(), actions: &[usize]) -> ((), Vec<f64>, bool) {
        ((), Self::payoff(actions[0], actions[1]).to_vec(), true)
    }

    fn state_key(&self, _state: &()) -> u64 {
        0
    }

    fn observation_key(&self, _state: &(), _agent: usize) -> u64 {
        0
    }
}
