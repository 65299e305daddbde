use std::sync::Arc;

use super::layout::{Cell, GridLayout};
use super::MarkovGame;

pub const GOAL_REWARD: f64 = 10.0;
pub const COLLISION_PENALTY: f64 = -0.1;
pub const DEFAULT_HORIZON: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl Action {
    pub const ALL: [Action; 5] = [Action::Up, Action::Down, Action::Left, Action::Right, Action::Stay];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
            Action::Stay => (0, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EnvState {
    pub positions: Vec<Cell>,
    pub reached: Vec<bool>,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointStep {
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
    /// Per agent: the move was rejected and the penalty applied.
    pub collided: Vec<bool>,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct GridworldEnv {
    layout: Arc<GridLayout>,
    horizon: usize,
    colours: Vec<char>,
}

impl GridworldEnv {
    pub fn new(layout: GridLayout) -> Self {
        Self::with_horizon(layout, DEFAULT_HORIZON)
    }

    pub fn with_horizon(layout: GridLayout, horizon: usize) -> Self {
        let colours = layout.door_colours();
        Self {
            layout: Arc::new(layout),
            horizon,
            colours,
        }
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    /// The seed is unused: spawns are fixed.
    pub fn reset(&self, _seed: u64) -> EnvState {
        let n = self.layout.num_agents();
        EnvState {
            positions: self.layout.spawns().to_vec(),
            reached: vec![false; n],
            step: 0,
        }
    }

    /// Bitmask over `door_colours()`: bit `i` set when an agent stands on a
    /// key of that colour.
    pub fn open_doors(&self, positions: &[Cell]) -> u32 {
        let mut mask = 0;
        for (cell, colour) in self.layout.keys() {
            if positions.contains(cell) {
                if let Some(i) = self.colours.iter().position(|c| c == colour) {
                    mask |= 1 << i;
                }
            }
        }
        mask
    }

    fn door_open(&self, mask: u32, colour: char) -> bool {
        self.colours
            .iter()
            .position(|c| *c == colour)
            .is_some_and(|i| mask & (1 << i) != 0)
    }

    /// Target of a single agent ignoring other agents; `None` when the move
    /// runs into a wall, the map edge or a closed door.
    fn static_target(&self, from: Cell, action: Action, open: u32) -> Option<Cell> {
        let (dr, dc) = action.delta();
        let (r, c) = (from.0 as isize + dr, from.1 as isize + dc);
        if !self.layout.in_bounds(r, c) {
            return None;
        }
        let to = (r as usize, c as usize);
        if self.layout.is_wall(to) {
            return None;
        }
        match self.layout.door_at(to) {
            Some(colour) if to != from && !self.door_open(open, colour) => None,
            _ => Some(to),
        }
    }

    pub fn step(&self, state: &EnvState, actions: &[Action]) -> (EnvState, JointStep) {
        let n = self.layout.num_agents();
        assert_eq!(actions.len(), n, "one action per agent");
        let pos = &state.positions;
        let open = self.open_doors(pos);

        let mut target = Vec::with_capacity(n);
        let mut rejected = vec![false; n];
        for i in 0..n {
            match self.static_target(pos[i], actions[i], open) {
                Some(t) => target.push(t),
                None => {
                    target.push(pos[i]);
                    rejected[i] = true;
                }
            }
        }

        // Reject conflicting moves until no conflicts remain; a rejected agent
        // becomes stationary, which may in turn block others.
        loop {
            let conflicted: Vec<usize> = (0..n)
                .filter(|&i| {
                    target[i] != pos[i]
                        && (0..n)
                            .any(|j| j != i && (target[j] == target[i] || (target[j] == pos[i] && pos[j] == target[i])))
                })
                .collect();
            if conflicted.is_empty() {
                break;
            }
            for i in conflicted {
                target[i] = pos[i];
                rejected[i] = true;
            }
        }

        let mut rewards = vec![0.0; n];
        let mut reached = state.reached.clone();
        for i in 0..n {
            if rejected[i] {
                rewards[i] += COLLISION_PENALTY;
            }
            if !reached[i] && self.layout.goal_of(i) == Some(target[i]) {
                reached[i] = true;
                rewards[i] += GOAL_REWARD;
            }
        }
        let step = state.step + 1;
        // agents without a goal never finish, so such maps always run to the
        // horizon
        let all_goals = (0..n).all(|i| self.layout.goal_of(i).is_some() && reached[i]);
        let done = all_goals || step >= self.horizon;
        (
            EnvState {
                positions: target,
                reached,
                step,
            },
            JointStep {
                actions: actions.to_vec(),
                rewards,
                collided: rejected,
                done,
            },
        )
    }

    /// Multi-line ASCII view of a state: agents as digits over the map.
    pub fn render(&self, state: &EnvState) -> String {
        let l = &self.layout;
        let open = self.open_doors(&state.positions);
        let mut out = String::new();
        for r in 0..l.height() {
            for c in 0..l.width() {
                let cell = (r, c);
                let ch = if let Some(a) = state.positions.iter().position(|p| *p == cell) {
                    char::from_digit(a as u32 + 1, 10).unwrap_or('?')
                } else if l.is_wall(cell) {
                    '#'
                } else if let Some(colour) = l.door_at(cell) {
                    if self.door_open(open, colour) {
                        '_'
                    } else {
                        colour.to_ascii_uppercase()
                    }
                } else if l.keys().iter().any(|(k, _)| *k == cell) {
                    'k'
                } else if l.goals().iter().any(|(g, _)| *g == cell) {
                    'g'
                } else {
                    '.'
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }
}

impl MarkovGame for GridworldEnv {
    type State = EnvState;

    fn num_agents(&self) -> usize {
        self.layout.num_agents()
    }

    fn num_actions(&self) -> usize {
        Action::ALL.len()
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn noop_action(&self) -> usize {
        Action::Stay.index()
    }

    fn reset(&self, seed: u64) -> EnvState {
        GridworldEnv::reset(self, seed)
    }

    fn step(&self, state: &EnvState, actions: &[usize]) -> (EnvState, Vec<f64>, bool) {
        let actions: Vec<Action> = actions
            .iter()
            .map(|&a| Action::from_index(a).expect("action index in range"))
            .collect();
        let (next, js) = GridworldEnv::step(self, state, &actions);
        (next, js.rewards, js.done)
    }

    /// Cell index per agent (8 bits each) followed by goal flags; door
    /// flags follow from the positions.
    fn state_key(&self, state: &EnvState) -> u64 {
        let mut key = 0u64;
        for p in &state.positions {
            key = (key << 8) | self.layout.index(*p) as u64;
        }
        for r in &state.reached {
            key = (key << 1) | u64::from(*r);
        }
        key
    }

    /// Own cell, open-door mask and own goal flag.
    fn observation_key(&self, state: &EnvState, agent: usize) -> u64 {
        let cell = self.layout.index(state.positions[agent]) as u64;
        let open = u64::from(self.open_doors(&state.positions));
        (cell << 33) | (open << 1) | u64::from(state.reached[agent])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::layout::GridLayout;
    use proptest::prelude::*;
    use Action::*;

    fn env(text: &str) -> GridworldEnv {
        GridworldEnv::new(GridLayout::parse(text).unwrap())
    }

    const OPEN: &str = "\
# # # # # #
# 1 . . G1 #
# . 2 . . #
# # # # # #
";

    #[test]
    fn reset_is_deterministic() {
        let e = env(OPEN);
        let a = e.reset(1);
        assert_eq!(a, e.reset(99));
        assert_eq!(a.step, 0);
        assert!(a.reached.iter().all(|r| !r));
        assert_eq!(a.positions, vec![(1, 1), (2, 2)]);
    }

    #[test]
    fn wall_bump_is_penalised() {
        let e = env(OPEN);
        let s = e.reset(0);
        let (s2, js) = e.step(&s, &[Up, Stay]);
        assert_eq!(s2.positions, s.positions);
        assert_eq!(js.rewards, vec![-0.1, 0.0]);
        assert_eq!(js.collided, vec![true, false]);
    }

    #[test]
    fn goal_pays_once() {
        let e = env(OPEN);
        let mut s = e.reset(0);
        let mut total = 0.0;
        for a in [Right, Right, Right] {
            let (n, js) = e.step(&s, &[a, Stay]);
            total += js.rewards[0];
            s = n;
        }
        assert_eq!(total, 10.0);
        // the only goal is reached
        assert!(s.reached[0]);
        let (n, js) = e.step(&s, &[Left, Stay]);
        let (_, js2) = e.step(&n, &[Right, Stay]);
        assert_eq!(js.rewards[0] + js2.rewards[0], 0.0);
    }

    #[test]
    fn episode_ends_at_goal_or_horizon() {
        let e = GridworldEnv::with_horizon(GridLayout::parse(OPEN).unwrap(), 3);
        let s = e.reset(0);
        let (s, js) = e.step(&s, &[Stay, Stay]);
        assert!(!js.done);
        let (s, _) = e.step(&s, &[Stay, Stay]);
        let (_, js) = e.step(&s, &[Stay, Stay]);
        assert!(js.done);

        // agent 2 has no goal here, so reaching G1 does not end the episode
        let e = env(OPEN);
        let mut s = e.reset(0);
        for a in [Right, Right, Right] {
            let (n, js) = e.step(&s, &[a, Stay]);
            s = n;
            assert!(!js.done);
        }
        assert!(s.reached[0]);

        let e = env("# # # # # #\n# 1 . . G1 #\n# G2 2 . . #\n# # # # # #\n");
        let mut s = e.reset(0);
        let mut done = Vec::new();
        for (a, b) in [(Right, Left), (Right, Stay), (Right, Stay)] {
            let (n, js) = e.step(&s, &[a, b]);
            s = n;
            done.push(js.done);
        }
        assert_eq!(done, vec![false, false, true]);
    }

    #[test]
    fn swap_is_rejected() {
        let e = env("# # # #\n# 1 2 #\n# G1 . #\n# # # #\n");
        let s = e.reset(0);
        let (s2, js) = e.step(&s, &[Right, Left]);
        assert_eq!(s2.positions, s.positions);
        assert_eq!(js.rewards, vec![-0.1, -0.1]);
    }

    #[test]
    fn same_target_is_rejected() {
        let e = env("# # # # #\n# 1 . 2 #\n# G1 . . #\n# # # # #\n");
        let s = e.reset(0);
        let (s2, js) = e.step(&s, &[Right, Left]);
        assert_eq!(s2.positions, s.positions);
        assert_eq!(js.rewards, vec![-0.1, -0.1]);
    }

    #[test]
    fn following_a_mover_is_allowed_and_blocking_cascades() {
        let e = env("# # # # # #\n# 1 2 . G1 #\n# # # # # #\n");
        let s = e.reset(0);
        let (s2, js) = e.step(&s, &[Right, Right]);
        assert_eq!(s2.positions, vec![(1, 2), (1, 3)]);
        assert_eq!(js.rewards, vec![0.0, 0.0]);
        // leader blocked by the wall, so the follower is blocked too
        let e = env("# # # #\n# 1 2 #\n# G1 . #\n# # # #\n");
        let s = e.reset(0);
        let (s2, js) = e.step(&s, &[Right, Right]);
        assert_eq!(s2.positions, s.positions);
        assert_eq!(js.rewards, vec![-0.1, -0.1]);
    }

    #[test]
    fn chain_moves_into_vacated_cells() {
        let e = env("# # # #\n# 1 2 #\n# G1 3 #\n# # # #\n");
        let s = e.reset(0);
        let (s2, js) = e.step(&s, &[Right, Down, Left]);
        assert_eq!(s2.positions, vec![(1, 2), (2, 2), (2, 1)]);
        assert_eq!(js.rewards, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn four_cycle_rotates() {
        let e = env("# # # #\n# 1 2 #\n# 4 3 #\n# G1 . #\n# # # #\n");
        let s = e.reset(0);
        let (s2, js) = e.step(&s, &[Right, Down, Left, Up]);
        assert_eq!(s2.positions, vec![(1, 2), (2, 2), (2, 1), (1, 1)]);
        assert!(js.collided.iter().all(|c| !c));
    }

    #[test]
    fn doors_follow_keys_at_step_start() {
        let text = "# # # # # #\n# 1 Da G1 . #\n# . Ka 2 . #\n# # # # # #\n";
        let e = env(text);
        let s = e.reset(0);
        // key unoccupied: door closed
        let (s1, js) = e.step(&s, &[Right, Left]);
        assert_eq!(s1.positions[0], (1, 1));
        assert_eq!(js.rewards[0], -0.1);
        assert_eq!(s1.positions[1], (2, 2));
        // key occupied at the start of this step: door open
        let (s2, js) = e.step(&s1, &[Right, Stay]);
        assert_eq!(s2.positions[0], (1, 2));
        assert_eq!(js.rewards[0], 0.0);
        // key released: the agent in the doorway may still leave
        let (s3, _) = e.step(&s2, &[Stay, Right]);
        assert_eq!(e.open_doors(&s3.positions), 0);
        let (s4, js) = e.step(&s3, &[Right, Stay]);
        assert_eq!(s4.positions[0], (1, 3));
        assert_eq!(js.rewards[0], 10.0);
    }

    #[test]
    fn state_keys_distinguish_flags() {
        let e = env(OPEN);
        let s = e.reset(0);
        let mut t = s.clone();
        t.reached[0] = true;
        assert_ne!(e.state_key(&s), e.state_key(&t));
        assert_ne!(e.observation_key(&s, 0), e.observation_key(&t, 0));
        assert_eq!(e.observation_key(&s, 1), e.observation_key(&t, 1));
    }

    const MICRO: &str = "# # # #\n# 1 2 #\n# 3 G1 #\n# # # #\n";

    fn check_no_overlap(e: &GridworldEnv, s: &EnvState) {
        for combo in 0..5usize.pow(e.num_agents() as u32) {
            let mut c = combo;
            let actions: Vec<Action> = (0..e.num_agents())
                .map(|_| {
                    let a = Action::ALL[c % 5];
                    c /= 5;
                    a
                })
                .collect();
            let (n, js) = e.step(s, &actions);
            // resolution does not depend on agent order
            let mut rs = s.clone();
            rs.positions.reverse();
            let mut ra = actions.clone();
            ra.reverse();
            let (mut rn, mut rjs) = e.step(&rs, &ra);
            rn.positions.reverse();
            rjs.collided.reverse();
            assert_eq!(rn.positions, n.positions);
            assert_eq!(rjs.collided, js.collided);
            for i in 0..n.positions.len() {
                for j in i + 1..n.positions.len() {
                    assert_ne!(n.positions[i], n.positions[j], "{actions:?} from {s:?}");
                }
                assert!(!e.layout().is_wall(n.positions[i]));
                let moved = n.positions[i] != s.positions[i];
                assert!(!(moved && js.collided[i]));
            }
        }
    }

    #[test]
    fn exhaustive_micro_grid_never_overlaps() {
        // every placement of two and three agents on a 2×2 floor, every joint
        // action
        let cells = [(1, 1), (1, 2), (2, 1), (2, 2)];
        let two = env("# # # #\n# 1 2 #\n# G1 . #\n# # # #\n");
        for &a in &cells {
            for &b in &cells {
                if a == b {
                    continue;
                }
                let s = EnvState {
                    positions: vec![a, b],
                    reached: vec![false; 2],
                    step: 0,
                };
                check_no_overlap(&two, &s);
            }
        }
        let three = env(MICRO);
        for &a in &cells {
            for &b in &cells {
                for &c in &cells {
                    if a == b || b == c || a == c {
                        continue;
                    }
                    let s = EnvState {
                        positions: vec![a, b, c],
                        reached: vec![false; 3],
                        step: 0,
                    };
                    check_no_overlap(&three, &s);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn random_rollouts_keep_invariants(
            scenario in prop::sample::select(vec!["door", "dead_end", "two_corridors", "two_rooms"]),
            actions in prop::collection::vec(0usize..5, 4 * 64),
        ) {
            let e = GridworldEnv::new(crate::gridworld::make_scenario(scenario).unwrap());
            let n = e.num_agents();
            let mut s = e.reset(0);
            let mut totals = vec![0.0; n];
            let mut replay = Vec::new();
            for chunk in actions.chunks(4) {
                let joint: Vec<Action> = chunk[..n].iter().map(|&a| Action::ALL[a]).collect();
                let open = e.open_doors(&s.positions);
                let (next, js) = e.step(&s, &joint);
                for i in 0..n {
                    totals[i] += js.rewards[i];
                    prop_assert!(!e.layout().is_wall(next.positions[i]));
                    if let Some(colour) = e.layout().door_at(next.positions[i]) {
                        // entering a door requires it open at the start of the step
                        if next.positions[i] != s.positions[i] {
                            prop_assert!(e.door_open(open, colour));
                        }
                    }
                    prop_assert!(!s.reached[i] || next.reached[i]);
                    for j in i + 1..n {
                        prop_assert_ne!(next.positions[i], next.positions[j]);
                    }
                    let r = js.rewards[i];
                    prop_assert!([10.0, 0.0, -0.1, 9.9].iter().any(|v| (r - v).abs() < 1e-12));
                }
                replay.push((s.clone(), joint));
                let done = js.done;
                s = next;
                if done {
                    break;
                }
            }
            for t in totals {
                prop_assert!(t <= 10.0 + 1e-12);
            }
            // determinism
            for (state, joint) in &replay {
                prop_assert_eq!(e.step(state, joint), e.step(state, joint));
            }
        }
    }
}
