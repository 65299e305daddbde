#![no_main]

use libfuzzer_sys::fuzz_target;
use mgda_core::gridworld::{GridLayout, GridworldEnv, MarkovGame};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(layout) = GridLayout::parse(text) else { return };
    let env = GridworldEnv::new(layout);
    let state = env.reset(0);
    // one step of every agent staying put must keep the layout valid
    let stay = vec![env.noop_action(); env.num_agents()];
    let (next, rewards, _) = MarkovGame::step(&env, &state, &stay);
    assert_eq!(rewards.len(), env.num_agents());
    assert_eq!(next.positions.len(), env.num_agents());
});
