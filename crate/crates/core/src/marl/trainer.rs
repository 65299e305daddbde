use std::io::{Read, Write};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::policy::{MultiHeadValueTable, PolicyTable};
use super::rollout::{advantages, collect, greedy_episode, update_values, Observation};
use super::surrogate::{entropy_gradient, surrogate_gradient};
use crate::descent::{filtered_min_norm, FilterThreshold};
use crate::error::{Error, Result};
use crate::format;
use crate::gridworld::MarkovGame;
use crate::min_norm::{min_norm_element, GradientSet, MARL_TOL};
use crate::vector::{dot, norm, norm_sq};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trainer {
    /// Each agent ascends its own reward only.
    Independent,
    /// Each agent follows the min-norm element of all per-reward gradients.
    Mgpo,
    /// As `Mgpo`, after dropping gradients with norm `≤ ε`.
    MgpoPp,
}

impl Trainer {
    pub const ALL: [Trainer; 3] = [Trainer::Independent, Trainer::Mgpo, Trainer::MgpoPp];

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "independent" => Ok(Trainer::Independent),
            "mgpo" => Ok(Trainer::Mgpo),
            "mgpo_pp" | "mgpo++" => Ok(Trainer::MgpoPp),
            other => Err(Error::UnknownAlgorithm(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Trainer::Independent => "independent",
            Trainer::Mgpo => "mgpo",
            Trainer::MgpoPp => "mgpo_pp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Environment steps (joint transitions) to train for.
    pub total_steps: u64,
    pub episodes_per_batch: usize,
    pub learning_rate: f64,
    pub value_learning_rate: f64,
    pub clip_eps: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub entropy_coef: f64,
    /// Gradient filter threshold for `mgpo_pp`.
    pub epsilon: f64,
    /// Surrogate passes per batch, all against the collection snapshot.
    pub epochs: usize,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub observation: Observation,
    /// Logits of every new policy row; zeros when absent.
    pub initial_logits: Option<Vec<f64>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_steps: 100_000,
            episodes_per_batch: 16,
            learning_rate: 20.0,
            value_learning_rate: 0.1,
            clip_eps: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            entropy_coef: 0.01,
            epsilon: 0.05,
            epochs: 1,
            eval_interval: 5_000,
            eval_episodes: 16,
            observation: Observation::Local,
            initial_logits: None,
        }
    }
}

impl TrainConfig {
    // negated comparisons so that NaN fails every check
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.total_steps == 0 {
            return bad("total_steps must be positive");
        }
        if self.episodes_per_batch == 0 || self.epochs == 0 || self.eval_episodes == 0 {
            return bad("episodes_per_batch, epochs and eval_episodes must be positive");
        }
        if self.eval_interval == 0 {
            return bad("eval_interval must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.value_learning_rate > 0.0 && self.value_learning_rate <= 1.0) {
            return bad("value_learning_rate must be in (0, 1]");
        }
        if !(self.clip_eps > 0.0) {
            return bad("clip_eps must be positive");
        }
        if !((0.0..=1.0).contains(&self.gamma) && (0.0..=1.0).contains(&self.gae_lambda)) {
            return bad("gamma and gae_lambda must be in [0, 1]");
        }
        if !(self.entropy_coef.is_finite() && self.entropy_coef >= 0.0) {
            return bad("entropy_coef must be non-negative");
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if let Some(z) = &self.initial_logits {
            if !z.iter().all(|v| v.is_finite()) {
                return bad("initial_logits must be finite");
            }
        }
        Ok(())
    }
}

/// Diagnostics of one agent's policy update.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateRecord {
    pub step: u64,
    pub agent: usize,
    /// Heads whose gradients entered the min-norm problem.
    pub active: Vec<usize>,
    /// Norm of each head's descent gradient; empty for `Independent`.
    pub gradient_norms: Vec<f64>,
    /// Norm of the applied descent direction, before the entropy term.
    pub d_norm: f64,
    /// `max_j (‖d‖² − ⟨g_j, d⟩)` over active heads; `≤ 0` up to solver
    /// tolerance at the min-norm point.
    pub vi_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub step: u64,
    /// Zero-based.
    pub agent: usize,
    pub mean_return: f64,
    pub std_return: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingTrace {
    pub evals: Vec<EvalRecord>,
    pub updates: Vec<UpdateRecord>,
    pub policies: Vec<PolicyTable>,
    pub steps: u64,
}

impl TrainingTrace {
    /// Mean greedy return per agent at the last evaluation.
    pub fn final_returns(&self) -> Vec<f64> {
        let last = self.evals.last().map(|e| e.step).unwrap_or(0);
        self.evals
            .iter()
            .filter(|e| e.step == last)
            .map(|e| e.mean_return)
            .collect()
    }

    /// `step,agent,mean_return,std_return`, agents one-based.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_eval_csv(&self.evals, w)
    }
}

pub fn write_eval_csv<W: Write>(evals: &[EvalRecord], mut w: W) -> Result<()> {
    writeln!(w, "step,agent,mean_return,std_return")?;
    for e in evals {
        writeln!(
            w,
            "{},{},{},{}",
            e.step,
            e.agent + 1,
            format::float(e.mean_return),
            format::float(e.std_return)
        )?;
    }
    Ok(())
}

/// Reads what [`write_eval_csv`] writes.
pub fn read_eval_csv<R: Read>(r: R) -> Result<Vec<EvalRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header = reader.headers()?.clone();
    if header.iter().ne(["step", "agent", "mean_return", "std_return"]) {
        return Err(Error::Trace {
            line: 1,
            message: "expected header `step,agent,mean_return,std_return`".into(),
        });
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Trace {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |message: String| Error::Trace { line, message };
        let step = rec[0]
            .trim()
            .parse::<u64>()
            .map_err(|e| err(format!("column `step`: {e}")))?;
        let agent = rec[1]
            .trim()
            .parse::<usize>()
            .map_err(|e| err(format!("column `agent`: {e}")))?;
        if agent == 0 {
            return Err(err("column `agent`: agents are numbered from 1".into()));
        }
        let mean_return = format::parse_float(&rec[2], "mean_return").map_err(err)?;
        let std_return = format::parse_float(&rec[3], "std_return").map_err(err)?;
        out.push(EvalRecord {
            step,
            agent: agent - 1,
            mean_return,
            std_return,
        });
    }
    Ok(out)
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn evaluate<G: MarkovGame>(
    env: &G,
    policies: &[PolicyTable],
    config: &TrainConfig,
    step: u64,
    seed: u64,
) -> Vec<EvalRecord> {
    let returns: Vec<Vec<f64>> = (0..config.eval_episodes)
        .map(|e| greedy_episode(env, policies, config.observation, seed.wrapping_add(e as u64)))
        .collect();
    (0..env.num_agents())
        .map(|agent| {
            let xs: Vec<f64> = returns.iter().map(|r| r[agent]).collect();
            let (mean_return, std_return) = mean_std(&xs);
            EvalRecord {
                step,
                agent,
                mean_return,
                std_return,
            }
        })
        .collect()
}

/// Direction, active heads, per-head gradient norms and the worst
/// min-norm inequality residual.
type Direction = (Vec<f64>, Vec<usize>, Vec<f64>, f64);

/// Descent direction for one agent and its diagnostics.
fn update_direction(
    trainer: Trainer,
    agent: usize,
    descent_grads: Vec<Vec<f64>>,
    epsilon: FilterThreshold,
) -> Result<Direction> {
    let dim = descent_grads.first().map_or(0, Vec::len);
    if trainer == Trainer::Independent {
        let g = descent_grads.into_iter().next().unwrap_or_default();
        return Ok((g, vec![agent], Vec::new(), 0.0));
    }
    let grads = GradientSet::new(descent_grads)?;
    let norms = grads.norms();
    let (active, sol) = match trainer {
        Trainer::Mgpo => {
            let n = grads.len();
            ((0..n).collect::<Vec<_>>(), Some(min_norm_element(&grads, MARL_TOL)?))
        }
        _ => {
            let (active, sol) = filtered_min_norm(&grads, epsilon, MARL_TOL)?;
            (active.indices().to_vec(), sol)
        }
    };
    let Some(sol) = sol else {
        return Ok((vec![0.0; dim], active, norms, 0.0));
    };
    let dd = norm_sq(&sol.direction);
    let vi = active
        .iter()
        .map(|&j| dd - dot(grads.get(j), &sol.direction))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((sol.direction, active, norms, vi))
}

/// Trains tabular policies on `env` for `config.total_steps` environment
/// steps. Greedy evaluations run at step 0, whenever another
/// `eval_interval` steps have passed, and at the end.
pub fn train<G: MarkovGame>(env: &G, trainer: Trainer, config: &TrainConfig, seed: u64) -> Result<TrainingTrace> {
    config.validate()?;
    let n = env.num_agents();
    let prior = config
        .initial_logits
        .clone()
        .unwrap_or_else(|| vec![0.0; env.num_actions()]);
    if prior.len() != env.num_actions() {
        return Err(Error::Config(format!(
            "initial_logits has {} entries, the environment has {} actions",
            prior.len(),
            env.num_actions()
        )));
    }
    let tie = env.noop_action();
    let mut policies: Vec<PolicyTable> = (0..n)
        .map(|_| PolicyTable::with_prior(prior.clone(), tie))
        .collect::<Result<_>>()?;
    let mut values = MultiHeadValueTable::new(n);
    let epsilon = FilterThreshold::new(config.epsilon)?;
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let eval_seed = master.next_u64();

    let mut evals = evaluate(env, &policies, config, 0, eval_seed);
    let mut updates = Vec::new();
    let mut steps = 0u64;
    let mut next_eval = config.eval_interval;

    while steps < config.total_steps {
        let batch = collect(
            env,
            &mut policies,
            config.observation,
            config.episodes_per_batch,
            master.next_u64(),
        )?;
        steps += batch.len() as u64;
        let adv = advantages(&batch, &values, config.gamma, config.gae_lambda);
        let snapshot = policies.clone();

        for _ in 0..config.epochs {
            for (i, policy) in policies.iter_mut().enumerate() {
                let heads: Vec<usize> = match trainer {
                    Trainer::Independent => vec![i],
                    _ => (0..n).collect(),
                };
                let descent_grads: Vec<Vec<f64>> = heads
                    .iter()
                    .map(|&j| {
                        let mut g =
                            surrogate_gradient(i, &adv.advantages[j], &batch, &snapshot[i], policy, config.clip_eps);
                        g.iter_mut().for_each(|v| *v = -*v);
                        g
                    })
                    .collect();
                let (d, active, gradient_norms, vi_residual) = update_direction(trainer, i, descent_grads, epsilon)?;
                let mut delta: Vec<f64> = d.iter().map(|v| -v).collect();
                if config.entropy_coef > 0.0 {
                    let h = entropy_gradient(i, &batch, policy);
                    for (x, e) in delta.iter_mut().zip(h) {
                        *x += config.entropy_coef * e;
                    }
                }
                policy.apply(config.learning_rate, &delta)?;
                updates.push(UpdateRecord {
                    step: steps,
                    agent: i,
                    active,
                    gradient_norms,
                    d_norm: norm(&d),
                    vi_residual,
                });
            }
        }
        update_values(&mut values, &batch, &adv, config.value_learning_rate);

        if steps >= next_eval {
            evals.extend(evaluate(env, &policies, config, steps, eval_seed));
            while next_eval <= steps {
                next_eval += config.eval_interval;
            }
        }
    }
    if evals.last().map(|e| e.step) != Some(steps) {
        evals.extend(evaluate(env, &policies, config, steps, eval_seed));
    }
    Ok(TrainingTrace {
        evals,
        updates,
        policies,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{MatrixGame, A, B};
    use crate::marl::policy::softmax;

    fn matrix_config() -> TrainConfig {
        TrainConfig {
            total_steps: 4_000,
            episodes_per_batch: 64,
            learning_rate: 1.0,
            epsilon: 0.01,
            entropy_coef: 0.0,
            eval_interval: 1_000,
            observation: Observation::Joint,
            initial_logits: Some(vec![0.0, 1.5]),
            ..TrainConfig::default()
        }
    }

    #[test]
    fn names_round_trip() {
        for t in Trainer::ALL {
            assert_eq!(Trainer::parse(t.name()).unwrap(), t);
        }
        assert!(matches!(Trainer::parse("iql"), Err(Error::UnknownAlgorithm(_))));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let c = TrainConfig {
            episodes_per_batch: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = TrainConfig {
            epsilon: -1.0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
        let mut c = matrix_config();
        c.initial_logits = Some(vec![0.0; 3]);
        assert!(matches!(
            train(&MatrixGame, Trainer::Mgpo, &c, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let c = matrix_config();
        let a = train(&MatrixGame, Trainer::MgpoPp, &c, 3).unwrap();
        let b = train(&MatrixGame, Trainer::MgpoPp, &c, 3).unwrap();
        assert_eq!(a.evals, b.evals);
        assert_eq!(a.policies, b.policies);
    }

    #[test]
    fn evaluations_cover_schedule() {
        let a = train(&MatrixGame, Trainer::Independent, &matrix_config(), 0).unwrap();
        let steps: Vec<u64> = a.evals.iter().filter(|e| e.agent == 0).map(|e| e.step).collect();
        assert_eq!(steps.first(), Some(&0));
        assert_eq!(steps.last(), Some(&a.steps));
        assert!(a.steps >= 4_000);
        assert_eq!(a.final_returns().len(), 2);
    }

    #[test]
    fn mgpo_pp_updates_satisfy_min_norm_inequality() {
        let a = train(&MatrixGame, Trainer::MgpoPp, &matrix_config(), 1).unwrap();
        for u in &a.updates {
            assert!(u.vi_residual <= 1e-8, "{u:?}");
            for &j in &u.active {
                assert!(u.gradient_norms[j] > 0.01);
            }
        }
    }

    #[test]
    fn mgpo_pp_moves_both_agents_to_a() {
        let a = train(&MatrixGame, Trainer::MgpoPp, &matrix_config(), 2).unwrap();
        for p in &a.policies {
            assert_eq!(p.greedy(0), A);
        }
        let b = train(&MatrixGame, Trainer::Independent, &matrix_config(), 2).unwrap();
        for p in &b.policies {
            assert_eq!(p.greedy(0), B);
            assert!(softmax(p.logits(0))[B] > 0.6);
        }
    }

    #[test]
    fn eval_csv_round_trip() {
        let a = train(&MatrixGame, Trainer::Mgpo, &matrix_config(), 0).unwrap();
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(read_eval_csv(buf.as_slice()).unwrap(), a.evals);
        let bad = "step,agent,mean_return,std_return\n0,1,1.0,0.0\n5,x,1.0,0.0\n";
        match read_eval_csv(bad.as_bytes()) {
            Err(Error::Trace { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn population_std() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 1.0));
    }

    mod properties {
        use super::*;
        use crate::gridworld::{make_scenario, GridworldEnv};
        use crate::marl::presets::scenario_config;
        use proptest::prelude::*;
        use std::sync::OnceLock;

        fn door() -> &'static GridworldEnv {
            static ENV: OnceLock<GridworldEnv> = OnceLock::new();
            ENV.get_or_init(|| GridworldEnv::new(make_scenario("door").unwrap()))
        }

        fn check(trace: &TrainingTrace, eps: f64) -> std::result::Result<(), TestCaseError> {
            for u in &trace.updates {
                prop_assert!(u.vi_residual <= 1e-8, "{u:?}");
                for &j in &u.active {
                    prop_assert!(u.gradient_norms[j] > eps);
                }
            }
            for p in &trace.policies {
                for row in p.params().chunks(p.num_actions()) {
                    let sum: f64 = softmax(row).iter().sum();
                    prop_assert!((sum - 1.0).abs() < 1e-9);
                }
            }
            Ok(())
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(256))]

            #[test]
            fn matrix_game_updates_respect_filter_and_inequality(seed in any::<u64>(), eps in 1e-3f64..0.2) {
                let c = TrainConfig { total_steps: 1_000, epsilon: eps, ..matrix_config() };
                check(&train(&MatrixGame, Trainer::MgpoPp, &c, seed).unwrap(), eps)?;
            }

            #[test]
            fn gridworld_updates_respect_filter_and_inequality(seed in any::<u64>()) {
                let c = TrainConfig { total_steps: 1_000, ..scenario_config("door").unwrap() };
                check(&train(door(), Trainer::MgpoPp, &c, seed).unwrap(), c.epsilon)?;
            }
        }
    }
}
