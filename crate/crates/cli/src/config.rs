//! JSON experiment configuration and its validation.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use mgda_core::descent::{epsilon_for, Algorithm, FilterThreshold, Problem, StepRule};
use mgda_core::gridworld::SCENARIOS;
use mgda_core::marl::{scenario_config, TrainConfig, Trainer};
use mgda_core::problems::SyntheticProblem;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Synthetic,
    Marl,
    Verify,
}

impl Kind {
    pub fn command(self) -> &'static str {
        match self {
            Kind::Synthetic => "run-synthetic",
            Kind::Marl => "run-marl",
            Kind::Verify => "verify",
        }
    }
}

/// `"theorem1"` or `{"constant": t}`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRuleSpec {
    #[default]
    Theorem1,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticOptions {
    pub dim: usize,
    /// Starts are drawn uniformly from `[lo, hi]^dim`.
    pub start_range: [f64; 2],
    pub max_iters: usize,
    /// ε̄ of the oracle's ε̄-Pareto test; also picks ε when none is given.
    pub varepsilon: f64,
    /// Constant objectives appended to the problem.
    pub dummy_objectives: Vec<f64>,
    /// Oracle grid box; defaults to `start_range`.
    pub oracle_range: Option<[f64; 2]>,
    pub oracle_points: usize,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        Self {
            dim: 2,
            start_range: [-10.0, 10.0],
            max_iters: mgda_core::descent::DEFAULT_MAX_ITERS,
            varepsilon: 1e-3,
            dummy_objectives: Vec::new(),
            oracle_range: None,
            oracle_points: mgda_core::oracle::DEFAULT_POINTS_PER_AXIS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    /// Output subdirectory; defaults to `<problem or scenario>_<algorithm>`.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub problem: Option<String>,
    #[serde(default)]
    pub scenario: Option<String>,
    #[serde(default)]
    pub algorithm: Option<String>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub step_rule: StepRuleSpec,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub synthetic: SyntheticOptions,
    /// Fields overriding the scenario's tuned training configuration.
    #[serde(default)]
    pub training: Map<String, Value>,
    /// Trace files to classify; defaults to `<out>/<name>/<seed>/trace.csv`.
    #[serde(default)]
    pub traces: Vec<PathBuf>,
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    pub algorithm: Option<String>,
    pub epsilon: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::File {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if !o.seeds.is_empty() {
            self.seeds = o.seeds.clone();
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(a) = &o.algorithm {
            self.algorithm = Some(a.clone());
        }
        if let Some(e) = o.epsilon {
            self.epsilon = Some(e);
        }
    }

    /// Checks names, seeds and numeric ranges and resolves defaults.
    pub fn plan(&self) -> Result<Plan, CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                return bad(format!("epsilon must be positive, got {e}"));
            }
        }
        let mut seen = HashSet::new();
        if let Some(dup) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return bad(format!("seed {dup} is listed twice"));
        }
        match self.kind {
            Kind::Synthetic | Kind::Verify => self.plan_synthetic(),
            Kind::Marl => self.plan_marl(),
        }
    }

    fn name_or(&self, default: String) -> Result<String, CliError> {
        let name = self.name.clone().unwrap_or(default);
        let ok =
            !name.is_empty() && name != "." && name != ".." && !name.starts_with('.') && !name.contains(['/', '\\']);
        if ok {
            Ok(name)
        } else {
            Err(CliError::Config(format!("`{name}` is not a valid experiment name")))
        }
    }

    fn plan_synthetic(&self) -> Result<Plan, CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let Some(problem_name) = &self.problem else {
            return bad("`problem` is required".into());
        };
        let opts = &self.synthetic;
        let mut problem = SyntheticProblem::by_name(problem_name, opts.dim)?;
        for c in &opts.dummy_objectives {
            if !c.is_finite() {
                return bad("dummy objectives must be finite".into());
            }
            problem = problem.with_dummy_objective(*c);
        }
        let algorithm = Algorithm::parse(self.algorithm.as_deref().unwrap_or("mgda_pp"))?;
        let [lo, hi] = opts.start_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return bad(format!("start_range must satisfy lo < hi, got [{lo}, {hi}]"));
        }
        let oracle_range = opts.oracle_range.unwrap_or(opts.start_range);
        if !(oracle_range[0].is_finite() && oracle_range[1].is_finite() && oracle_range[0] < oracle_range[1]) {
            return bad("oracle_range must satisfy lo < hi".into());
        }
        if !(opts.varepsilon > 0.0 && opts.varepsilon.is_finite()) {
            return bad("varepsilon must be positive".into());
        }
        let step_rule = match self.step_rule {
            StepRuleSpec::Theorem1 => StepRule::Theorem1,
            StepRuleSpec::Constant(t) if t > 0.0 && t.is_finite() => StepRule::Constant(t),
            StepRuleSpec::Constant(t) => return bad(format!("constant step must be positive, got {t}")),
        };
        let epsilon = match self.epsilon {
            Some(e) => FilterThreshold::new(e)?,
            None => epsilon_for(opts.varepsilon, problem.smoothness())?,
        };
        let name = self.name_or(format!("{problem_name}_{}", algorithm.name()))?;
        let root = self.out.join(&name);
        if self.kind == Kind::Verify {
            let traces = if self.traces.is_empty() {
                if self.seeds.is_empty() {
                    return bad("verify needs `traces` or a non-empty seed list".into());
                }
                self.seeds
                    .iter()
                    .map(|s| root.join(s.to_string()).join("trace.csv"))
                    .collect()
            } else {
                self.traces.clone()
            };
            return Ok(Plan::Verify(VerifyPlan {
                problem_name: problem_name.clone(),
                dummy_objectives: opts.dummy_objectives.clone(),
                varepsilon: opts.varepsilon,
                oracle_range,
                oracle_points: opts.oracle_points,
                traces,
                root,
            }));
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        Ok(Plan::Synthetic(SyntheticPlan {
            problem_name: problem_name.clone(),
            problem,
            algorithm,
            step_rule,
            epsilon,
            max_iters: opts.max_iters,
            start_range: opts.start_range,
            varepsilon: opts.varepsilon,
            oracle_range,
            oracle_points: opts.oracle_points,
            seeds: self.seeds.clone(),
            out: self.out.clone(),
            name,
        }))
    }

    fn plan_marl(&self) -> Result<Plan, CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let Some(scenario) = &self.scenario else {
            return bad("`scenario` is required".into());
        };
        if !SCENARIOS.contains(&scenario.as_str()) && scenario != "matrix_game" {
            return bad(format!("unknown scenario `{scenario}`"));
        }
        let trainer = Trainer::parse(self.algorithm.as_deref().unwrap_or("mgpo_pp"))?;
        let mut value =
            serde_json::to_value(scenario_config(scenario)?).map_err(|e| CliError::Config(e.to_string()))?;
        if let Value::Object(base) = &mut value {
            for (k, v) in &self.training {
                base.insert(k.clone(), v.clone());
            }
            if let Some(e) = self.epsilon {
                base.insert("epsilon".into(), Value::from(e));
            }
        }
        let training: TrainConfig =
            serde_json::from_value(value).map_err(|e| CliError::Config(format!("training: {e}")))?;
        training.validate()?;
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        let name = self.name_or(format!("{scenario}_{}", trainer.name()))?;
        Ok(Plan::Marl(MarlPlan {
            scenario: scenario.clone(),
            trainer,
            training,
            seeds: self.seeds.clone(),
            out: self.out.clone(),
            name,
        }))
    }
}

#[derive(Debug, Clone)]
pub enum Plan {
    Synthetic(SyntheticPlan),
    Marl(MarlPlan),
    Verify(VerifyPlan),
}

#[derive(Debug, Clone)]
pub struct SyntheticPlan {
    pub problem_name: String,
    pub problem: SyntheticProblem,
    pub algorithm: Algorithm,
    pub step_rule: StepRule,
    pub epsilon: FilterThreshold,
    pub max_iters: usize,
    pub start_range: [f64; 2],
    pub varepsilon: f64,
    pub oracle_range: [f64; 2],
    pub oracle_points: usize,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub name: String,
}

#[derive(Debug, Clone)]
pub struct MarlPlan {
    pub scenario: String,
    pub trainer: Trainer,
    pub training: TrainConfig,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub name: String,
}

#[derive(Debug, Clone)]
pub struct VerifyPlan {
    pub problem_name: String,
    pub dummy_objectives: Vec<f64>,
    pub varepsilon: f64,
    pub oracle_range: [f64; 2],
    pub oracle_points: usize,
    pub traces: Vec<PathBuf>,
    /// Directory receiving `verify.csv`.
    pub root: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Plan, CliError> {
        ExperimentConfig::from_json(text)?.plan()
    }

    #[test]
    fn marl_defaults_follow_the_scenario() {
        let Plan::Marl(p) = parse(r#"{"kind":"marl","scenario":"dead_end","seeds":[0]}"#).unwrap() else {
            panic!()
        };
        assert_eq!(p.training.epsilon, 0.1);
        assert_eq!(p.trainer, Trainer::MgpoPp);
        assert_eq!(p.name, "dead_end_mgpo_pp");
        let Plan::Marl(p) =
            parse(r#"{"kind":"marl","scenario":"door","seeds":[0],"epsilon":0.2,"training":{"total_steps":10}}"#)
                .unwrap()
        else {
            panic!()
        };
        assert_eq!(p.training.epsilon, 0.2);
        assert_eq!(p.training.total_steps, 10);
        assert_eq!(p.training.learning_rate, scenario_config("door").unwrap().learning_rate);
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            r#"{"kind":"marl","scenario":"door","seeds":[]}"#,
            r#"{"kind":"marl","scenario":"maze","seeds":[0]}"#,
            r#"{"kind":"marl","scenario":"door","seeds":[1,1]}"#,
            r#"{"kind":"marl","scenario":"door","seeds":[0],"epsilon":0}"#,
            r#"{"kind":"marl","scenario":"door","seeds":[0],"training":{"speed":1}}"#,
            r#"{"kind":"marl","scenario":"door","seeds":[0],"colour":1}"#,
            r#"{"kind":"synthetic","problem":"rosenbrock","seeds":[0]}"#,
            r#"{"kind":"synthetic","problem":"quadratic_pair","seeds":[0],"algorithm":"adam"}"#,
            r#"{"kind":"synthetic","problem":"quadratic_pair","seeds":[0],"step_rule":{"constant":-1}}"#,
            r#"{"kind":"synthetic","problem":"quadratic_pair","seeds":[0],"name":"../x"}"#,
            r#"{"kind":"verify","problem":"quadratic_pair"}"#,
            r#"{"kind":"tune"}"#,
        ];
        for c in cases {
            let e = parse(c).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{c}: {e}");
        }
    }

    #[test]
    fn overrides_win() {
        let mut c =
            ExperimentConfig::from_json(r#"{"kind":"synthetic","problem":"clamped_norm","seeds":[1,2]}"#).unwrap();
        c.apply(&Overrides {
            seeds: vec![7],
            out: Some("elsewhere".into()),
            algorithm: Some("mgda".into()),
            epsilon: Some(0.5),
        });
        let Plan::Synthetic(p) = c.plan().unwrap() else {
            panic!()
        };
        assert_eq!(p.seeds, vec![7]);
        assert_eq!(p.algorithm, Algorithm::Mgda);
        assert_eq!(p.epsilon.value(), 0.5);
        assert_eq!(p.out, PathBuf::from("elsewhere"));
        assert_eq!(p.name, "clamped_norm_mgda");
    }

    #[test]
    fn synthetic_epsilon_defaults_from_varepsilon() {
        let Plan::Synthetic(p) = parse(r#"{"kind":"synthetic","problem":"quadratic_pair","seeds":[0]}"#).unwrap()
        else {
            panic!()
        };
        // sqrt(2 · L · ε̄) with L = 2, ε̄ = 1e-3
        assert!((p.epsilon.value() - 0.004_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn verify_derives_trace_paths_from_seeds() {
        let Plan::Verify(p) = parse(r#"{"kind":"verify","problem":"quadratic_pair","seeds":[3,4],"out":"o"}"#).unwrap()
        else {
            panic!()
        };
        assert_eq!(
            p.traces,
            vec![
                PathBuf::from("o/quadratic_pair_mgda_pp/3/trace.csv"),
                PathBuf::from("o/quadratic_pair_mgda_pp/4/trace.csv")
            ]
        );
    }
}
