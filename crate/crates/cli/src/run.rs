//! Experiment runners. Seeds run in parallel; every output file is written
//! after all seeds finish, so results do not depend on scheduling.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mgda_core::descent::{self, Algorithm, DescentConfig, DescentTrace, Problem, StepRule};
use mgda_core::gridworld::{make_scenario, GridworldEnv, MarkovGame, MatrixGame};
use mgda_core::marl::{mean_std, train, TrainingTrace};
use mgda_core::oracle::{write_verdicts_csv, GridOracle, GridSpec, VerdictRow};
use mgda_core::problems::SyntheticProblem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{MarlPlan, Plan, SyntheticPlan, VerifyPlan};
use crate::error::CliError;

/// Where a run wrote its results and a short human-readable digest.
#[derive(Debug, Clone)]
pub struct Report {
    pub path: PathBuf,
    pub lines: Vec<String>,
}

pub fn execute(plan: &Plan) -> Result<Report, CliError> {
    match plan {
        Plan::Synthetic(p) => run_synthetic(p),
        Plan::Marl(p) => run_marl(p),
        Plan::Verify(p) => verify(p),
    }
}

/// Runs `body` against a fresh staging directory next to `<out>/<name>` and
/// moves it into place on success. On failure nothing is left behind.
fn staged<T>(
    out: &Path,
    name: &str,
    body: impl FnOnce(&Path) -> Result<T, CliError>,
) -> Result<(PathBuf, T), CliError> {
    let created_out = !out.exists();
    fs::create_dir_all(out).map_err(CliError::file(out))?;
    let target = out.join(name);
    let staging = out.join(format!(".{name}.partial"));
    let result = (|| {
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(CliError::file(&staging))?;
        }
        fs::create_dir(&staging).map_err(CliError::file(&staging))?;
        let value = body(&staging)?;
        if target.exists() {
            fs::remove_dir_all(&target).map_err(CliError::file(&target))?;
        }
        fs::rename(&staging, &target).map_err(CliError::file(&target))?;
        Ok(value)
    })();
    match result {
        Ok(v) => Ok((target, v)),
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            if created_out {
                let _ = fs::remove_dir(out);
            }
            Err(e)
        }
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> Result<(), CliError>) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(CliError::file(dir))?;
    }
    let file = fs::File::create(path).map_err(CliError::file(path))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush().map_err(CliError::file(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(|e| CliError::File {
            path: path.to_path_buf(),
            source: e.into(),
        })?;
        writeln!(w).map_err(CliError::file(path))
    })
}

/// Uniform start in `[lo, hi]^dim` drawn from `seed`.
pub fn start_point(seed: u64, dim: usize, [lo, hi]: [f64; 2]) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect()
}

#[derive(Debug, Serialize)]
struct SyntheticRun {
    seed: u64,
    x0: Vec<f64>,
    final_x: Vec<f64>,
    iterations: usize,
    termination: &'static str,
    is_weak: bool,
    is_strong: bool,
    is_eps: bool,
    residual: f64,
}

#[derive(Debug, Serialize)]
struct SyntheticCounts {
    runs: usize,
    weak_not_strong: usize,
    strong: usize,
    strong_or_eps: usize,
}

#[derive(Debug, Serialize)]
struct SyntheticSummary {
    kind: &'static str,
    problem: String,
    algorithm: &'static str,
    step_rule: String,
    epsilon: Option<f64>,
    varepsilon: f64,
    counts: SyntheticCounts,
    runs: Vec<SyntheticRun>,
}

fn descent_config(p: &SyntheticPlan) -> DescentConfig {
    let c = match p.algorithm {
        Algorithm::Mgda => DescentConfig::mgda(p.step_rule),
        Algorithm::MgdaPp => DescentConfig::mgda_pp(p.epsilon, p.step_rule),
    };
    c.with_max_iters(p.max_iters)
}

fn oracle_for<P: Problem>(problem: P, range: [f64; 2], points: usize) -> Result<GridOracle<P>, CliError> {
    let grid = GridSpec::cube(problem.dim(), range[0], range[1], points)?;
    Ok(GridOracle::new(problem, grid)?)
}

pub fn run_synthetic(p: &SyntheticPlan) -> Result<Report, CliError> {
    let config = descent_config(p);
    let dim = p.problem.dim();
    let runs: Vec<(Vec<f64>, DescentTrace)> = p
        .seeds
        .par_iter()
        .map(|&seed| {
            let x0 = start_point(seed, dim, p.start_range);
            let trace = descent::run(&p.problem, &x0, &config)?;
            Ok((x0, trace))
        })
        .collect::<Result<_, CliError>>()?;
    let oracle = oracle_for(&p.problem, p.oracle_range, p.oracle_points)?;
    let verdicts = runs
        .par_iter()
        .map(|(_, t)| oracle.classify(t.final_point(), p.varepsilon))
        .collect::<mgda_core::Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut summary_runs = Vec::new();
    for ((seed, (x0, trace)), v) in p.seeds.iter().zip(&runs).zip(verdicts) {
        let last = trace.iterates.last().expect("trace is never empty");
        summary_runs.push(SyntheticRun {
            seed: *seed,
            x0: x0.clone(),
            final_x: last.x.clone(),
            iterations: trace.iterates.len() - 1,
            termination: trace.termination.name(),
            is_weak: v.is_weak,
            is_strong: v.is_strong,
            is_eps: v.is_eps,
            residual: v.stationarity_residual,
        });
        rows.push(VerdictRow {
            label: seed.to_string(),
            x: last.x.clone(),
            f: last.f.clone(),
            verdict: v,
        });
    }
    let counts = SyntheticCounts {
        runs: rows.len(),
        weak_not_strong: rows
            .iter()
            .filter(|r| r.verdict.is_weak && !r.verdict.is_strong)
            .count(),
        strong: rows.iter().filter(|r| r.verdict.is_strong).count(),
        strong_or_eps: rows.iter().filter(|r| r.verdict.is_strong || r.verdict.is_eps).count(),
    };
    let lines = vec![format!(
        "{} on {}: {} runs, {} weak-not-strong, {} strong, {} strong or ε̄-Pareto",
        p.algorithm.name(),
        p.problem_name,
        counts.runs,
        counts.weak_not_strong,
        counts.strong,
        counts.strong_or_eps
    )];
    let summary = SyntheticSummary {
        kind: "synthetic",
        problem: p.problem_name.clone(),
        algorithm: p.algorithm.name(),
        step_rule: match p.step_rule {
            StepRule::Theorem1 => "theorem1".into(),
            StepRule::Constant(t) => format!("constant:{t}"),
        },
        epsilon: (p.algorithm == Algorithm::MgdaPp).then(|| p.epsilon.value()),
        varepsilon: p.varepsilon,
        counts,
        runs: summary_runs,
    };

    let (path, ()) = staged(&p.out, &p.name, |dir| {
        for (seed, (_, trace)) in p.seeds.iter().zip(&runs) {
            let f = dir.join(seed.to_string()).join("trace.csv");
            write_file(&f, |w| Ok(trace.write_csv(w)?))?;
        }
        write_file(&dir.join("verdicts.csv"), |w| Ok(write_verdicts_csv(&rows, w)?))?;
        write_json(&dir.join("summary.json"), &summary)
    })?;
    Ok(Report { path, lines })
}

#[derive(Debug, Serialize)]
pub struct AgentSummary {
    /// One-based.
    pub agent: usize,
    pub mean: f64,
    pub std: f64,
    /// Final greedy return per seed, in seed order.
    pub finals: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct MarlSummary {
    kind: &'static str,
    scenario: String,
    algorithm: &'static str,
    seeds: Vec<u64>,
    total_steps: u64,
    epsilon: f64,
    agents: Vec<AgentSummary>,
    table: Vec<String>,
}

fn train_all<G: MarkovGame>(env: &G, p: &MarlPlan) -> Result<Vec<TrainingTrace>, CliError> {
    p.seeds
        .par_iter()
        .map(|&seed| Ok(train(env, p.trainer, &p.training, seed)?))
        .collect()
}

/// Cross-seed mean and population standard deviation of each agent's final
/// greedy return.
pub fn agent_summaries(finals: &[Vec<f64>]) -> Vec<AgentSummary> {
    let agents = finals.first().map_or(0, Vec::len);
    (0..agents)
        .map(|i| {
            let xs: Vec<f64> = finals.iter().map(|f| f[i]).collect();
            let (mean, std) = mean_std(&xs);
            AgentSummary {
                agent: i + 1,
                mean,
                std,
                finals: xs,
            }
        })
        .collect()
}

pub fn run_marl(p: &MarlPlan) -> Result<Report, CliError> {
    let traces = if p.scenario == "matrix_game" {
        train_all(&MatrixGame, p)?
    } else {
        train_all(&GridworldEnv::new(make_scenario(&p.scenario)?), p)?
    };
    let finals: Vec<Vec<f64>> = traces.iter().map(TrainingTrace::final_returns).collect();
    let agents = agent_summaries(&finals);
    let table: Vec<String> = agents
        .iter()
        .map(|a| format!("agent {}: {:.1}±{:.1}", a.agent, a.mean, a.std))
        .collect();
    let mut lines = vec![format!(
        "{} on {} ({} seeds)",
        p.trainer.name(),
        p.scenario,
        p.seeds.len()
    )];
    lines.extend(table.iter().cloned());
    let summary = MarlSummary {
        kind: "marl",
        scenario: p.scenario.clone(),
        algorithm: p.trainer.name(),
        seeds: p.seeds.clone(),
        total_steps: p.training.total_steps,
        epsilon: p.training.epsilon,
        agents,
        table,
    };
    let (path, ()) = staged(&p.out, &p.name, |dir| {
        for (seed, trace) in p.seeds.iter().zip(&traces) {
            let f = dir.join(seed.to_string()).join("trace.csv");
            write_file(&f, |w| Ok(trace.write_csv(w)?))?;
        }
        write_json(&dir.join("summary.json"), &summary)
    })?;
    Ok(Report { path, lines })
}

pub fn verify(p: &VerifyPlan) -> Result<Report, CliError> {
    let mut oracles: HashMap<usize, GridOracle<SyntheticProblem>> = HashMap::new();
    let mut rows = Vec::new();
    for path in &p.traces {
        let file = fs::File::open(path).map_err(CliError::file(path))?;
        let input = |source| CliError::Input {
            path: path.clone(),
            source,
        };
        let iterates = descent::read_trace_csv(std::io::BufReader::new(file)).map_err(input)?;
        let last = iterates.last().expect("reader rejects empty traces");
        let dim = last.x.len();
        let oracle = match oracles.entry(dim) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => {
                let mut problem = SyntheticProblem::by_name(&p.problem_name, dim)?;
                for c in &p.dummy_objectives {
                    problem = problem.with_dummy_objective(*c);
                }
                e.insert(oracle_for(problem, p.oracle_range, p.oracle_points)?)
            }
        };
        let expected = oracle.problem().num_objectives();
        if last.f.len() != expected {
            return Err(input(mgda_core::Error::Trace {
                line: 1,
                message: format!(
                    "{} objective columns, `{}` has {expected}",
                    last.f.len(),
                    p.problem_name
                ),
            }));
        }
        let verdict = oracle.classify(&last.x, p.varepsilon)?;
        rows.push(VerdictRow {
            label: path.display().to_string(),
            x: last.x.clone(),
            f: oracle.problem().eval(&last.x),
            verdict,
        });
    }
    let target = p.root.join("verify.csv");
    let partial = p.root.join(".verify.csv.partial");
    let written = write_file(&partial, |w| Ok(write_verdicts_csv(&rows, w)?))
        .and_then(|()| fs::rename(&partial, &target).map_err(CliError::file(&target)));
    if let Err(e) = written {
        let _ = fs::remove_file(&partial);
        return Err(e);
    }
    let strong = rows.iter().filter(|r| r.verdict.is_strong).count();
    Ok(Report {
        path: target,
        lines: vec![format!("{} endpoints, {strong} strong Pareto", rows.len())],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_are_reproducible_and_in_range() {
        let a = start_point(5, 3, [-2.0, 1.0]);
        assert_eq!(a, start_point(5, 3, [-2.0, 1.0]));
        assert_ne!(a, start_point(6, 3, [-2.0, 1.0]));
        assert!(a.iter().all(|v| (-2.0..=1.0).contains(v)));
    }

    #[test]
    fn summaries_use_population_std() {
        let s = agent_summaries(&[vec![10.0, 0.0], vec![8.0, 0.0]]);
        assert_eq!(s[0].agent, 1);
        assert_eq!(s[0].mean, 9.0);
        assert_eq!(s[0].std, 1.0);
        assert_eq!(s[1].finals, vec![0.0, 0.0]);
    }
}
