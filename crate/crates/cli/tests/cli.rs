use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mgda_core::marl::{mean_std, read_eval_csv};
use serde_json::Value;
use tempfile::TempDir;

fn mgda(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mgda")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        cmd,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    mgda(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn summary(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

const SHORT_DOOR: &str =
    r#"{"kind":"marl","scenario":"door","seeds":[0,1,2],"training":{"total_steps":3000,"eval_interval":1000}}"#;

#[test]
fn unknown_problem_exits_2_with_usage() {
    let t = TempDir::new().unwrap();
    let c = write_config(
        t.path(),
        "c.json",
        r#"{"kind":"synthetic","problem":"rosenbrock","seeds":[0]}"#,
    );
    let o = run("run-synthetic", &c, &t.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown problem `rosenbrock`"));
    assert!(stderr(&o).contains("usage:"));
    assert!(!t.path().join("out").exists());
}

#[test]
fn zero_seeds_exits_2() {
    let t = TempDir::new().unwrap();
    let c = write_config(t.path(), "c.json", r#"{"kind":"marl","scenario":"door","seeds":[]}"#);
    let o = run("run-marl", &c, &t.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(!t.path().join("out").exists());
}

#[test]
fn config_kind_must_match_the_command() {
    let t = TempDir::new().unwrap();
    let c = write_config(t.path(), "c.json", SHORT_DOOR);
    let o = run("run-synthetic", &c, &t.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("run-marl"));
}

#[test]
fn missing_config_file_exits_1() {
    let t = TempDir::new().unwrap();
    let o = run("run-marl", &t.path().join("nope.json"), &t.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn marl_layout_and_recomputable_summary() {
    let t = TempDir::new().unwrap();
    let c = write_config(t.path(), "c.json", SHORT_DOOR);
    let out = t.path().join("out");
    let o = run("run-marl", &c, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let root = out.join("door_mgpo_pp");
    let s = summary(&root.join("summary.json"));
    assert_eq!(s["epsilon"], 0.05);
    let agents = s["agents"].as_array().unwrap();
    assert_eq!(agents.len(), 2);
    let mut finals = vec![Vec::new(); 2];
    for seed in 0..3 {
        let evals = read_eval_csv(fs::File::open(root.join(seed.to_string()).join("trace.csv")).unwrap()).unwrap();
        let last = evals.last().unwrap().step;
        assert_eq!(last, evals.iter().map(|e| e.step).max().unwrap());
        for e in evals.iter().filter(|e| e.step == last) {
            finals[e.agent].push(e.mean_return);
        }
    }
    for (a, f) in agents.iter().zip(&finals) {
        let (mean, std) = mean_std(f);
        assert!((a["mean"].as_f64().unwrap() - mean).abs() < 1e-9);
        assert!((a["std"].as_f64().unwrap() - std).abs() < 1e-9);
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let t = TempDir::new().unwrap();
    let marl = write_config(t.path(), "m.json", SHORT_DOOR);
    let syn = write_config(
        t.path(),
        "s.json",
        r#"{"kind":"synthetic","problem":"quadratic_pair","seeds":[0,1,2,3],"synthetic":{"start_range":[-3,3],"oracle_points":101}}"#,
    );
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    for out in [&a, &b] {
        assert!(run("run-marl", &marl, out, &[]).status.success());
        assert!(run("run-synthetic", &syn, out, &[]).status.success());
    }
    let ta = tree(&a);
    assert!(ta.len() >= 4 + 3 + 3);
    assert_eq!(ta, tree(&b));
}

#[test]
fn flags_override_the_file() {
    let t = TempDir::new().unwrap();
    let c = write_config(
        t.path(),
        "c.json",
        r#"{"kind":"marl","scenario":"dead_end","seeds":[0,1],"training":{"total_steps":500}}"#,
    );
    let out = t.path().join("out");
    let o = run(
        "run-marl",
        &c,
        &out,
        &["--seed", "4", "--seed", "9", "--algo", "mgpo", "--epsilon", "0.3"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let root = out.join("dead_end_mgpo");
    assert!(root.join("4/trace.csv").exists() && root.join("9/trace.csv").exists());
    assert!(!root.join("0").exists());
    let s = summary(&root.join("summary.json"));
    assert_eq!(s["epsilon"], 0.3);
    assert_eq!(s["seeds"], serde_json::json!([4, 9]));
}

#[test]
fn dead_end_defaults_to_epsilon_one_tenth() {
    let t = TempDir::new().unwrap();
    let c = write_config(
        t.path(),
        "c.json",
        r#"{"kind":"marl","scenario":"dead_end","seeds":[0],"training":{"total_steps":200}}"#,
    );
    let out = t.path().join("out");
    assert!(run("run-marl", &c, &out, &[]).status.success());
    assert_eq!(summary(&out.join("dead_end_mgpo_pp/summary.json"))["epsilon"], 0.1);
}

#[test]
fn clamped_landscape_separates_mgda_from_mgda_pp() {
    let t = TempDir::new().unwrap();
    let seeds: Vec<String> = (0..20).map(|s| s.to_string()).collect();
    let json = format!(
        r#"{{"kind":"synthetic","problem":"clamped_norm","seeds":[{}],"synthetic":{{"start_range":[-10,10]}}}}"#,
        seeds.join(",")
    );
    let c = write_config(t.path(), "c.json", &json);
    let out = t.path().join("out");
    assert!(run("run-synthetic", &c, &out, &["--algo", "mgda"]).status.success());
    assert!(run("run-synthetic", &c, &out, &["--algo", "mgda_pp"]).status.success());
    let mgda = summary(&out.join("clamped_norm_mgda/summary.json"));
    let pp = summary(&out.join("clamped_norm_mgda_pp/summary.json"));
    assert!(mgda["counts"]["weak_not_strong"].as_u64().unwrap() >= 1);
    assert_eq!(pp["counts"]["strong_or_eps"], 20);
    let verdicts = fs::read_to_string(out.join("clamped_norm_mgda/verdicts.csv")).unwrap();
    assert_eq!(verdicts.lines().count(), 21);
}

fn trace_at(dir: &Path, name: &str, x: [f64; 2]) -> PathBuf {
    let f1: f64 = x.iter().map(|v| (v - 1.0) * (v - 1.0)).sum();
    let f2: f64 = x.iter().map(|v| (v + 1.0) * (v + 1.0)).sum();
    let text = format!(
        "iter,x1,x2,f1,f2,active,t,d_norm\n0,{},{},{f1},{f2},3,0,0\n",
        x[0], x[1]
    );
    write_config(dir, name, &text)
}

#[test]
fn verify_classifies_endpoints() {
    let t = TempDir::new().unwrap();
    let on = trace_at(t.path(), "on.csv", [0.5, 0.5]);
    let off = trace_at(t.path(), "off.csv", [3.0, 3.0]);
    let json = format!(
        r#"{{"kind":"verify","problem":"quadratic_pair","name":"check","traces":[{:?},{:?}],"synthetic":{{"oracle_range":[-4,4]}}}}"#,
        on, off
    );
    let c = write_config(t.path(), "c.json", &json);
    let out = t.path().join("out");
    let o = run("verify", &c, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("check/verify.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    // label,x1,x2,f1,f2,is_weak,is_strong,is_eps,residual,witness
    assert_eq!(rows[0][6], "true");
    assert_eq!(rows[0][9], "");
    assert_eq!(rows[1][6], "false");
    assert!(!rows[1][9].is_empty());
}

#[test]
fn verify_reports_missing_and_malformed_traces() {
    let t = TempDir::new().unwrap();
    let out = t.path().join("out");
    let missing = write_config(
        t.path(),
        "m.json",
        &format!(
            r#"{{"kind":"verify","problem":"quadratic_pair","traces":[{:?}]}}"#,
            t.path().join("gone.csv")
        ),
    );
    let o = run("verify", &missing, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("gone.csv"));

    let bad = write_config(
        t.path(),
        "bad.csv",
        "iter,x1,x2,f1,f2,active,t,d_norm\n0,1,1,0,8,3,0,0\n1,oops,1,0,8,3,0,0\n",
    );
    let cfg = write_config(
        t.path(),
        "b.json",
        &format!(r#"{{"kind":"verify","problem":"quadratic_pair","traces":[{bad:?}]}}"#),
    );
    let o = run("verify", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert!(!out.join("quadratic_pair_mgda_pp/verify.csv").exists());
}

#[test]
fn failed_runs_leave_no_partial_output() {
    let t = TempDir::new().unwrap();
    let out = t.path().join("out");
    fs::create_dir(&out).unwrap();
    // a plain file where the experiment directory should go
    fs::write(out.join("door_mgpo_pp"), "keep").unwrap();
    let c = write_config(t.path(), "c.json", SHORT_DOOR);
    let o = run("run-marl", &c, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    let names: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec![std::ffi::OsString::from("door_mgpo_pp")]);
    assert_eq!(fs::read_to_string(out.join("door_mgpo_pp")).unwrap(), "keep");
}

#[test]
fn rerun_replaces_previous_results() {
    let t = TempDir::new().unwrap();
    let c = write_config(t.path(), "c.json", SHORT_DOOR);
    let out = t.path().join("out");
    assert!(run("run-marl", &c, &out, &[]).status.success());
    assert!(run("run-marl", &c, &out, &["--seed", "5"]).status.success());
    let root = out.join("door_mgpo_pp");
    assert!(root.join("5").exists());
    assert!(!root.join("0").exists());
}
