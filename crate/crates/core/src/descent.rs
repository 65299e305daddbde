//! MGDA and MGDA++ iteration loops.
//!
//! MGDA steps along `-d`, the negated minimum-norm element of all objective
//! gradients, and stalls as soon as `d = 0` (any Pareto stationary point,
//! possibly only weakly optimal). MGDA++ first drops every gradient whose norm
//! is at most `ε` and solves the min-norm problem on the rest, so objectives
//! that have already converged stop pinning the direction to zero.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::format;
use crate::min_norm::{min_norm_element, GradientSet, MinNormSolution, DEFAULT_TOL};
use crate::vector::{all_finite, axpy, dot, norm, norm_sq};

/// Threshold below which `‖d‖` counts as zero.
pub const STALL_TOL: f64 = 1e-9;
/// Default iteration cap for synthetic runs.
pub const DEFAULT_MAX_ITERS: usize = 10_000;

/// A vector objective `F: R^m → R^n` with analytic gradients, each
/// `L`-Lipschitz.
pub trait Problem: Send + Sync {
    fn num_objectives(&self) -> usize;
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Vec<f64>;
    fn gradients(&self, x: &[f64]) -> Vec<Vec<f64>>;
    fn smoothness(&self) -> f64;
}

impl<P: Problem + ?Sized> Problem for &P {
    fn num_objectives(&self) -> usize {
        (**self).num_objectives()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        (**self).eval(x)
    }
    fn gradients(&self, x: &[f64]) -> Vec<Vec<f64>> {
        (**self).gradients(x)
    }
    fn smoothness(&self) -> f64 {
        (**self).smoothness()
    }
}

/// Gradient-norm threshold `ε > 0` of the MGDA++ filter.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FilterThreshold(f64);

impl FilterThreshold {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon > 0.0 && epsilon.is_finite() {
            Ok(Self(epsilon))
        } else {
            Err(Error::InvalidArgument(format!(
                "filter threshold must be positive, got {epsilon}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `ε = sqrt(2 L ε̄)`: every point whose gradient norms are all below this is
/// `ε̄`-Pareto optimal for convex `L`-smooth objectives.
pub fn epsilon_for(varepsilon: f64, smoothness: f64) -> Result<FilterThreshold> {
    if !(varepsilon > 0.0 && smoothness > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need ε̄ > 0 and L > 0, got ε̄={varepsilon}, L={smoothness}"
        )));
    }
    FilterThreshold::new((2.0 * smoothness * varepsilon).sqrt())
}

/// Indices of the objectives kept by the filter, out of `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet {
    indices: Vec<usize>,
    n: usize,
}

impl ActiveSet {
    pub fn all(n: usize) -> Self {
        Self {
            indices: (0..n).collect(),
            n,
        }
    }

    pub fn from_indices(mut indices: Vec<usize>, n: usize) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self { indices, n }
    }

    /// Bit `i` set ⇔ objective `i` (0-based) is active. Requires `n ≤ 64`.
    pub fn mask(&self) -> u64 {
        self.indices.iter().fold(0, |m, &i| m | (1u64 << i))
    }

    pub fn from_mask(mask: u64, n: usize) -> Self {
        Self {
            indices: (0..n.min(64)).filter(|i| mask & (1 << i) != 0).collect(),
            n,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn complement(&self) -> Vec<usize> {
        (0..self.n).filter(|i| !self.indices.contains(i)).collect()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.contains(&i)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn total(&self) -> usize {
        self.n
    }
}

/// Objectives whose gradient norm is strictly greater than `eps`.
pub fn filter_active(grads: &GradientSet, eps: FilterThreshold) -> ActiveSet {
    let indices = grads
        .iter()
        .enumerate()
        .filter(|(_, g)| norm(g) > eps.value())
        .map(|(i, _)| i)
        .collect();
    ActiveSet {
        indices,
        n: grads.len(),
    }
}

/// Filters `grads` and solves the min-norm problem on what survives.
/// `None` when every gradient was filtered out.
pub fn filtered_min_norm(
    grads: &GradientSet,
    eps: FilterThreshold,
    tol: f64,
) -> Result<(ActiveSet, Option<MinNormSolution>)> {
    let active = filter_active(grads, eps);
    if active.is_empty() {
        return Ok((active, None));
    }
    let sub = grads.subset(active.indices())?;
    let sol = min_norm_element(&sub, tol)?;
    Ok((active, Some(sol)))
}

/// Step size that keeps `Σ_i F_i` non-increasing:
/// `max((|S|‖d‖² + ⟨Σ_{i∉S} ∇F_i, d⟩) / (n L ‖d‖²), 0)`, or 0 when `d = 0`.
pub fn theorem1_step(d: &[f64], dropped: &[Vec<f64>], active_count: usize, n: usize, smoothness: f64) -> f64 {
    let d_sq = norm_sq(d);
    if d_sq == 0.0 {
        return 0.0;
    }
    let mut dropped_sum = vec![0.0; d.len()];
    for g in dropped {
        axpy(1.0, g, &mut dropped_sum);
    }
    let numerator = active_count as f64 * d_sq + dot(&dropped_sum, d);
    (numerator / (n as f64 * smoothness * d_sq)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Constant(f64),
    Theorem1,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub stall_tol: f64,
    pub solver_tol: f64,
    /// Rescale every non-zero gradient to unit norm before the min-norm solve
    /// (MGDA only).
    pub normalize_gradients: bool,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            stall_tol: STALL_TOL,
            solver_tol: DEFAULT_TOL,
            normalize_gradients: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// `x − t·d`, or `x` itself for a stationary step.
    pub next: Vec<f64>,
    pub active: ActiveSet,
    pub solution: MinNormSolution,
    pub step: f64,
}

impl StepRecord {
    pub fn d_norm(&self) -> f64 {
        self.solution.norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Moved(StepRecord),
    /// `‖d‖ ≤ stall_tol`; the point is kept.
    Stationary(StepRecord),
    /// Every gradient norm is at most `ε`.
    AllGradientsSmall {
        active: ActiveSet,
    },
}

fn gradients_at<P: Problem + ?Sized>(prob: &P, x: &[f64]) -> Result<GradientSet> {
    if !all_finite(x) {
        return Err(Error::NonFinite("iterate"));
    }
    GradientSet::new(prob.gradients(x))
}

fn finish_step<P: Problem + ?Sized>(
    prob: &P,
    x: &[f64],
    grads: &GradientSet,
    active: ActiveSet,
    solution: MinNormSolution,
    rule: StepRule,
    opts: &StepOptions,
) -> StepOutcome {
    if solution.norm() <= opts.stall_tol {
        return StepOutcome::Stationary(StepRecord {
            next: x.to_vec(),
            active,
            solution,
            step: 0.0,
        });
    }
    let step = match rule {
        StepRule::Constant(t) => t,
        StepRule::Theorem1 => {
            let dropped: Vec<Vec<f64>> = active.complement().into_iter().map(|i| grads.get(i).to_vec()).collect();
            theorem1_step(
                &solution.direction,
                &dropped,
                active.len(),
                grads.len(),
                prob.smoothness(),
            )
        }
    };
    let mut next = x.to_vec();
    axpy(-step, &solution.direction, &mut next);
    StepOutcome::Moved(StepRecord {
        next,
        active,
        solution,
        step,
    })
}

/// One MGDA step over all `n` gradients.
pub fn mgda_step<P: Problem + ?Sized>(prob: &P, x: &[f64], rule: StepRule, opts: &StepOptions) -> Result<StepOutcome> {
    let mut grads = gradients_at(prob, x)?;
    if opts.normalize_gradients {
        let unit = grads
            .iter()
            .map(|g| {
                let n = norm(g);
                if n > 0.0 {
                    g.iter().map(|v| v / n).collect()
                } else {
                    g.to_vec()
                }
            })
            .collect();
        grads = GradientSet::new(unit)?;
    }
    let solution = min_norm_element(&grads, opts.solver_tol)?;
    let active = ActiveSet::all(grads.len());
    Ok(finish_step(prob, x, &grads, active, solution, rule, opts))
}

/// One MGDA++ step: filter by `eps`, then MGDA on the survivors.
pub fn mgda_pp_step<P: Problem + ?Sized>(
    prob: &P,
    x: &[f64],
    eps: FilterThreshold,
    rule: StepRule,
    opts: &StepOptions,
) -> Result<StepOutcome> {
    let grads = gradients_at(prob, x)?;
    match filtered_min_norm(&grads, eps, opts.solver_tol)? {
        (active, None) => Ok(StepOutcome::AllGradientsSmall { active }),
        (active, Some(solution)) => Ok(finish_step(prob, x, &grads, active, solution, rule, opts)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Mgda,
    MgdaPp,
}

impl Algorithm {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "mgda" => Ok(Self::Mgda),
            "mgda_pp" | "mgda++" => Ok(Self::MgdaPp),
            other => Err(Error::UnknownAlgorithm(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Mgda => "mgda",
            Self::MgdaPp => "mgda_pp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentConfig {
    pub algorithm: Algorithm,
    pub step_rule: StepRule,
    pub max_iters: usize,
    /// Only read by MGDA++.
    pub epsilon: FilterThreshold,
    pub options: StepOptions,
}

impl DescentConfig {
    pub fn mgda(step_rule: StepRule) -> Self {
        Self {
            algorithm: Algorithm::Mgda,
            step_rule,
            max_iters: DEFAULT_MAX_ITERS,
            epsilon: FilterThreshold(f64::MIN_POSITIVE),
            options: StepOptions::default(),
        }
    }

    pub fn mgda_pp(epsilon: FilterThreshold, step_rule: StepRule) -> Self {
        Self {
            algorithm: Algorithm::MgdaPp,
            step_rule,
            max_iters: DEFAULT_MAX_ITERS,
            epsilon,
            options: StepOptions::default(),
        }
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    AllGradientsSmall,
    StationaryDirection,
    MaxIters,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Self::AllGradientsSmall => "all_gradients_small",
            Self::StationaryDirection => "stationary_direction",
            Self::MaxIters => "max_iters",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub x: Vec<f64>,
    pub f: Vec<f64>,
    pub active: ActiveSet,
    /// Step taken from this iterate (0 on the last row).
    pub step: f64,
    pub d_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentTrace {
    pub iterates: Vec<Iterate>,
    pub termination: Termination,
}

impl DescentTrace {
    pub fn final_point(&self) -> &[f64] {
        &self.iterates.last().expect("trace is never empty").x
    }

    /// `Σ_i F_i(x_k)` per iterate.
    pub fn objective_sums(&self) -> Vec<f64> {
        self.iterates.iter().map(|it| it.f.iter().sum()).collect()
    }

    /// Writes one row per iterate: `iter, x1..xm, f1..fn, active, t, d_norm`.
    /// `active` is the bitmask with bit `i − 1` set for objective `i`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let first = &self.iterates[0];
        let mut header = vec!["iter".to_string()];
        header.extend((1..=first.x.len()).map(|i| format!("x{i}")));
        header.extend((1..=first.f.len()).map(|i| format!("f{i}")));
        header.extend(["active", "t", "d_norm"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        for (k, it) in self.iterates.iter().enumerate() {
            let mut row = vec![k.to_string()];
            row.extend(it.x.iter().map(|v| format::float(*v)));
            row.extend(it.f.iter().map(|v| format::float(*v)));
            row.push(it.active.mask().to_string());
            row.push(format::float(it.step));
            row.push(format::float(it.d_norm));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Parses a trace written by [`DescentTrace::write_csv`]. Errors carry the
/// 1-based line number of the offending row.
pub fn read_trace_csv<R: Read>(r: R) -> Result<Vec<Iterate>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header = reader
        .headers()
        .map_err(|e| Error::Trace {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let trace_err = |line: u64, message: String| Error::Trace { line, message };

    let columns: Vec<&str> = header.iter().collect();
    let numbered = |prefix: char| -> Vec<usize> {
        columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.len() > 1 && c.starts_with(prefix) && c[1..].chars().all(|ch| ch.is_ascii_digit()))
            .map(|(i, _)| i)
            .collect()
    };
    let x_cols = numbered('x');
    let f_cols = numbered('f');
    let find = |name: &str| columns.iter().position(|c| *c == name);
    let (Some(iter_col), Some(active_col), Some(t_col), Some(d_col)) =
        (find("iter"), find("active"), find("t"), find("d_norm"))
    else {
        return Err(trace_err(1, "header must contain iter, active, t and d_norm".into()));
    };
    if x_cols.is_empty() || f_cols.is_empty() {
        return Err(trace_err(1, "header has no x or f columns".into()));
    }
    if f_cols.len() > 64 {
        return Err(trace_err(1, "more than 64 objectives".into()));
    }

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            trace_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != columns.len() {
            return Err(trace_err(
                line,
                format!("expected {} fields, found {}", columns.len(), record.len()),
            ));
        }
        let num = |col: usize| format::parse_float(&record[col], columns[col]).map_err(|m| trace_err(line, m));
        record[iter_col]
            .trim()
            .parse::<u64>()
            .map_err(|e| trace_err(line, format!("column `iter`: {e}")))?;
        let x = x_cols.iter().map(|&c| num(c)).collect::<Result<Vec<_>>>()?;
        let f = f_cols.iter().map(|&c| num(c)).collect::<Result<Vec<_>>>()?;
        let mask = record[active_col]
            .trim()
            .parse::<u64>()
            .map_err(|e| trace_err(line, format!("column `active`: {e}")))?;
        out.push(Iterate {
            x,
            f,
            active: ActiveSet::from_mask(mask, f_cols.len()),
            step: num(t_col)?,
            d_norm: num(d_col)?,
        });
    }
    if out.is_empty() {
        return Err(trace_err(2, "trace has no rows".into()));
    }
    Ok(out)
}

/// Runs MGDA or MGDA++ from `x0` until a termination condition holds.
///
/// The returned trace has one row per visited point; the last row carries the
/// state at termination with a zero step.
pub fn run<P: Problem + ?Sized>(prob: &P, x0: &[f64], config: &DescentConfig) -> Result<DescentTrace> {
    if x0.len() != prob.dim() {
        return Err(Error::DimensionMismatch {
            expected: prob.dim(),
            found: x0.len(),
        });
    }
    if prob.num_objectives() > 64 {
        return Err(Error::InvalidArgument("at most 64 objectives are supported".into()));
    }
    let mut x = x0.to_vec();
    let mut iterates = Vec::new();
    let mut k = 0;
    loop {
        let outcome = match config.algorithm {
            Algorithm::Mgda => mgda_step(prob, &x, config.step_rule, &config.options)?,
            Algorithm::MgdaPp => mgda_pp_step(prob, &x, config.epsilon, config.step_rule, &config.options)?,
        };
        let f = prob.eval(&x);
        let terminal = |active: ActiveSet, d_norm: f64| Iterate {
            x: x.clone(),
            f: f.clone(),
            active,
            step: 0.0,
            d_norm,
        };
        let (row, termination) = match outcome {
            StepOutcome::AllGradientsSmall { active } => (terminal(active, 0.0), Some(Termination::AllGradientsSmall)),
            StepOutcome::Stationary(rec) => (
                terminal(rec.active.clone(), rec.d_norm()),
                Some(Termination::StationaryDirection),
            ),
            StepOutcome::Moved(rec) if k >= config.max_iters => {
                (terminal(rec.active.clone(), rec.d_norm()), Some(Termination::MaxIters))
            }
            StepOutcome::Moved(rec) => {
                let d_norm = rec.d_norm();
                let row = Iterate {
                    x: std::mem::take(&mut x),
                    f,
                    active: rec.active,
                    step: rec.step,
                    d_norm,
                };
                x = rec.next;
                (row, None)
            }
        };
        iterates.push(row);
        if let Some(termination) = termination {
            return Ok(DescentTrace { iterates, termination });
        }
        k += 1;
    }
}
