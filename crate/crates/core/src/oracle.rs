//! Brute-force Pareto classification by dominance search over a dense grid.
//!
//! A point is weakly optimal when no grid point is strictly better in every
//! objective, strongly optimal when no grid point is at least as good
//! everywhere and better somewhere, and `ε̄`-optimal when some strongly
//! optimal grid point is within `ε̄` of it componentwise. Comparisons use a
//! slack of [`DOMINANCE_SLACK`].

use std::io::Write;

use rayon::prelude::*;

use crate::descent::{filtered_min_norm, FilterThreshold, Problem};
use crate::error::{Error, Result};
use crate::format;
use crate::min_norm::{min_norm_element, GradientSet, DEFAULT_TOL};

pub const DOMINANCE_SLACK: f64 = 1e-9;
pub const MAX_GRID_POINTS: u128 = 10_000_000;
/// Points per axis of the default oracle grids.
pub const DEFAULT_POINTS_PER_AXIS: usize = 401;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    lower: Vec<f64>,
    upper: Vec<f64>,
    points_per_axis: usize,
}

impl GridSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, points_per_axis: usize) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::InvalidArgument("grid bounds must be non-empty and match".into()));
        }
        if points_per_axis < 2 {
            return Err(Error::InvalidArgument("grid needs at least 2 points per axis".into()));
        }
        if !lower.iter().chain(&upper).all(|v| v.is_finite()) || lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(Error::InvalidArgument(
                "grid bounds must be finite with lower ≤ upper".into(),
            ));
        }
        let points = (points_per_axis as u128)
            .checked_pow(lower.len() as u32)
            .unwrap_or(u128::MAX);
        if points > MAX_GRID_POINTS {
            return Err(Error::GridTooLarge {
                points,
                limit: MAX_GRID_POINTS,
            });
        }
        Ok(Self {
            lower,
            upper,
            points_per_axis,
        })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64, points_per_axis: usize) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim], points_per_axis)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / (self.points_per_axis - 1) as f64
    }

    /// Grid point `index`, with the last axis varying fastest.
    pub fn point(&self, mut index: usize) -> Vec<f64> {
        let p = self.points_per_axis;
        let mut out = vec![0.0; self.dim()];
        for axis in (0..self.dim()).rev() {
            let i = index % p;
            index /= p;
            out[axis] = if i == p - 1 {
                self.upper[axis]
            } else {
                self.lower[axis] + i as f64 * self.spacing(axis)
            };
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoVerdict {
    pub is_weak: bool,
    pub is_strong: bool,
    pub is_eps: bool,
    pub stationarity_residual: f64,
    /// A grid point strictly better in every objective; set iff `!is_weak`.
    pub weak_witness: Option<Vec<f64>>,
    /// A grid point that dominates; set iff `!is_strong`.
    pub strong_witness: Option<Vec<f64>>,
}

/// `a` strictly better than `b` in every objective.
fn strictly_dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| *x < *y - DOMINANCE_SLACK)
}

/// `a ⪯ b` and `a ≠ b`, both up to the slack.
fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut better = false;
    for (x, y) in a.iter().zip(b) {
        if *x > *y + DOMINANCE_SLACK {
            return false;
        }
        if *x < *y - DOMINANCE_SLACK {
            better = true;
        }
    }
    better
}

/// Objective values over a grid plus its strong-Pareto front, computed once
/// and reused across classifications.
pub struct GridOracle<P> {
    problem: P,
    grid: GridSpec,
    values: Vec<Vec<f64>>,
    front: Vec<usize>,
}

impl<P: Problem> GridOracle<P> {
    pub fn new(problem: P, grid: GridSpec) -> Result<Self> {
        if grid.dim() != problem.dim() {
            return Err(Error::DimensionMismatch {
                expected: problem.dim(),
                found: grid.dim(),
            });
        }
        let values: Vec<Vec<f64>> = (0..grid.len())
            .into_par_iter()
            .map(|i| problem.eval(&grid.point(i)))
            .collect();
        let front = strong_front(&values);
        Ok(Self {
            problem,
            grid,
            values,
            front,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn problem(&self) -> &P {
        &self.problem
    }

    /// Indices of the non-dominated grid points.
    pub fn front(&self) -> &[usize] {
        &self.front
    }

    pub fn front_points(&self) -> Vec<Vec<f64>> {
        self.front.iter().map(|&i| self.grid.point(i)).collect()
    }

    pub fn classify(&self, x: &[f64], varepsilon: f64) -> Result<ParetoVerdict> {
        if x.len() != self.problem.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.problem.dim(),
                found: x.len(),
            });
        }
        let fx = self.problem.eval(x);
        self.classify_values(x, &fx, varepsilon)
    }

    fn classify_values(&self, x: &[f64], fx: &[f64], varepsilon: f64) -> Result<ParetoVerdict> {
        let weak_witness = self
            .values
            .par_iter()
            .position_first(|fy| strictly_dominates(fy, fx))
            .map(|i| self.grid.point(i));
        let strong_witness = self
            .values
            .par_iter()
            .position_first(|fy| dominates(fy, fx))
            .map(|i| self.grid.point(i));
        let is_eps = self.front.iter().any(|&i| {
            self.values[i]
                .iter()
                .zip(fx)
                .all(|(fy, f)| *f <= fy + varepsilon + DOMINANCE_SLACK)
        });
        Ok(ParetoVerdict {
            is_weak: weak_witness.is_none(),
            is_strong: strong_witness.is_none(),
            is_eps,
            stationarity_residual: stationarity_residual(x, &self.problem)?,
            weak_witness,
            strong_witness,
        })
    }

    /// Classifies every grid point against the rest of the grid.
    pub fn classify_grid(&self, varepsilon: f64) -> Result<Vec<ParetoVerdict>> {
        (0..self.grid.len())
            .into_par_iter()
            .map(|i| self.classify_values(&self.grid.point(i), &self.values[i], varepsilon))
            .collect()
    }
}

/// Non-dominated indices: a lexicographic sweep (a dominator never sorts
/// after what it dominates) followed by a pairwise prune of the survivors for
/// ties inside the slack.
fn strong_front(values: &[Vec<f64>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.par_sort_by(|&a, &b| {
        values[a]
            .iter()
            .zip(&values[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut front: Vec<usize> = Vec::new();
    for i in order {
        if !front.iter().any(|&j| dominates(&values[j], &values[i])) {
            front.push(i);
        }
    }
    let pruned: Vec<usize> = front
        .iter()
        .copied()
        .filter(|&i| !front.iter().any(|&j| dominates(&values[j], &values[i])))
        .collect();
    let mut pruned = pruned;
    pruned.sort_unstable();
    pruned
}

/// Builds a one-off oracle and classifies `x`.
pub fn classify<P: Problem>(x: &[f64], p: P, grid: GridSpec, varepsilon: f64) -> Result<ParetoVerdict> {
    GridOracle::new(p, grid)?.classify(x, varepsilon)
}

/// `‖d‖` for the min-norm element of all gradients at `x`; zero exactly at
/// Pareto stationary points.
pub fn stationarity_residual<P: Problem + ?Sized>(x: &[f64], p: &P) -> Result<f64> {
    let grads = GradientSet::new(p.gradients(x))?;
    Ok(min_norm_element(&grads, DEFAULT_TOL)?.norm())
}

/// Sufficient condition for strong optimality under convexity: the gradients
/// with norm above `eps` are non-empty and a convex combination of them
/// vanishes (`‖d‖ ≤ tol`).
pub fn lemma2_certificate(grads: &GradientSet, eps: FilterThreshold, tol: f64) -> Result<bool> {
    match filtered_min_norm(grads, eps, DEFAULT_TOL)? {
        (_, None) => Ok(false),
        (_, Some(sol)) => Ok(sol.norm() <= tol),
    }
}

/// One classified point.
#[derive(Debug, Clone, PartialEq)]
pub struct VerdictRow {
    pub label: String,
    pub x: Vec<f64>,
    pub f: Vec<f64>,
    pub verdict: ParetoVerdict,
}

/// Writes `label, x1..xm, f1..fn, is_weak, is_strong, is_eps, residual,
/// witness`; `witness` holds the strong witness's coordinates joined by `;`
/// and is empty for strong points.
pub fn write_verdicts_csv<W: Write>(rows: &[VerdictRow], mut w: W) -> Result<()> {
    let Some(first) = rows.first() else {
        writeln!(w, "label,is_weak,is_strong,is_eps,residual,witness")?;
        return Ok(());
    };
    let mut header = vec!["label".to_string()];
    header.extend((1..=first.x.len()).map(|i| format!("x{i}")));
    header.extend((1..=first.f.len()).map(|i| format!("f{i}")));
    header.extend(["is_weak", "is_strong", "is_eps", "residual", "witness"].map(String::from));
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let mut cells = vec![row.label.clone()];
        cells.extend(row.x.iter().map(|v| format::float(*v)));
        cells.extend(row.f.iter().map(|v| format::float(*v)));
        cells.push(row.verdict.is_weak.to_string());
        cells.push(row.verdict.is_strong.to_string());
        cells.push(row.verdict.is_eps.to_string());
        cells.push(format::float(row.verdict.stationarity_residual));
        let witness = row.verdict.strong_witness.as_deref().unwrap_or(&[]);
        cells.push(witness.iter().map(|v| format::float(*v)).collect::<Vec<_>>().join(";"));
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}
