//! Convex synthetic benchmark problems with analytic gradients.

use crate::descent::Problem;
use crate::error::{Error, Result};
use crate::vector::{distance, norm};

/// Half-width of the zero plateau in the clamped-norm landscape.
pub const CLAMP_RADIUS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    /// `F_i(x) = ‖y‖²` with `y_j = x_j` for `j ≠ i` and
    /// `y_i = max(0, |x_i| − 5)`.
    ClampedNorm { objectives: usize },
    /// `F_1(x) = ‖x − 1‖²`, `F_2(x) = ‖x + 1‖²`.
    QuadraticPair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticProblem {
    kind: SyntheticKind,
    dim: usize,
    dummies: Vec<f64>,
}

impl SyntheticProblem {
    pub fn clamped_norm_landscape(dim: usize, objectives: usize) -> Result<Self> {
        if objectives == 0 || objectives > dim {
            return Err(Error::InvalidArgument(format!(
                "clamped landscape needs 1 ≤ n ≤ m, got n={objectives}, m={dim}"
            )));
        }
        Ok(Self {
            kind: SyntheticKind::ClampedNorm { objectives },
            dim,
            dummies: Vec::new(),
        })
    }

    pub fn quadratic_pair(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("quadratic pair needs m ≥ 1".into()));
        }
        Ok(Self {
            kind: SyntheticKind::QuadraticPair,
            dim,
            dummies: Vec::new(),
        })
    }

    /// Looks a problem up by its CLI name: `clamped_norm` (two objectives) or
    /// `quadratic_pair`.
    pub fn by_name(name: &str, dim: usize) -> Result<Self> {
        match name {
            "clamped_norm" => Self::clamped_norm_landscape(dim, 2),
            "quadratic_pair" => Self::quadratic_pair(dim),
            other => Err(Error::UnknownProblem(other.to_string())),
        }
    }

    /// Appends the constant objective `F_{n+1}(x) = c`.
    pub fn with_dummy_objective(mut self, c: f64) -> Self {
        self.dummies.push(c);
        self
    }

    pub fn kind(&self) -> SyntheticKind {
        self.kind
    }

    pub fn dummy_count(&self) -> usize {
        self.dummies.len()
    }

    fn base_objectives(&self) -> usize {
        match self.kind {
            SyntheticKind::ClampedNorm { objectives } => objectives,
            SyntheticKind::QuadraticPair => 2,
        }
    }

    /// Per-objective minima `F_i*`.
    pub fn optimal_values(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.base_objectives()];
        out.extend(&self.dummies);
        out
    }

    /// Euclidean distance from `x` to the strong Pareto set.
    ///
    /// Quadratic pair: the segment `{α·1 : α ∈ [−1, 1]}`. Clamped landscape:
    /// the origin when `n ≥ 2`, else the plateau `|x_1| ≤ 5, x_j = 0`.
    /// Constant objectives do not change the set.
    pub fn distance_to_pareto_set(&self, x: &[f64]) -> f64 {
        match self.kind {
            SyntheticKind::QuadraticPair => {
                let m = self.dim as f64;
                let alpha = (x.iter().sum::<f64>() / m).clamp(-1.0, 1.0);
                let proj = vec![alpha; self.dim];
                distance(x, &proj)
            }
            SyntheticKind::ClampedNorm { objectives } => {
                if objectives >= 2 {
                    norm(x)
                } else {
                    let mut proj = vec![0.0; self.dim];
                    proj[0] = x[0].clamp(-CLAMP_RADIUS, CLAMP_RADIUS);
                    distance(x, &proj)
                }
            }
        }
    }
}

fn clamp_coord(v: f64) -> f64 {
    (v.abs() - CLAMP_RADIUS).max(0.0)
}

impl Problem for SyntheticProblem {
    fn num_objectives(&self) -> usize {
        self.base_objectives() + self.dummies.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = match self.kind {
            SyntheticKind::ClampedNorm { objectives } => (0..objectives)
                .map(|i| {
                    x.iter()
                        .enumerate()
                        .map(|(j, v)| {
                            let y = if j == i { clamp_coord(*v) } else { *v };
                            y * y
                        })
                        .sum()
                })
                .collect(),
            SyntheticKind::QuadraticPair => {
                let f1 = x.iter().map(|v| (v - 1.0) * (v - 1.0)).sum();
                let f2 = x.iter().map(|v| (v + 1.0) * (v + 1.0)).sum();
                vec![f1, f2]
            }
        };
        out.extend(&self.dummies);
        out
    }

    fn gradients(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = match self.kind {
            SyntheticKind::ClampedNorm { objectives } => (0..objectives)
                .map(|i| {
                    let mut g: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
                    // zero on the plateau, including the kink |x_i| = 5
                    g[i] = 2.0 * x[i].signum() * clamp_coord(x[i]);
                    g
                })
                .collect(),
            SyntheticKind::QuadraticPair => vec![
                x.iter().map(|v| 2.0 * (v - 1.0)).collect(),
                x.iter().map(|v| 2.0 * (v + 1.0)).collect(),
            ],
        };
        out.extend(self.dummies.iter().map(|_| vec![0.0; self.dim]));
        out
    }

    fn smoothness(&self) -> f64 {
        2.0
    }
}

/// Largest relative error between central differences with step `h` and the
/// analytic gradients, `|fd − g| / max(1, |g|)` over objectives and coordinates.
pub fn finite_diff_check<P: Problem + ?Sized>(p: &P, x: &[f64], h: f64) -> f64 {
    let analytic = p.gradients(x);
    let mut probe = x.to_vec();
    let mut worst: f64 = 0.0;
    for j in 0..x.len() {
        probe[j] = x[j] + h;
        let plus = p.eval(&probe);
        probe[j] = x[j] - h;
        let minus = p.eval(&probe);
        probe[j] = x[j];
        for (i, g) in analytic.iter().enumerate() {
            let fd = (plus[i] - minus[i]) / (2.0 * h);
            worst = worst.max((fd - g[j]).abs() / g[j].abs().max(1.0));
        }
    }
    worst
}
