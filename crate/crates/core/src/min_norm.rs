//! Minimum-norm element of the convex hull of a set of gradients.
//!
//! Given gradients `g_1..g_k`, find simplex weights `λ` minimising
//! `‖Σ λ_i g_i‖²`. The minimiser `d` is the common descent direction used by
//! MGDA: `-d` decreases every objective's first-order model whenever `d ≠ 0`.
//!
//! Pairs are solved in closed form. Larger sets use pairwise Frank–Wolfe on the
//! simplex with an exact line search between the two vertices being traded,
//! warm-started from uniform weights.

use crate::error::{Error, Result};
use crate::vector::{axpy, dot, norm_sq};

/// Duality-gap tolerance used for the synthetic problems.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Looser tolerance for the noisier policy-gradient loops.
pub const MARL_TOL: f64 = 1e-8;
/// Iteration cap for the Frank–Wolfe solver.
pub const MAX_ITER: usize = 500;

/// A non-empty set of finite gradient vectors sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    vectors: Vec<Vec<f64>>,
}

impl GradientSet {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let first = vectors.first().ok_or(Error::EmptyGradientSet)?;
        let dim = first.len();
        for v in &vectors {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            if !v.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFinite("gradient"));
            }
        }
        Ok(Self { vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.vectors[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.vectors.iter().map(Vec::as_slice)
    }

    pub fn norms(&self) -> Vec<f64> {
        self.iter().map(|g| norm_sq(g).sqrt()).collect()
    }

    /// The gradients at `indices`, in that order. Fails if `indices` is empty.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.vectors[i].clone()).collect())
    }

    pub fn into_inner(self) -> Vec<Vec<f64>> {
        self.vectors
    }

    /// `Σ λ_i g_i`.
    pub fn combine(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (w, g) in weights.iter().zip(self.iter()) {
            axpy(*w, g, &mut out);
        }
        out
    }

    fn gram(&self) -> Vec<Vec<f64>> {
        let k = self.len();
        let mut m = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in i..k {
                let v = dot(&self.vectors[i], &self.vectors[j]);
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        m
    }
}

/// Non-negative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for SimplexWeights {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinNormSolution {
    pub weights: SimplexWeights,
    /// `Σ λ_i g_i`.
    pub direction: Vec<f64>,
    /// `‖direction‖²`.
    pub squared_norm: f64,
}

impl MinNormSolution {
    fn from_weights(grads: &GradientSet, weights: Vec<f64>) -> Self {
        let direction = grads.combine(&weights);
        let squared_norm = norm_sq(&direction);
        Self {
            weights: SimplexWeights(weights),
            direction,
            squared_norm,
        }
    }

    pub fn norm(&self) -> f64 {
        self.squared_norm.sqrt()
    }
}

/// Minimum-norm point of `conv{g_1..g_k}`.
///
/// One vector is returned as is, two use [`min_norm_pair`], more use
/// [`frank_wolfe`] with [`MAX_ITER`] iterations.
pub fn min_norm_element(grads: &GradientSet, tol: f64) -> Result<MinNormSolution> {
    check_tol(tol)?;
    match grads.len() {
        1 => Ok(MinNormSolution::from_weights(grads, vec![1.0])),
        2 => min_norm_pair(grads.get(0), grads.get(1)),
        _ => frank_wolfe(grads, tol, MAX_ITER),
    }
}

/// Closed-form minimum-norm point of the segment `[g1, g2]`.
///
/// The weight on `g1` is `clip(⟨g2 − g1, g2⟩ / ‖g1 − g2‖², 0, 1)`; identical
/// vectors get `(0.5, 0.5)`.
pub fn min_norm_pair(g1: &[f64], g2: &[f64]) -> Result<MinNormSolution> {
    let grads = GradientSet::new(vec![g1.to_vec(), g2.to_vec()])?;
    let mut diff_sq = 0.0;
    let mut num = 0.0;
    for (a, b) in g1.iter().zip(g2) {
        let diff = b - a;
        diff_sq += diff * diff;
        num += diff * b;
    }
    let lambda = if diff_sq == 0.0 {
        0.5
    } else {
        (num / diff_sq).clamp(0.0, 1.0)
    };
    Ok(MinNormSolution::from_weights(&grads, vec![lambda, 1.0 - lambda]))
}

/// Pairwise Frank–Wolfe for `min ‖Σ λ_i g_i‖²` over the simplex.
///
/// Each iteration moves mass from the away vertex (largest `⟨g_i, d⟩` in the
/// support) to the Frank–Wolfe vertex (smallest `⟨g_i, d⟩`, lowest index on
/// ties), with the exact minimiser along that segment. Stops once
/// `‖d‖² − min_i ⟨g_i, d⟩ < tol` or after `max_iter` iterations.
pub fn frank_wolfe(grads: &GradientSet, tol: f64, max_iter: usize) -> Result<MinNormSolution> {
    check_tol(tol)?;
    let k = grads.len();
    let gram = grads.gram();
    let mut lambda = vec![1.0 / k as f64; k];

    for _ in 0..max_iter {
        // v_i = ⟨g_i, d⟩, q = ‖d‖²
        let v: Vec<f64> = gram.iter().map(|row| dot(row, &lambda)).collect();
        let q = dot(&lambda, &v);

        let mut fw = 0;
        for i in 1..k {
            if v[i] < v[fw] {
                fw = i;
            }
        }
        if q - v[fw] < tol {
            break;
        }

        let mut away = None;
        for i in 0..k {
            if lambda[i] > 0.0 && away.is_none_or(|a: usize| v[i] > v[a]) {
                away = Some(i);
            }
        }
        let Some(away) = away else { break };
        if away == fw {
            break;
        }

        // ‖d + γ(g_fw − g_away)‖² is a parabola in γ ∈ [0, λ_away].
        let curvature = gram[fw][fw] + gram[away][away] - 2.0 * gram[fw][away];
        let max_step = lambda[away];
        let step = if curvature <= 0.0 {
            max_step
        } else {
            ((v[away] - v[fw]) / curvature).clamp(0.0, max_step)
        };
        if step <= 0.0 {
            break;
        }
        lambda[fw] += step;
        if step >= max_step {
            lambda[away] = 0.0;
        } else {
            lambda[away] -= step;
        }
        refine_on_support(&gram, &mut lambda);
    }

    let total: f64 = lambda.iter().sum();
    for w in &mut lambda {
        *w /= total;
    }
    Ok(MinNormSolution::from_weights(grads, lambda))
}

/// Minor cycles of Wolfe's min-norm-point method on the current support: jump
/// to the affine minimiser of the support, or as far towards it as the simplex
/// allows (dropping the vertex that hits zero). Keeps the step only if it does
/// not increase `‖d‖²`.
fn refine_on_support(gram: &[Vec<f64>], lambda: &mut [f64]) {
    let objective = |l: &[f64]| -> f64 { gram.iter().zip(l).map(|(row, li)| li * dot(row, l)).sum() };
    let mut current = objective(lambda);
    for _ in 0..lambda.len() {
        let mut support: Vec<usize> = (0..lambda.len()).filter(|&i| lambda[i] > 0.0).collect();
        while let Some(alpha) = affine_dependence(gram, &support) {
            drop_dependent_vertex(lambda, &support, &alpha);
            support.retain(|&i| lambda[i] > 0.0);
        }
        if support.len() < 2 {
            return;
        }
        let Some(affine) = affine_min_norm(gram, &support) else {
            return;
        };
        let mut theta: f64 = 1.0;
        let mut blocking = None;
        for (pos, &i) in support.iter().enumerate() {
            if affine[pos] < 0.0 {
                let t = lambda[i] / (lambda[i] - affine[pos]);
                if t < theta {
                    theta = t;
                    blocking = Some(i);
                }
            }
        }
        let mut candidate = lambda.to_vec();
        for (pos, &i) in support.iter().enumerate() {
            candidate[i] = (1.0 - theta) * lambda[i] + theta * affine[pos];
        }
        if let Some(i) = blocking {
            candidate[i] = 0.0;
        }
        for w in &mut candidate {
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let total: f64 = candidate.iter().sum();
        candidate.iter_mut().for_each(|w| *w /= total);
        let value = objective(&candidate);
        if value > current {
            return;
        }
        lambda.copy_from_slice(&candidate);
        current = value;
        if blocking.is_none() {
            return;
        }
    }
}

/// Bordered KKT matrix of `support`, scaled by the largest diagonal entry.
fn bordered(gram: &[Vec<f64>], support: &[usize]) -> Vec<Vec<f64>> {
    let s = support.len();
    let scale = support
        .iter()
        .map(|&i| gram[i][i])
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut a = vec![vec![0.0; s + 1]; s + 1];
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            a[r][c] = gram[i][j] / scale;
        }
        a[r][s] = 1.0;
        a[s][r] = 1.0;
    }
    a
}

/// Coefficients `α` over `support` with `Σ α_i g_i = 0`, `Σ α_i = 0` and
/// `α ≠ 0`, if the support is affinely dependent. These are exactly the null
/// vectors of the bordered KKT matrix (with a zero last entry).
fn affine_dependence(gram: &[Vec<f64>], support: &[usize]) -> Option<Vec<f64>> {
    let s = support.len();
    if s < 2 {
        return None;
    }
    let mut a = bordered(gram, support);
    let n = s + 1;
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..n {
        if row == n {
            break;
        }
        let p = (row..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[p][col].abs() < 1e-10 {
            continue;
        }
        a.swap(row, p);
        let pv = a[row][col];
        a[row].iter_mut().for_each(|x| *x /= pv);
        for r in 0..n {
            if r != row && a[r][col] != 0.0 {
                let f = a[r][col];
                for k in 0..n {
                    a[r][k] -= f * a[row][k];
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    let free = (0..s).find(|c| !pivots.contains(c))?;
    let mut alpha = vec![0.0; s];
    alpha[free] = 1.0;
    for (r, &c) in pivots.iter().enumerate() {
        if c < s {
            alpha[c] = -a[r][free];
        }
    }
    Some(alpha)
}

/// Moves along `α` until one support weight hits zero; `Σ λ_i g_i` is
/// unchanged.
fn drop_dependent_vertex(lambda: &mut [f64], support: &[usize], alpha: &[f64]) {
    let sign = if alpha.iter().any(|a| *a > 0.0) { 1.0 } else { -1.0 };
    let mut best: Option<(f64, usize)> = None;
    for (pos, &i) in support.iter().enumerate() {
        let a = sign * alpha[pos];
        if a > 0.0 {
            let t = lambda[i] / a;
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, i));
            }
        }
    }
    let Some((t, hit)) = best else { return };
    for (pos, &i) in support.iter().enumerate() {
        lambda[i] = (lambda[i] - t * sign * alpha[pos]).max(0.0);
    }
    lambda[hit] = 0.0;
    let total: f64 = lambda.iter().sum();
    lambda.iter_mut().for_each(|w| *w /= total);
}

/// Minimiser of `‖Σ μ_i g_i‖²` subject to `Σ μ_i = 1` over `support`, from the
/// bordered KKT system. `None` when the system is numerically singular.
fn affine_min_norm(gram: &[Vec<f64>], support: &[usize]) -> Option<Vec<f64>> {
    let s = support.len();
    let n = s + 1;
    let mut a = vec![vec![0.0; n + 1]; n];
    let scale = support
        .iter()
        .map(|&i| gram[i][i])
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            a[r][c] = gram[i][j] / scale;
        }
        a[r][s] = 1.0;
    }
    for c in 0..s {
        a[s][c] = 1.0;
    }
    a[s][n] = 1.0;

    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                if f != 0.0 {
                    for k in col..=n {
                        a[row][k] -= f * a[col][k];
                    }
                }
            }
        }
    }
    let mu: Vec<f64> = (0..s).map(|r| a[r][n] / a[r][r]).collect();
    mu.iter().all(|x| x.is_finite()).then_some(mu)
}

/// Steepest common descent direction `-d`.
pub fn steepest_direction(grads: &GradientSet, tol: f64) -> Result<Vec<f64>> {
    let sol = min_norm_element(grads, tol)?;
    Ok(sol.direction.iter().map(|x| -x).collect())
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")))
    }
}
