use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};

/// Logit gap below which `greedy` treats actions as tied.
pub const TIE_TOL: f64 = 1e-9;

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Tabular softmax policy for one agent. Rows are created on first visit and
/// start at `prior`; the flattened parameter vector is row-major in creation
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    num_actions: usize,
    prior: Vec<f64>,
    /// Action chosen by `greedy` when it ties for the maximum.
    tie_action: usize,
    rows: HashMap<u64, usize>,
    logits: Vec<f64>,
}

impl PolicyTable {
    pub fn new(num_actions: usize, tie_action: usize) -> Self {
        Self::with_prior(vec![0.0; num_actions], tie_action).expect("zero prior is valid")
    }

    pub fn with_prior(prior: Vec<f64>, tie_action: usize) -> Result<Self> {
        if prior.is_empty() || tie_action >= prior.len() {
            return Err(Error::InvalidArgument(
                "policy needs ≥ 1 action and a valid tie action".into(),
            ));
        }
        if !prior.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("policy prior"));
        }
        Ok(Self {
            num_actions: prior.len(),
            prior,
            tie_action,
            rows: HashMap::new(),
            logits: Vec::new(),
        })
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Length of the flattened parameter vector.
    pub fn num_params(&self) -> usize {
        self.logits.len()
    }

    pub fn row_index(&self, key: u64) -> Option<usize> {
        self.rows.get(&key).copied()
    }

    /// Row of `key`, created from the prior if missing.
    pub fn ensure(&mut self, key: u64) -> usize {
        let next = self.rows.len();
        let row = *self.rows.entry(key).or_insert(next);
        if row == next {
            self.logits.extend_from_slice(&self.prior);
        }
        row
    }

    pub fn logits(&self, key: u64) -> &[f64] {
        match self.row_index(key) {
            Some(r) => &self.logits[r * self.num_actions..(r + 1) * self.num_actions],
            None => &self.prior,
        }
    }

    pub fn probs(&self, key: u64) -> Vec<f64> {
        softmax(self.logits(key))
    }

    pub fn sample<R: Rng + ?Sized>(&self, key: u64, rng: &mut R) -> usize {
        let p = self.probs(key);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (a, pa) in p.iter().enumerate() {
            acc += pa;
            if u < acc {
                return a;
            }
        }
        p.iter().rposition(|pa| *pa > 0.0).unwrap_or(0)
    }

    /// Most likely action. Logits within [`TIE_TOL`] of the maximum tie;
    /// ties go to the tie action when it is among them, else to the lowest
    /// index.
    pub fn greedy(&self, key: u64) -> usize {
        let z = self.logits(key);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if z[self.tie_action] >= max - TIE_TOL {
            return self.tie_action;
        }
        z.iter().position(|v| *v >= max - TIE_TOL).unwrap_or(0)
    }

    pub fn params(&self) -> &[f64] {
        &self.logits
    }

    /// `θ += alpha · delta` over the first `delta.len()` parameters.
    pub fn apply(&mut self, alpha: f64, delta: &[f64]) -> Result<()> {
        if delta.len() > self.logits.len() {
            return Err(Error::DimensionMismatch {
                expected: self.logits.len(),
                found: delta.len(),
            });
        }
        if !delta.iter().all(|v| v.is_finite()) || !alpha.is_finite() {
            return Err(Error::NonFinite("policy update"));
        }
        for (t, d) in self.logits.iter_mut().zip(delta) {
            *t += alpha * d;
        }
        Ok(())
    }
}

/// Per-state vector of return baselines, one head per agent. Unvisited
/// states read as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadValueTable {
    heads: usize,
    rows: HashMap<u64, usize>,
    values: Vec<f64>,
    zero: Vec<f64>,
}

impl MultiHeadValueTable {
    pub fn new(heads: usize) -> Self {
        Self {
            heads,
            rows: HashMap::new(),
            values: Vec::new(),
            zero: vec![0.0; heads],
        }
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, key: u64) -> &[f64] {
        match self.rows.get(&key) {
            Some(&r) => &self.values[r * self.heads..(r + 1) * self.heads],
            None => &self.zero,
        }
    }

    pub fn get_mut(&mut self, key: u64) -> &mut [f64] {
        let next = self.rows.len();
        let r = *self.rows.entry(key).or_insert(next);
        if r == next {
            self.values.extend(std::iter::repeat_n(0.0, self.heads));
        }
        &mut self.values[r * self.heads..(r + 1) * self.heads]
    }

    pub fn set(&mut self, key: u64, values: &[f64]) {
        self.get_mut(key).copy_from_slice(values);
    }
}
