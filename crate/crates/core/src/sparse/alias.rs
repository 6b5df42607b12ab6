//! Alias-method sampling from a discrete distribution.
//!
//! Vose's stable construction: O(n) to build, O(1) per draw, so drawing n
//! samples costs O(n). Table math stays in f64 regardless of the crate's
//! scalar type to keep near-uniform inputs from drifting.

use rand::Rng;

use super::SparseError;
use crate::Real;

/// Alias table over outcomes `0..len`. Sampling reproduces the normalized
/// input weights exactly, up to float rounding.
#[derive(Debug, Clone)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasTable {
    /// Build from non-negative weights with a positive sum.
    pub fn new(weights: &[Real]) -> Result<Self, SparseError> {
        if weights.is_empty() {
            return Err(SparseError::InvalidDistribution("no outcomes".into()));
        }
        let mut sum = 0.0f64;
        for (i, &w) in weights.iter().enumerate() {
            let w = w as f64;
            if !w.is_finite() || w < 0.0 {
                return Err(SparseError::InvalidDistribution(format!(
                    "weight {w} at index {i} is negative or not finite"
                )));
            }
            sum += w;
        }
        if sum <= 0.0 {
            return Err(SparseError::InvalidDistribution(
                "weights sum to zero".into(),
            ));
        }

        let n = weights.len();
        let mut scaled: Vec<f64> = weights.iter().map(|&w| w as f64 * n as f64 / sum).collect();
        let mut prob = vec![1.0f64; n];
        let mut alias: Vec<usize> = (0..n).collect();
        let mut small: Vec<usize> = Vec::with_capacity(n);
        let mut large: Vec<usize> = Vec::with_capacity(n);
        for (i, &s) in scaled.iter().enumerate() {
            if s < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            prob[s] = scaled[s];
            alias[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // leftovers in either stack carry probability 1 (up to rounding)
        Ok(Self { prob, alias })
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    /// Draw one outcome.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let slot = rng.gen_range(0..self.prob.len());
        if rng.gen::<f64>() < self.prob[slot] {
            slot
        } else {
            self.alias[slot]
        }
    }

    /// Draw `count` outcomes; O(count).
    pub fn sample_many<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<usize> {
        (0..count).map(|_| self.sample(rng)).collect()
    }

    /// Exact probability of outcome `i` as encoded by the table; for tests.
    pub fn outcome_probability(&self, i: usize) -> f64 {
        let n = self.prob.len() as f64;
        let mut p = self.prob[i];
        for (slot, &a) in self.alias.iter().enumerate() {
            if a == i && self.prob[slot] < 1.0 {
                p += 1.0 - self.prob[slot];
            }
        }
        p / n
    }
}
