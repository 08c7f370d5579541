//! Weighted point sets.
//!
//! Every objective averages over a [`Sample`]: a list of points with
//! nonnegative weights summing to one. A raw draw of `T` observations has
//! weights `1/T`; [`Sample::compress`] merges repeated points (cheap for
//! binary data); an exact expectation over an enumerable distribution uses
//! the pmf as weights.

use std::collections::HashMap;

use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    dim: usize,
    data: Vec<f64>,
    weights: Vec<f64>,
    /// Number of raw observations behind the sample; `None` for exact
    /// expectations.
    count: Option<usize>,
}

impl Sample {
    /// Unweighted sample from row-major data.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("sample dimension must be positive"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(invalid(format!("{} values do not form rows of length {dim}", data.len())));
        }
        let t = data.len() / dim;
        if t == 0 {
            return Err(invalid("empty sample"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("sample contains non-finite values"));
        }
        Ok(Self {
            dim,
            data,
            weights: vec![1.0 / t as f64; t],
            count: Some(t),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or_else(|| invalid("empty sample"))?;
        if rows.iter().any(|r| r.len() != dim) {
            return Err(invalid("rows of unequal length"));
        }
        Self::from_flat(dim, rows.concat())
    }

    /// Points with explicit weights, normalized to sum to one.
    pub fn weighted(dim: usize, data: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let mut s = Self::from_flat(dim, data)?;
        if weights.len() != s.len() {
            return Err(invalid(format!("{} weights for {} points", weights.len(), s.len())));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(invalid("weights sum to zero"));
        }
        s.weights = weights.into_iter().map(|w| w / total).collect();
        s.count = None;
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored points.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Raw observation count, if this sample came from draws.
    pub fn count(&self) -> Option<usize> {
        self.count
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `(weight, point)` pairs in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.weights.iter().copied().zip(self.data.chunks_exact(self.dim))
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks_exact(self.dim).map(<[f64]>::to_vec).collect()
    }

    /// Merges bit-identical points, summing their weights. Points keep the
    /// order of their first appearance, so the result is deterministic.
    pub fn compress(&self) -> Self {
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut data = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (w, p) in self.iter() {
            let key: Vec<u64> = p.iter().map(|v| v.to_bits()).collect();
            match index.get(&key) {
                Some(&j) => weights[j] += w,
                None => {
                    index.insert(key, weights.len());
                    data.extend_from_slice(p);
                    weights.push(w);
                }
            }
        }
        Self {
            dim: self.dim,
            data,
            weights,
            count: self.count,
        }
    }

    /// Weighted mean of `f` over the points.
    pub fn expectation(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.iter().map(|(w, p)| w * f(p)).sum()
    }

    /// True iff every coordinate is exactly ±1.
    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 1.0 || v == -1.0)
    }
}
