use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RetrievalError;

/// Text → query vector.
pub trait QueryEncoder: Sync {
    fn dim(&self) -> usize;
    fn encode(&self, text: &str) -> Result<Vec<f64>, RetrievalError>;
}

/// Lowercased alphanumeric runs; everything else separates tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Bucket weights of a text: each token's bucket gets `1/n` per occurrence.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TokenBag {
    entries: Vec<(usize, f64)>,
}

impl TokenBag {
    pub fn new(text: &str, buckets: usize) -> Self {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return TokenBag::default();
        }
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for t in &tokens {
            *counts.entry((fnv1a(t.as_bytes()) % buckets as u64) as usize).or_insert(0) += 1;
        }
        let n = tokens.len() as f64;
        TokenBag {
            entries: counts.into_iter().map(|(b, c)| (b, c as f64 / n)).collect(),
        }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Mean-pooled hashed token embeddings. The embedding matrix has one row of
/// `dim` values per bucket; vectors are not normalised, so scores are raw
/// inner products.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashingEncoder {
    buckets: usize,
    dim: usize,
    weights: Vec<f64>,
}

impl HashingEncoder {
    pub fn zeros(buckets: usize, dim: usize) -> Self {
        HashingEncoder {
            buckets,
            dim,
            weights: vec![0.0; buckets * dim],
        }
    }

    /// Rows drawn uniformly with variance `1/dim`, so a row has roughly unit
    /// norm and distinct rows are nearly orthogonal.
    pub fn seeded(buckets: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = (3.0 / dim as f64).sqrt();
        let weights = (0..buckets * dim).map(|_| rng.gen_range(-a..a)).collect();
        HashingEncoder { buckets, dim, weights }
    }

    pub fn buckets(&self) -> usize {
        self.buckets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn row(&self, bucket: usize) -> &[f64] {
        &self.weights[bucket * self.dim..(bucket + 1) * self.dim]
    }

    pub fn bag(&self, text: &str) -> TokenBag {
        TokenBag::new(text, self.buckets)
    }

    pub fn embed(&self, bag: &TokenBag) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(b, w) in bag.entries() {
            for (o, x) in out.iter_mut().zip(self.row(b)) {
                *o += w * x;
            }
        }
        out
    }

    pub fn embed_text(&self, text: &str) -> Vec<f64> {
        self.embed(&self.bag(text))
    }

    /// Adds zero-mean uniform noise with standard deviation `std` to every
    /// weight.
    pub fn perturb(&mut self, std: f64, seed: u64) {
        if std == 0.0 {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = std * 3f64.sqrt();
        for w in &mut self.weights {
            *w += rng.gen_range(-a..a);
        }
    }

    pub fn apply(&mut self, grad: &SparseGrad, learning_rate: f64) {
        for (&b, g) in &grad.rows {
            let row = &mut self.weights[b * self.dim..(b + 1) * self.dim];
            for (w, d) in row.iter_mut().zip(g) {
                *w -= learning_rate * d;
            }
        }
    }
}

impl QueryEncoder for HashingEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>, RetrievalError> {
        Ok(self.embed_text(text))
    }
}

/// Row-sparse gradient with respect to a [`HashingEncoder`]'s weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseGrad {
    dim: usize,
    rows: BTreeMap<usize, Vec<f64>>,
}

impl SparseGrad {
    pub fn new(dim: usize) -> Self {
        SparseGrad {
            dim,
            rows: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Adds `scale * d(bag · M)/dM` contracted with `v`, i.e. for each bucket
    /// `b` in the bag, `scale * w_b * v` to row `b`.
    pub fn add_bag(&mut self, bag: &TokenBag, v: &[f64], scale: f64) {
        if scale == 0.0 {
            return;
        }
        for &(b, w) in bag.entries() {
            let row = self.rows.entry(b).or_insert_with(|| vec![0.0; self.dim]);
            for (r, x) in row.iter_mut().zip(v) {
                *r += scale * w * x;
            }
        }
    }

    pub fn add_scaled(&mut self, other: &SparseGrad, scale: f64) {
        for (&b, g) in &other.rows {
            let row = self.rows.entry(b).or_insert_with(|| vec![0.0; self.dim]);
            for (r, x) in row.iter_mut().zip(g) {
                *r += scale * x;
            }
        }
    }

    pub fn rows(&self) -> &BTreeMap<usize, Vec<f64>> {
        &self.rows
    }

    pub fn to_dense(&self, buckets: usize) -> Vec<f64> {
        let mut out = vec![0.0; buckets * self.dim];
        for (&b, g) in &self.rows {
            out[b * self.dim..(b + 1) * self.dim].copy_from_slice(g);
        }
        out
    }
}

/// Precomputed query embeddings looked up by exact query text.
#[derive(Debug, Clone, Default)]
pub struct FileEncoder {
    dim: usize,
    table: HashMap<String, Vec<f64>>,
}

impl FileEncoder {
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self, RetrievalError> {
        let mut table = HashMap::new();
        for (text, v) in entries {
            if v.len() != dim {
                return Err(RetrievalError::DimensionMismatch {
                    left: dim,
                    right: v.len(),
                });
            }
            table.insert(text, v);
        }
        Ok(FileEncoder { dim, table })
    }
}

impl QueryEncoder for FileEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>, RetrievalError> {
        self.table
            .get(text)
            .cloned()
            .ok_or_else(|| RetrievalError::UnknownQuery(text.to_string()))
    }
}
