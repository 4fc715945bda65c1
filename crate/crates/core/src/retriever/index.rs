use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use crate::corpus::FactId;

use super::RetrievalError;

/// Immutable fact-id → (vector, text) store with exact inner-product search.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dim: usize,
    ids: Vec<FactId>,
    texts: Vec<String>,
    // row-major, one row of `dim` values per entry
    data: Vec<f64>,
    pos: HashMap<FactId, usize>,
}

impl VectorIndex {
    pub fn build<I>(dim: usize, entries: I) -> Result<Self, RetrievalError>
    where
        I: IntoIterator<Item = (FactId, Vec<f64>, String)>,
    {
        let mut idx = VectorIndex {
            dim,
            ids: Vec::new(),
            texts: Vec::new(),
            data: Vec::new(),
            pos: HashMap::new(),
        };
        for (id, v, text) in entries {
            if v.len() != dim {
                return Err(RetrievalError::DimensionMismatch {
                    left: dim,
                    right: v.len(),
                });
            }
            if idx.pos.insert(id.clone(), idx.ids.len()).is_some() {
                return Err(RetrievalError::DuplicateFact(id));
            }
            idx.ids.push(id);
            idx.texts.push(text);
            idx.data.extend_from_slice(&v);
        }
        Ok(idx)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[FactId] {
        &self.ids
    }

    pub fn contains(&self, id: &FactId) -> bool {
        self.pos.contains_key(id)
    }

    pub fn vector(&self, id: &FactId) -> Option<&[f64]> {
        self.pos.get(id).map(|&i| self.row(i))
    }

    pub fn text(&self, id: &FactId) -> Option<&str> {
        self.pos.get(id).map(|&i| self.texts[i].as_str())
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FactId, &[f64], &str)> {
        (0..self.len()).map(move |i| (&self.ids[i], self.row(i), self.texts[i].as_str()))
    }
}

/// Inner product of a query and a fact vector.
pub fn score(query: &[f64], fact: &[f64]) -> Result<f64, RetrievalError> {
    if query.len() != fact.len() {
        return Err(RetrievalError::DimensionMismatch {
            left: query.len(),
            right: fact.len(),
        });
    }
    Ok(dot(query, fact))
}

/// Inner product with eight independent partial sums, so the loop
/// vectorises; the summation order is fixed, so results are reproducible.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        let x: &[f64; 8] = x.try_into().expect("chunk of 8");
        let y: &[f64; 8] = y.try_into().expect("chunk of 8");
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Exact top-`k` by inner product, best first; ties go to the smaller fact
/// id. Excluded ids are never returned.
pub fn top_k(
    index: &VectorIndex,
    query: &[f64],
    k: usize,
    exclude: &BTreeSet<FactId>,
) -> Result<Vec<(FactId, f64)>, RetrievalError> {
    if query.len() != index.dim {
        return Err(RetrievalError::DimensionMismatch {
            left: index.dim,
            right: query.len(),
        });
    }
    let mut scored: Vec<(usize, f64)> = (0..index.len())
        .filter(|&i| !exclude.contains(&index.ids[i]))
        .map(|i| (i, dot(query, index.row(i))))
        .collect();
    let cmp = |a: &(usize, f64), b: &(usize, f64)| -> Ordering {
        b.1.total_cmp(&a.1).then_with(|| index.ids[a.0].cmp(&index.ids[b.0]))
    };
    if k < scored.len() {
        scored.select_nth_unstable_by(k, cmp);
        scored.truncate(k);
    }
    scored.sort_by(cmp);
    Ok(scored
        .into_iter()
        .map(|(i, s)| (index.ids[i].clone(), s))
        .collect())
}
