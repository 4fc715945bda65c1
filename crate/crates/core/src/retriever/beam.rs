use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::FactId;

use super::index::{top_k, VectorIndex};
use super::{QueryEncoder, RetrievalError};

/// Separator placed between a query and an appended fact.
pub const SEP: &str = "[SEP]";

/// One beam: the query after `t - 1` picked facts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryState {
    pub t: usize,
    pub text: String,
    pub score_so_far: f64,
    pub picked: Vec<FactId>,
    /// Score of each picked fact against the query that retrieved it.
    pub step_scores: Vec<f64>,
}

impl QueryState {
    pub fn initial(hypothesis: &str) -> Self {
        QueryState {
            t: 1,
            text: hypothesis.to_string(),
            score_so_far: 0.0,
            picked: Vec::new(),
            step_scores: Vec::new(),
        }
    }

    fn last_score(&self) -> f64 {
        self.step_scores.last().copied().unwrap_or(0.0)
    }
}

/// Appends a fact to the query: `text [SEP] fact text`. Scores are left to
/// the caller.
pub fn reformulate(prev: &QueryState, fact: &FactId, index: &VectorIndex) -> Result<QueryState, RetrievalError> {
    let text = index
        .text(fact)
        .ok_or_else(|| RetrievalError::UnknownFact(fact.clone()))?;
    let mut picked = prev.picked.clone();
    picked.push(fact.clone());
    Ok(QueryState {
        t: prev.t + 1,
        text: format!("{} {SEP} {}", prev.text, text),
        score_so_far: prev.score_so_far,
        picked,
        step_scores: prev.step_scores.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BeamRanking {
    /// Sum of step scores along the beam.
    #[default]
    Cumulative,
    /// Score of the most recent step only.
    LastStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrieveConfig {
    pub k_beam: usize,
    pub t_max: usize,
    pub ranking: BeamRanking,
}

impl Default for RetrieveConfig {
    fn default() -> Self {
        RetrieveConfig {
            k_beam: 10,
            t_max: 2,
            ranking: BeamRanking::Cumulative,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidencePool {
    pub facts: BTreeSet<FactId>,
    pub per_iteration: Vec<BTreeSet<FactId>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retrieval {
    pub pool: EvidencePool,
    pub beams: Vec<QueryState>,
}

fn rank_key(s: &QueryState, ranking: BeamRanking) -> f64 {
    match ranking {
        BeamRanking::Cumulative => s.score_so_far,
        BeamRanking::LastStep => s.last_score(),
    }
}

fn keep_best(mut states: Vec<QueryState>, k: usize, ranking: BeamRanking) -> Vec<QueryState> {
    states.sort_by(|a, b| {
        rank_key(b, ranking)
            .total_cmp(&rank_key(a, ranking))
            .then_with(|| a.picked.cmp(&b.picked))
    });
    let mut seen = BTreeSet::new();
    states.retain(|s| seen.insert(s.picked.clone()));
    states.truncate(k);
    states
}

fn extend(
    prev: &QueryState,
    hits: Vec<(FactId, f64)>,
    index: &VectorIndex,
) -> Result<Vec<QueryState>, RetrievalError> {
    hits.into_iter()
        .map(|(fact, s)| {
            let mut next = reformulate(prev, &fact, index)?;
            next.score_so_far += s;
            next.step_scores.push(s);
            Ok(next)
        })
        .collect()
}

/// Beam search over `t_max` retrieval steps.
///
/// Step 1 retrieves the top `k_beam` facts for the hypothesis (and the top
/// `k_beam` from `extra_first` when given). Each later step expands every
/// beam by its top `k_beam` facts not already on that beam and keeps the
/// best `k_beam` states overall; ties go to the lexicographically smaller
/// fact sequence. Every fact retrieved by any beam joins the pool. If a step
/// produces no expansion the previous beams are returned.
pub fn retrieve(
    hypothesis: &str,
    index: &VectorIndex,
    encoder: &dyn QueryEncoder,
    cfg: &RetrieveConfig,
    extra_first: Option<&VectorIndex>,
) -> Result<Retrieval, RetrievalError> {
    if cfg.k_beam == 0 || cfg.t_max == 0 {
        return Err(RetrievalError::BadBeamConfig);
    }
    if hypothesis.trim().is_empty() {
        return Err(RetrievalError::EmptyHypothesis);
    }
    if index.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    let k = cfg.k_beam;
    let start = QueryState::initial(hypothesis);
    let q = encoder.encode(hypothesis)?;
    let none = BTreeSet::new();

    let mut candidates = extend(&start, top_k(index, &q, k, &none)?, index)?;
    if let Some(extra) = extra_first {
        candidates.extend(extend(&start, top_k(extra, &q, k, &none)?, extra)?);
    }
    let mut pool = EvidencePool::default();
    pool.per_iteration
        .push(candidates.iter().map(|s| s.picked[0].clone()).collect());
    let mut beams = keep_best(candidates, k, cfg.ranking);

    for _ in 1..cfg.t_max {
        let expanded: Vec<Vec<QueryState>> = beams
            .par_iter()
            .map(|beam| {
                if beam.picked.iter().filter(|f| index.contains(f)).count() >= index.len() {
                    return Ok(Vec::new());
                }
                let q = encoder.encode(&beam.text)?;
                let exclude: BTreeSet<FactId> = beam.picked.iter().cloned().collect();
                extend(beam, top_k(index, &q, k, &exclude)?, index)
            })
            .collect::<Result<_, _>>()?;
        let children: Vec<QueryState> = expanded.into_iter().flatten().collect();
        if children.is_empty() {
            break;
        }
        pool.per_iteration
            .push(children.iter().map(|s| s.picked.last().unwrap().clone()).collect());
        beams = keep_best(children, k, cfg.ranking);
    }
    pool.facts = pool.per_iteration.iter().flatten().cloned().collect();
    Ok(Retrieval { pool, beams })
}
