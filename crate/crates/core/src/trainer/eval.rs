use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chains::chain_length_histogram;
use crate::corpus::Corpus;
use crate::error::Result;
use crate::reader::{predict, ReaderInput};
use crate::retriever::VectorIndex;
use crate::semgraph::GraphConfig;

use super::config::TrainConfig;
use super::data::{prepare, Prepared, QaInstance};
use super::pipeline::{run_all_choices, PipelineState};
use super::train::{reader_encoder, Model};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub questions: usize,
    pub accuracy: f64,
    /// Share of annotated questions whose whole annotated chain lies in the
    /// correct choice's pool; absent when nothing is annotated.
    pub retrieval_accuracy: Option<f64>,
    /// Lengths of all chains generated for correct choices.
    pub chain_length_histogram: BTreeMap<usize, usize>,
    /// Accuracy grouped by the modal chain length of the correct choice
    /// (0 for no chain).
    pub accuracy_by_chain_length: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionOutcome {
    pub id: String,
    pub predicted: usize,
    pub gold: usize,
    pub scores: Vec<f64>,
    pub retrieval_hit: Option<bool>,
    pub modal_chain_length: usize,
    pub chain_lengths: BTreeMap<usize, usize>,
}

impl QuestionOutcome {
    pub fn correct(&self) -> bool {
        self.predicted == self.gold
    }
}

/// Aggregates per-question outcomes.
pub fn summarize(outcomes: &[QuestionOutcome]) -> EvalRecord {
    let n = outcomes.len();
    let ratio = |hits: usize, total: usize| if total == 0 { 0.0 } else { hits as f64 / total as f64 };
    let accuracy = ratio(outcomes.iter().filter(|o| o.correct()).count(), n);
    let annotated: Vec<bool> = outcomes.iter().filter_map(|o| o.retrieval_hit).collect();
    let retrieval_accuracy =
        (!annotated.is_empty()).then(|| ratio(annotated.iter().filter(|h| **h).count(), annotated.len()));
    let mut hist = BTreeMap::new();
    let mut by_len: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for o in outcomes {
        for (&len, &c) in &o.chain_lengths {
            *hist.entry(len).or_insert(0) += c;
        }
        let e = by_len.entry(o.modal_chain_length).or_insert((0, 0));
        e.0 += usize::from(o.correct());
        e.1 += 1;
    }
    EvalRecord {
        questions: n,
        accuracy,
        retrieval_accuracy,
        chain_length_histogram: hist,
        accuracy_by_chain_length: by_len.into_iter().map(|(k, (h, t))| (k, ratio(h, t))).collect(),
    }
}

fn outcome(p: &Prepared, model: &Model, state: &PipelineState<'_>, cfg: &TrainConfig) -> Result<QuestionOutcome> {
    let reader_enc = reader_encoder(cfg);
    let runs = run_all_choices(p, state, &model.encoder)?;
    let inputs: Vec<ReaderInput> = runs
        .iter()
        .zip(&p.inst.choices)
        .map(|(r, c)| ReaderInput::new(&p.inst.question, c, &r.chains, state.corpus, cfg.max_evidence))
        .collect();
    let (predicted, scores) = predict(&inputs, &model.reader, &reader_enc);
    let gold = &runs[p.inst.gold_idx];
    let hist = chain_length_histogram(&gold.chains);
    Ok(QuestionOutcome {
        id: p.inst.id.clone(),
        predicted,
        gold: p.inst.gold_idx,
        scores,
        retrieval_hit: p
            .inst
            .gold_chain
            .as_ref()
            .map(|c| c.iter().all(|f| gold.retrieval.pool.facts.contains(f))),
        modal_chain_length: hist.modal_length,
        chain_lengths: hist.counts,
    })
}

pub fn evaluate_prepared(
    data: &[Prepared],
    model: &Model,
    state: &PipelineState<'_>,
    cfg: &TrainConfig,
) -> Result<(EvalRecord, Vec<QuestionOutcome>)> {
    let outcomes: Vec<QuestionOutcome> = data
        .par_iter()
        .map(|p| outcome(p, model, state, cfg))
        .collect::<Result<_>>()?;
    Ok((summarize(&outcomes), outcomes))
}

/// Accuracy, retrieval accuracy and chain statistics of `model` on `data`.
pub fn evaluate(
    data: &[QaInstance],
    model: &Model,
    corpus: &Corpus,
    index: &VectorIndex,
    cfg: &TrainConfig,
) -> Result<(EvalRecord, Vec<QuestionOutcome>)> {
    let prepared = data
        .iter()
        .cloned()
        .map(|i| prepare(i, corpus))
        .collect::<Result<Vec<_>>>()?;
    let graph = GraphConfig::default();
    let state = PipelineState {
        corpus,
        index,
        extra: None,
        retrieve: cfg.retrieve_config(),
        chains: cfg.chain_config(),
        graph: &graph,
    };
    evaluate_prepared(&prepared, model, &state, cfg)
}
