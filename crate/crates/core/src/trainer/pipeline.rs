use std::collections::BTreeSet;

use serde::Serialize;

use crate::amr::AmrGraph;
use crate::chains::{generate_chains, ChainConfig, ChainSet};
use crate::corpus::{Corpus, FactId};
use crate::error::{Error, Result};
use crate::retriever::{retrieve, QueryEncoder, QueryState, RetrieveConfig, Retrieval, VectorIndex};
use crate::semgraph::{build_graph, GraphConfig, SemanticGraph};

use super::data::Prepared;
use super::hypothesis::make_hypothesis;

/// Read-only resources shared by every pipeline run.
#[derive(Clone, Copy)]
pub struct PipelineState<'a> {
    pub corpus: &'a Corpus,
    pub index: &'a VectorIndex,
    /// Extra index searched only on the first retrieval step.
    pub extra: Option<&'a VectorIndex>,
    pub retrieve: RetrieveConfig,
    pub chains: ChainConfig,
    pub graph: &'a GraphConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChoiceRun {
    pub hypothesis: String,
    pub retrieval: Retrieval,
    pub graph: SemanticGraph,
    pub chains: ChainSet,
}

impl ChoiceRun {
    pub fn active_facts(&self) -> &BTreeSet<FactId> {
        &self.chains.active_facts
    }

    pub fn beams(&self) -> &[QueryState] {
        &self.retrieval.beams
    }
}

/// Pool AMRs in fact-id order; facts without an AMR are left out of the
/// graph but stay in the pool.
fn pool_amrs<'c>(corpus: &'c Corpus, pool: &BTreeSet<FactId>) -> Vec<(FactId, &'c AmrGraph)> {
    pool.iter()
        .filter_map(|f| corpus.amr(f).map(|g| (f.clone(), g)))
        .collect()
}

/// Hypothesis, retrieval, semantic graph and chains for one choice.
pub fn run_pipeline(
    p: &Prepared,
    choice: usize,
    state: &PipelineState<'_>,
    encoder: &dyn QueryEncoder,
) -> Result<ChoiceRun> {
    let run = || -> Result<ChoiceRun> {
        let text = p
            .inst
            .choices
            .get(choice)
            .ok_or_else(|| Error::Config(format!("choice {choice} out of range")))?;
        let hypothesis = make_hypothesis(&p.inst.question, text);
        let retrieval = retrieve(&hypothesis, state.index, encoder, &state.retrieve, state.extra)?;
        let pool = pool_amrs(state.corpus, &retrieval.pool.facts);
        let graph = build_graph(&p.hyps, choice, &pool, state.graph)?;
        let chains = generate_chains(&graph, &state.chains);
        Ok(ChoiceRun {
            hypothesis,
            retrieval,
            graph,
            chains,
        })
    };
    run().map_err(|e| e.in_instance(&p.inst.id))
}

/// Runs every choice of a question.
pub fn run_all_choices(p: &Prepared, state: &PipelineState<'_>, encoder: &dyn QueryEncoder) -> Result<Vec<ChoiceRun>> {
    (0..p.inst.choices.len())
        .map(|j| run_pipeline(p, j, state, encoder))
        .collect()
}
