//! Chain-aware retriever losses and their gradients with respect to the
//! query-encoder weights.
//!
//! Every score is `σ(q, e) = E_q(q) · v_e` with `v_e` fixed. A chain's
//! probability is the product over steps of a softmax of the step's positive
//! fact against its negatives, the query at each step being the hypothesis
//! with the previously visited facts appended. All products are accumulated
//! as log-sums with max-shifted log-sum-exp.
//!
//! Functions taking `grad: Option<&mut SparseGrad>` add the gradient of the
//! value they return.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::FactId;
use crate::retriever::{dot, HashingEncoder, SparseGrad, TokenBag, VectorIndex, SEP};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LossError {
    #[error("no embedding for fact {0}")]
    MissingEmbedding(FactId),
    #[error("chain is empty")]
    EmptyChain,
    #[error("chain has {chain} steps but {negatives} negative sets")]
    StepMismatch { chain: usize, negatives: usize },
    #[error("positive fact {0} also listed as its own negative")]
    PositiveInNegatives(FactId),
}

/// Parameter snapshot the losses are evaluated against.
#[derive(Clone, Copy)]
pub struct ScoringContext<'a> {
    pub index: &'a VectorIndex,
    pub encoder: &'a HashingEncoder,
}

impl<'a> ScoringContext<'a> {
    pub fn new(index: &'a VectorIndex, encoder: &'a HashingEncoder) -> Self {
        ScoringContext { index, encoder }
    }

    fn vector(&self, id: &FactId) -> Result<&'a [f64], LossError> {
        self.index
            .vector(id)
            .ok_or_else(|| LossError::MissingEmbedding(id.clone()))
    }

    fn text(&self, id: &FactId) -> Result<&'a str, LossError> {
        self.index
            .text(id)
            .ok_or_else(|| LossError::MissingEmbedding(id.clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

/// A chain scored against one hypothesis. `negatives_per_step[t]` holds the
/// negatives of the `t`-th step of whichever traversal is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainLikelihoodInput {
    pub hypothesis: String,
    pub chain: Vec<FactId>,
    pub negatives_per_step: Vec<Vec<FactId>>,
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Log-softmax of the positive among `[positive] ++ negatives`, adding
/// `scale * d/dM` to `grad`.
fn step_log_prob(
    ctx: &ScoringContext<'_>,
    bag: &TokenBag,
    positive: &FactId,
    negatives: &[FactId],
    grad: Option<&mut SparseGrad>,
    scale: f64,
) -> Result<f64, LossError> {
    let q = ctx.encoder.embed(bag);
    let mut vecs = Vec::with_capacity(negatives.len() + 1);
    vecs.push(ctx.vector(positive)?);
    for n in negatives {
        if n == positive {
            return Err(LossError::PositiveInNegatives(n.clone()));
        }
        vecs.push(ctx.vector(n)?);
    }
    let scores: Vec<f64> = vecs.iter().map(|v| dot(&q, v)).collect();
    let lse = log_sum_exp(&scores);
    if let Some(g) = grad {
        let mut dir = vecs[0].to_vec();
        for (v, s) in vecs.iter().zip(&scores) {
            let p = (s - lse).exp();
            for (d, x) in dir.iter_mut().zip(v.iter()) {
                *d -= p * x;
            }
        }
        g.add_bag(bag, &dir, scale);
    }
    Ok(scores[0] - lse)
}

/// Softmax over `[positive] ++ negatives` for one query.
pub fn step_distribution(
    ctx: &ScoringContext<'_>,
    query: &str,
    positive: &FactId,
    negatives: &[FactId],
) -> Result<Vec<f64>, LossError> {
    let q = ctx.encoder.embed_text(query);
    let mut scores = vec![dot(&q, ctx.vector(positive)?)];
    for n in negatives {
        scores.push(dot(&q, ctx.vector(n)?));
    }
    let lse = log_sum_exp(&scores);
    Ok(scores.iter().map(|s| (s - lse).exp()).collect())
}

fn traversal(chain: &[FactId], dir: Direction) -> Vec<&FactId> {
    match dir {
        Direction::Forward => chain.iter().collect(),
        Direction::Backward => chain.iter().rev().collect(),
    }
}

fn chain_log_prob_scaled(
    ctx: &ScoringContext<'_>,
    input: &ChainLikelihoodInput,
    dir: Direction,
    mut grad: Option<&mut SparseGrad>,
    scale: f64,
) -> Result<f64, LossError> {
    if input.chain.is_empty() {
        return Err(LossError::EmptyChain);
    }
    if input.negatives_per_step.len() != input.chain.len() {
        return Err(LossError::StepMismatch {
            chain: input.chain.len(),
            negatives: input.negatives_per_step.len(),
        });
    }
    let mut query = input.hypothesis.clone();
    let mut total = 0.0;
    for (t, fact) in traversal(&input.chain, dir).into_iter().enumerate() {
        let bag = ctx.encoder.bag(&query);
        total += step_log_prob(ctx, &bag, fact, &input.negatives_per_step[t], grad.as_deref_mut(), scale)?;
        query = format!("{query} {SEP} {}", ctx.text(fact)?);
    }
    Ok(total)
}

/// `log p(c | h)`: the sum over steps of `σ(q_t, e_t) − logsumexp` over the
/// step's candidates. Adds `d log p / dM` to `grad`.
pub fn chain_log_prob(
    ctx: &ScoringContext<'_>,
    input: &ChainLikelihoodInput,
    dir: Direction,
    grad: Option<&mut SparseGrad>,
) -> Result<f64, LossError> {
    chain_log_prob_scaled(ctx, input, dir, grad, 1.0)
}

/// `−log p(c⁺ | h⁺)` for an annotated chain, traversed forward.
pub fn supervised_loss(
    ctx: &ScoringContext<'_>,
    gold: &ChainLikelihoodInput,
    grad: Option<&mut SparseGrad>,
) -> Result<f64, LossError> {
    Ok(-chain_log_prob_scaled(ctx, gold, Direction::Forward, grad, -1.0)?)
}

/// A sampled chain with negatives for both traversals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSample {
    pub chain: Vec<FactId>,
    pub fwd_negatives: Vec<Vec<FactId>>,
    pub bwd_negatives: Vec<Vec<FactId>>,
}

impl ChainSample {
    pub fn input(&self, hypothesis: &str, dir: Direction) -> ChainLikelihoodInput {
        ChainLikelihoodInput {
            hypothesis: hypothesis.to_string(),
            chain: self.chain.clone(),
            negatives_per_step: match dir {
                Direction::Forward => self.fwd_negatives.clone(),
                Direction::Backward => self.bwd_negatives.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MleLoss {
    pub fwd: f64,
    pub bwd: f64,
    /// Set when there was no chain to learn from; both terms are then 0.
    pub no_chains: bool,
}

/// Bidirectional likelihood of the sampled chains:
/// `fwd = −(1/N) Σ log p(→c)`, `bwd = −(1/N) Σ log p(←c)`.
pub fn local_mle_loss(
    ctx: &ScoringContext<'_>,
    samples: &[ChainSample],
    h_plus: &str,
    mut grad: Option<&mut SparseGrad>,
) -> Result<MleLoss, LossError> {
    if samples.is_empty() {
        return Ok(MleLoss {
            no_chains: true,
            ..Default::default()
        });
    }
    let n = samples.len() as f64;
    let mut out = MleLoss::default();
    for s in samples {
        out.fwd -= chain_log_prob_scaled(ctx, &s.input(h_plus, Direction::Forward), Direction::Forward, grad.as_deref_mut(), -1.0 / n)? / n;
        out.bwd -= chain_log_prob_scaled(ctx, &s.input(h_plus, Direction::Backward), Direction::Backward, grad.as_deref_mut(), -1.0 / n)? / n;
    }
    Ok(out)
}

/// Policy-gradient term `−(1/N) Σ (r − r̄) [log p(→c) + log p(←c)]`. The
/// advantage is a constant; only the log-probabilities carry gradient.
pub fn rl_loss(
    ctx: &ScoringContext<'_>,
    samples: &[ChainSample],
    h_plus: &str,
    reward: f64,
    mean_reward: f64,
    mut grad: Option<&mut SparseGrad>,
) -> Result<f64, LossError> {
    let advantage = reward - mean_reward;
    if samples.is_empty() || advantage == 0.0 {
        return Ok(0.0);
    }
    let n = samples.len() as f64;
    let mut total = 0.0;
    for s in samples {
        let scale = -advantage / n;
        let f = chain_log_prob_scaled(ctx, &s.input(h_plus, Direction::Forward), Direction::Forward, grad.as_deref_mut(), scale)?;
        let b = chain_log_prob_scaled(ctx, &s.input(h_plus, Direction::Backward), Direction::Backward, grad.as_deref_mut(), scale)?;
        total -= advantage * (f + b) / n;
    }
    Ok(total)
}

/// Mean of the 0/1 rewards in a mini-batch.
pub fn batch_mean_reward(rewards: &[f64]) -> f64 {
    if rewards.is_empty() {
        0.0
    } else {
        rewards.iter().sum::<f64>() / rewards.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GlobalLoss {
    pub value: f64,
    /// Set when the active set was empty; the value is then 0.
    pub empty: bool,
}

fn mean_vector(ctx: &ScoringContext<'_>, facts: &BTreeSet<FactId>) -> Result<Vec<f64>, LossError> {
    let mut out = vec![0.0; ctx.index.dim()];
    for f in facts {
        for (o, x) in out.iter_mut().zip(ctx.vector(f)?) {
            *o += x;
        }
    }
    let n = facts.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    Ok(out)
}

/// Mean score of a fact set against a query, `(1/|E|) Σ σ(q, e)`.
pub fn mean_score(ctx: &ScoringContext<'_>, query: &str, facts: &BTreeSet<FactId>) -> Result<f64, LossError> {
    let q = ctx.encoder.embed_text(query);
    let mut total = 0.0;
    for f in facts {
        total += dot(&q, ctx.vector(f)?);
    }
    Ok(total / facts.len() as f64)
}

/// `−log ψ(Ê,h⁺) / (ψ(Ê,h⁺) + Σ_E ψ(E,h⁺))` with
/// `ψ(E,h) = exp(mean_{e∈E} σ(h,e))`, scored with the un-reformulated
/// hypothesis. Empty negative pools are skipped.
pub fn global_loss(
    ctx: &ScoringContext<'_>,
    active: &BTreeSet<FactId>,
    h_plus: &str,
    negative_pools: &[BTreeSet<FactId>],
    grad: Option<&mut SparseGrad>,
) -> Result<GlobalLoss, LossError> {
    if active.is_empty() {
        return Ok(GlobalLoss { value: 0.0, empty: true });
    }
    let bag = ctx.encoder.bag(h_plus);
    let q = ctx.encoder.embed(&bag);
    // mean of scores == score of the mean vector (bilinearity)
    let mut means = vec![mean_vector(ctx, active)?];
    for pool in negative_pools.iter().filter(|p| !p.is_empty()) {
        means.push(mean_vector(ctx, pool)?);
    }
    let logits: Vec<f64> = means.iter().map(|m| dot(&q, m)).collect();
    let lse = log_sum_exp(&logits);
    if let Some(g) = grad {
        let mut dir = vec![0.0; q.len()];
        for (j, (m, s)) in means.iter().zip(&logits).enumerate() {
            let coef = (s - lse).exp() - if j == 0 { 1.0 } else { 0.0 };
            for (d, x) in dir.iter_mut().zip(m) {
                *d += coef * x;
            }
        }
        g.add_bag(&bag, &dir, 1.0);
    }
    Ok(GlobalLoss {
        value: lse - logits[0],
        empty: false,
    })
}

/// Per-step loss breakdown. Absent terms are 0.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossReport {
    pub l_sup: f64,
    pub l_mle_fwd: f64,
    pub l_mle_bwd: f64,
    pub l_rl: f64,
    pub l_local: f64,
    pub l_global: f64,
    pub l_reader: f64,
    pub total: f64,
}

impl LossReport {
    pub fn new(l_reader: f64, l_sup: f64, l_mle_fwd: f64, l_mle_bwd: f64, l_rl: f64, l_global: f64) -> Self {
        let l_local = l_mle_fwd + l_mle_bwd + l_rl;
        LossReport {
            l_sup,
            l_mle_fwd,
            l_mle_bwd,
            l_rl,
            l_local,
            l_global,
            l_reader,
            total: l_reader + l_sup + l_local + l_global,
        }
    }

    /// Component-wise mean; the derived sums are recomputed from the means.
    pub fn mean(reports: &[LossReport]) -> LossReport {
        if reports.is_empty() {
            return LossReport::default();
        }
        let n = reports.len() as f64;
        let avg = |f: fn(&LossReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        LossReport::new(
            avg(|r| r.l_reader),
            avg(|r| r.l_sup),
            avg(|r| r.l_mle_fwd),
            avg(|r| r.l_mle_bwd),
            avg(|r| r.l_rl),
            avg(|r| r.l_global),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (VectorIndex, HashingEncoder) {
        let enc = HashingEncoder::seeded(64, 4, 11);
        let idx = VectorIndex::build(
            4,
            [
                ("a", [1.0, 0.0, 0.5, 0.0], "alpha fact"),
                ("b", [0.0, 1.0, 0.0, 0.2], "beta fact"),
                ("c", [0.3, 0.3, 0.3, 0.3], "gamma fact"),
                ("d", [1.0, 0.0, 0.5, 0.0], "delta fact"),
            ]
            .map(|(id, v, t)| (FactId::from(id), v.to_vec(), t.to_string())),
        )
        .unwrap();
        (idx, enc)
    }

    fn ids(v: &[&str]) -> Vec<FactId> {
        v.iter().map(|s| FactId::from(*s)).collect()
    }

    #[test]
    fn no_negatives_means_probability_one() {
        let (idx, enc) = setup();
        let ctx = ScoringContext::new(&idx, &enc);
        let input = ChainLikelihoodInput {
            hypothesis: "h".into(),
            chain: ids(&["a", "b"]),
            negatives_per_step: vec![vec![], vec![]],
        };
        assert_eq!(chain_log_prob(&ctx, &input, Direction::Forward, None).unwrap(), 0.0);
        assert_eq!(supervised_loss(&ctx, &input, None).unwrap(), 0.0);
    }

    #[test]
    fn equal_score_negative_halves() {
        let (idx, enc) = setup();
        let ctx = ScoringContext::new(&idx, &enc);
        // a and d share a vector
        let input = ChainLikelihoodInput {
            hypothesis: "some query".into(),
            chain: ids(&["a"]),
            negatives_per_step: vec![ids(&["d"])],
        };
        let lp = chain_log_prob(&ctx, &input, Direction::Forward, None).unwrap();
        assert!((lp - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn input_validation() {
        let (idx, enc) = setup();
        let ctx = ScoringContext::new(&idx, &enc);
        let mut input = ChainLikelihoodInput {
            hypothesis: "h".into(),
            chain: vec![],
            negatives_per_step: vec![],
        };
        assert_eq!(chain_log_prob(&ctx, &input, Direction::Forward, None), Err(LossError::EmptyChain));
        input.chain = ids(&["a"]);
        assert!(matches!(
            chain_log_prob(&ctx, &input, Direction::Forward, None),
            Err(LossError::StepMismatch { .. })
        ));
        input.negatives_per_step = vec![ids(&["a"])];
        assert!(matches!(
            chain_log_prob(&ctx, &input, Direction::Forward, None),
            Err(LossError::PositiveInNegatives(_))
        ));
        input.negatives_per_step = vec![ids(&["zz"])];
        assert_eq!(
            chain_log_prob(&ctx, &input, Direction::Forward, None),
            Err(LossError::MissingEmbedding("zz".into()))
        );
    }

    #[test]
    fn single_step_chain_is_direction_free() {
        let (idx, enc) = setup();
        let ctx = ScoringContext::new(&idx, &enc);
        let s = ChainSample {
            chain: ids(&["b"]),
            fwd_negatives: vec![ids(&["a", "c"])],
            bwd_negatives: vec![ids(&["a", "c"])],
        };
        let m = local_mle_loss(&ctx, &[s], "question text", None).unwrap();
        assert_eq!(m.fwd, m.bwd);
        assert!(m.fwd > 0.0);
        assert!(!m.no_chains);
        let none = local_mle_loss(&ctx, &[], "q", None).unwrap();
        assert_eq!((none.fwd, none.bwd, none.no_chains), (0.0, 0.0, true));
    }

    #[test]
    fn rl_zero_advantage_and_batch_mean() {
        let (idx, enc) = setup();
        let ctx = ScoringContext::new(&idx, &enc);
        assert_eq!(batch_mean_reward(&[1.0, 0.0, 1.0, 0.0]), 0.5);
        let s = ChainSample {
            chain: ids(&["a", "b"]),
            fwd_negatives: vec![ids(&["c"]), ids(&["c"])],
            bwd_negatives: vec![ids(&["c"]), ids(&["c"])],
        };
        let mut g = SparseGrad::new(4);
        assert_eq!(rl_loss(&ctx, std::slice::from_ref(&s), "q", 1.0, 1.0, Some(&mut g)).unwrap(), 0.0);
        assert!(g.rows().is_empty());
        assert_eq!(rl_loss(&ctx, &[], "q", 1.0, 0.0, None).unwrap(), 0.0);
        // positive advantage on a chain with log p < 0 gives a positive loss
        assert!(rl_loss(&ctx, &[s], "q", 1.0, 0.5, None).unwrap() > 0.0);
    }

    #[test]
    fn global_loss_cases() {
        let (idx, enc) = setup();
        let ctx = ScoringContext::new(&idx, &enc);
        let lone = global_loss(&ctx, &BTreeSet::from(["a".into()]), "h", &[], None).unwrap();
        assert_eq!(lone.value, 0.0);
        // {a} and {d} have identical mean vectors
        let sym = global_loss(
            &ctx,
            &BTreeSet::from(["a".into()]),
            "h",
            &[BTreeSet::from(["d".into()])],
            None,
        )
        .unwrap();
        assert!((sym.value - 2f64.ln()).abs() < 1e-15);
        let empty = global_loss(&ctx, &BTreeSet::new(), "h", &[], None).unwrap();
        assert!(empty.empty);
        assert_eq!(empty.value, 0.0);
    }

    #[test]
    fn report_sums() {
        let r = LossReport::new(0.5, 1.0, 0.25, 0.125, -0.0625, 2.0);
        assert_eq!(r.l_local, 0.25 + 0.125 - 0.0625);
        assert_eq!(r.total, 0.5 + 1.0 + r.l_local + 2.0);
        let m = LossReport::mean(&[r, LossReport::default()]);
        assert_eq!(m.l_sup, 0.5);
        assert_eq!(m.total, m.l_reader + m.l_sup + m.l_local + m.l_global);
    }
}
