use std::collections::BTreeSet;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chains::ChainSet;
use crate::corpus::{Corpus, FactId};
use crate::error::{Error, Result};
use crate::losses::{
    batch_mean_reward, global_loss, local_mle_loss, rl_loss, supervised_loss, ChainLikelihoodInput, ChainSample,
    LossReport, ScoringContext,
};
use crate::reader::{features, predict, reader_loss_grad, reward, ReaderInput, ReaderParams};
use crate::retriever::{HashingEncoder, SparseGrad, VectorIndex};
use crate::semgraph::GraphConfig;

use super::config::{Mode, TrainConfig};
use super::data::{prepare, Prepared, QaInstance};
use super::eval::{evaluate_prepared, EvalRecord};
use super::pipeline::{run_all_choices, ChoiceRun, PipelineState};

/// Trainable parameters. The reader's own hashing encoder is fixed and
/// rebuilt from the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub encoder: HashingEncoder,
    pub reader: ReaderParams,
}

impl Model {
    /// The query encoder starts as the frozen encoder that produced the
    /// evidence vectors, optionally perturbed.
    pub fn init(cfg: &TrainConfig) -> Self {
        let mut encoder = HashingEncoder::seeded(cfg.buckets, cfg.dim, cfg.encoder_seed);
        encoder.perturb(cfg.init_noise, cfg.seed);
        Model {
            encoder,
            reader: ReaderParams::zeros(cfg.reader_dim),
        }
    }
}

pub fn reader_encoder(cfg: &TrainConfig) -> HashingEncoder {
    HashingEncoder::seeded(cfg.buckets, cfg.reader_dim, cfg.encoder_seed.wrapping_add(1))
}

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MetricsRecord {
    Step {
        epoch: usize,
        step: usize,
        mean_reward: f64,
        #[serde(flatten)]
        losses: LossReport,
    },
    Eval {
        epoch: usize,
        #[serde(flatten)]
        metrics: EvalRecord,
    },
}

pub struct TrainOutput {
    pub model: Model,
    pub log: Vec<MetricsRecord>,
}

/// Deterministic generator for a labelled sub-stream of the run seed.
pub(crate) fn rng_for(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        h = (h ^ p).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 31;
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// Up to `n` chains drawn uniformly without replacement, kept in chain-set
/// order.
pub fn sample_chains(cs: &ChainSet, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<FactId>> {
    if cs.chains.len() <= n {
        return cs.chains.iter().map(|c| c.facts.clone()).collect();
    }
    let mut picked = index::sample(rng, cs.chains.len(), n).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| cs.chains[i].facts.clone()).collect()
}

/// Per-step negatives: the step-`t` facts of the other chains, then random
/// facts from `pool` until there are `floor`. Facts of `own` never appear.
pub fn step_negatives(
    own: &[FactId],
    others: &[Vec<FactId>],
    pool: &BTreeSet<FactId>,
    index: &VectorIndex,
    floor: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<FactId>> {
    (0..own.len())
        .map(|t| {
            let mut set: BTreeSet<FactId> = others
                .iter()
                .filter_map(|c| c.get(t))
                .filter(|f| !own.contains(f) && index.contains(f))
                .cloned()
                .collect();
            if set.len() < floor {
                let mut extra: Vec<&FactId> = pool
                    .iter()
                    .filter(|f| !own.contains(f) && !set.contains(*f) && index.contains(f))
                    .collect();
                extra.shuffle(rng);
                let need = floor - set.len();
                set.extend(extra.into_iter().take(need).cloned());
            }
            set.into_iter().collect()
        })
        .collect()
}

fn reversed(chains: &[Vec<FactId>]) -> Vec<Vec<FactId>> {
    chains.iter().map(|c| c.iter().rev().cloned().collect()).collect()
}

/// Forward pass of one question under the current parameters.
struct Forward {
    runs: Vec<ChoiceRun>,
    phis: Vec<Vec<f64>>,
    reward: f64,
    sampled: Vec<Vec<FactId>>,
}

impl Forward {
    fn gold(&self, p: &Prepared) -> &ChoiceRun {
        &self.runs[p.inst.gold_idx]
    }
}

struct Ctx<'a> {
    cfg: &'a TrainConfig,
    state: PipelineState<'a>,
    reader_encoder: &'a HashingEncoder,
}

fn forward(ctx: &Ctx<'_>, model: &Model, p: &Prepared, rng: &mut ChaCha8Rng) -> Result<Forward> {
    let runs = run_all_choices(p, &ctx.state, &model.encoder)?;
    let inputs: Vec<ReaderInput> = runs
        .iter()
        .zip(&p.inst.choices)
        .map(|(r, c)| ReaderInput::new(&p.inst.question, c, &r.chains, ctx.state.corpus, ctx.cfg.max_evidence))
        .collect();
    let (pred, _) = predict(&inputs, &model.reader, ctx.reader_encoder);
    let phis = inputs.iter().map(|i| features(i, ctx.reader_encoder)).collect();
    let sampled = sample_chains(&runs[p.inst.gold_idx].chains, ctx.cfg.n_chains, rng);
    Ok(Forward {
        runs,
        phis,
        reward: reward(pred, p.inst.gold_idx),
        sampled,
    })
}

struct Backward {
    report: LossReport,
    encoder_grad: SparseGrad,
    reader_grad: ReaderParams,
}

#[allow(clippy::too_many_arguments)]
fn backward(
    ctx: &Ctx<'_>,
    model: &Model,
    p: &Prepared,
    fw: &Forward,
    others_fwd: &[Vec<FactId>],
    other_active: &[BTreeSet<FactId>],
    mean_reward: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Backward> {
    let cfg = ctx.cfg;
    let index = ctx.state.index;
    let scoring = ScoringContext::new(index, &model.encoder);
    let gold = fw.gold(p);
    let h_plus = gold.hypothesis.as_str();
    let pool = &gold.retrieval.pool.facts;
    let mut grad = SparseGrad::new(cfg.dim);

    let (l_reader, reader_grad) = reader_loss_grad(&fw.phis, &model.reader, p.inst.gold_idx);

    let mut l_sup = 0.0;
    if cfg.mode == Mode::SupervisedDistant {
        if let Some(chain) = p.inst.gold_chain.as_ref().filter(|c| !c.is_empty()) {
            let input = ChainLikelihoodInput {
                hypothesis: h_plus.to_string(),
                chain: chain.clone(),
                negatives_per_step: step_negatives(chain, others_fwd, pool, index, cfg.negatives_floor, rng),
            };
            l_sup = supervised_loss(&scoring, &input, Some(&mut grad))?;
        }
    }

    let others_bwd = reversed(others_fwd);
    let samples: Vec<ChainSample> = fw
        .sampled
        .iter()
        .map(|c| {
            let rev: Vec<FactId> = c.iter().rev().cloned().collect();
            ChainSample {
                chain: c.clone(),
                fwd_negatives: step_negatives(c, others_fwd, pool, index, cfg.negatives_floor, rng),
                bwd_negatives: step_negatives(&rev, &others_bwd, pool, index, cfg.negatives_floor, rng),
            }
        })
        .collect();

    let (mut l_fwd, mut l_bwd, mut l_rl, mut l_global) = (0.0, 0.0, 0.0, 0.0);
    if cfg.use_mle {
        let m = local_mle_loss(&scoring, &samples, h_plus, Some(&mut grad))?;
        l_fwd = m.fwd;
        l_bwd = m.bwd;
    }
    if cfg.use_rl {
        l_rl = rl_loss(&scoring, &samples, h_plus, fw.reward, mean_reward, Some(&mut grad))?;
    }
    if cfg.use_global {
        l_global = global_loss(&scoring, gold.active_facts(), h_plus, other_active, Some(&mut grad))?.value;
    }
    Ok(Backward {
        report: LossReport::new(l_reader, l_sup, l_fwd, l_bwd, l_rl, l_global),
        encoder_grad: grad,
        reader_grad,
    })
}

/// Instances as the trainer sees them: in distant-only mode annotations are
/// removed before anything else touches the data.
pub fn prepare_for_mode(data: &[QaInstance], corpus: &Corpus, mode: Mode) -> Result<Vec<Prepared>> {
    data.iter()
        .cloned()
        .map(|mut inst| {
            if mode == Mode::DistantOnly {
                inst.gold_chain = None;
            }
            prepare(inst, corpus)
        })
        .collect()
}

/// Mini-batch SGD on the combined objective. After every epoch the model is
/// evaluated on `dev` when given.
pub fn train(
    train_set: &[QaInstance],
    dev: Option<&[QaInstance]>,
    corpus: &Corpus,
    index: &VectorIndex,
    cfg: &TrainConfig,
) -> Result<TrainOutput> {
    cfg.validate()?;
    if index.dim() != cfg.dim {
        return Err(Error::Config(format!(
            "evidence vectors have dim {} but the encoder has {}",
            index.dim(),
            cfg.dim
        )));
    }
    let train_p = prepare_for_mode(train_set, corpus, cfg.mode)?;
    let dev_p = dev.map(|d| prepare_for_mode(d, corpus, cfg.mode)).transpose()?;
    if cfg.mode == Mode::SupervisedDistant && !train_p.iter().any(|p| p.inst.gold_chain.is_some()) {
        return Err(Error::Config(
            "supervised+distant mode needs annotated chains; use distant-only".into(),
        ));
    }
    let graph_cfg = GraphConfig::default();
    let reader_enc = reader_encoder(cfg);
    let ctx = Ctx {
        cfg,
        state: PipelineState {
            corpus,
            index,
            extra: None,
            retrieve: cfg.retrieve_config(),
            chains: cfg.chain_config(),
            graph: &graph_cfg,
        },
        reader_encoder: &reader_enc,
    };

    let mut model = Model::init(cfg);
    let mut log = Vec::new();
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train_p.len()).collect();
        order.shuffle(&mut rng_for(cfg.seed, &[epoch as u64, 0]));
        for batch in order.chunks(cfg.batch_size) {
            let snapshot = &model;
            let fws: Vec<Forward> = batch
                .par_iter()
                .map(|&i| forward(&ctx, snapshot, &train_p[i], &mut rng_for(cfg.seed, &[epoch as u64, 1, i as u64])))
                .collect::<Result<_>>()?;
            let rewards: Vec<f64> = fws.iter().map(|f| f.reward).collect();
            let mean_reward = batch_mean_reward(&rewards);
            let bws: Vec<Backward> = (0..batch.len())
                .into_par_iter()
                .map(|b| {
                    let p = &train_p[batch[b]];
                    let mut others_fwd = Vec::new();
                    let mut other_active = Vec::new();
                    for (o, fo) in fws.iter().enumerate() {
                        if o == b {
                            continue;
                        }
                        let po = &train_p[batch[o]];
                        others_fwd.extend(fo.sampled.iter().cloned());
                        if cfg.mode == Mode::SupervisedDistant {
                            others_fwd.extend(po.inst.gold_chain.iter().cloned());
                        }
                        other_active.push(fo.gold(po).active_facts().clone());
                    }
                    let mut rng = rng_for(cfg.seed, &[epoch as u64, 2, batch[b] as u64]);
                    backward(&ctx, snapshot, p, &fws[b], &others_fwd, &other_active, mean_reward, &mut rng)
                })
                .collect::<Result<_>>()?;

            let scale = 1.0 / batch.len() as f64;
            let mut enc_grad = SparseGrad::new(cfg.dim);
            let mut rd_grad = ReaderParams::zeros(cfg.reader_dim);
            for bw in &bws {
                enc_grad.add_scaled(&bw.encoder_grad, scale);
                for (g, x) in rd_grad.weight.iter_mut().zip(&bw.reader_grad.weight) {
                    *g += scale * x;
                }
                rd_grad.bias += scale * bw.reader_grad.bias;
            }
            model.encoder.apply(&enc_grad, cfg.learning_rate);
            model.reader.apply(&rd_grad, cfg.reader_learning_rate);

            let reports: Vec<LossReport> = bws.iter().map(|b| b.report).collect();
            log.push(MetricsRecord::Step {
                epoch,
                step,
                mean_reward,
                losses: LossReport::mean(&reports),
            });
            step += 1;
        }
        if let Some(dev_p) = &dev_p {
            let (metrics, _) = evaluate_prepared(dev_p, &model, &ctx.state, cfg)?;
            log.push(MetricsRecord::Eval { epoch, metrics });
        }
    }
    Ok(TrainOutput { model, log })
}

/// Metrics log as JSON lines.
pub fn log_to_jsonl(log: &[MetricsRecord]) -> String {
    let mut out = String::new();
    for r in log {
        out.push_str(&serde_json::to_string(r).expect("metrics serialize"));
        out.push('\n');
    }
    out
}
