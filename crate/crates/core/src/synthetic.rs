//! Synthetic multiple-choice benchmark with planted multi-hop chains.
//!
//! Every question reads "Which {verb} the {main} of {extra}?". The correct
//! choice is linked to `main` by a chain of two or three "x rel y" facts
//! through bridge concepts that appear nowhere else. Each fact has its own
//! relation word. Distractor choices,
//! `main` and `extra` each get a dead-end fact. Filler facts "the x verb y of z"
//! share "the", "of" and a question verb with many questions, so an untrained
//! query encoder is distracted by them.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Fact, FactId};
use crate::error::{DataError, Result};
use crate::retriever::embeddings::Embeddings;
use crate::retriever::{HashingEncoder, VectorIndex};
use crate::trainer::QaInstance;

/// Question verbs; fillers reuse them.
const VERBS: [(&str, &str); 16] = [
    ("absorbs", "absorb-01"),
    ("contains", "contain-01"),
    ("produces", "produce-01"),
    ("requires", "require-01"),
    ("reflects", "reflect-01"),
    ("becomes", "become-01"),
    ("supports", "support-01"),
    ("consumes", "consume-01"),
    ("protects", "protect-01"),
    ("attracts", "attract-01"),
    ("carries", "carry-01"),
    ("heats", "heat-01"),
    ("breaks", "break-01"),
    ("covers", "cover-01"),
    ("moves", "move-01"),
    ("stores", "store-01"),
];

const ONSETS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub questions: usize,
    pub choices: usize,
    pub dev_fraction: f64,
    /// Share of questions whose chain has three facts instead of two.
    pub three_hop_fraction: f64,
    pub fillers_per_question: usize,
    pub seed: u64,
    /// Settings of the fixed encoder that embeds the facts.
    pub buckets: usize,
    pub dim: usize,
    pub encoder_seed: u64,
    /// How far each chain fact's vector moves toward its chain neighbours.
    pub nudge: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            questions: 200,
            choices: 4,
            dev_fraction: 0.25,
            three_hop_fraction: 0.5,
            fillers_per_question: 1,
            seed: 7,
            buckets: 8192,
            dim: 256,
            encoder_seed: 0,
            nudge: 0.3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub facts: Vec<Fact>,
    pub embeddings: Embeddings,
    pub train: Vec<QaInstance>,
    pub dev: Vec<QaInstance>,
}

impl Benchmark {
    pub fn corpus(&self) -> Result<Corpus> {
        Ok(Corpus::new(self.facts.clone())?)
    }

    pub fn index(&self, corpus: &Corpus) -> Result<VectorIndex> {
        Ok(self.embeddings.to_index(corpus)?)
    }
}

struct Words {
    rng: ChaCha8Rng,
    used: BTreeSet<String>,
}

impl Words {
    fn fresh(&mut self) -> String {
        loop {
            let syllables = self.rng.gen_range(2..=3);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push(ONSETS[self.rng.gen_range(0..ONSETS.len())] as char);
                w.push(VOWELS[self.rng.gen_range(0..VOWELS.len())] as char);
            }
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }
}

struct Draft {
    text: String,
    amr: String,
}

fn relation(x: &str, rel: &str, y: &str) -> Draft {
    Draft {
        text: format!("{x} {rel} {y}"),
        amr: format!("(r / {rel}-01 :ARG0 (x / {x}) :ARG1 (y / {y}))"),
    }
}

fn filler(x: &str, verb: (&str, &str), y: &str, z: &str) -> Draft {
    Draft {
        text: format!("the {x} {} {y} of {z}", verb.0),
        amr: format!("(v / {} :ARG0 (x / {x}) :ARG1 (y / {y} :poss (z / {z})))", verb.1),
    }
}

fn hypothesis_amr(verb: &str, choice: &str, main: &str, extra: &str) -> String {
    format!("(v / {verb} :ARG0 (c / {choice}) :ARG1 (m / {main} :poss (e / {extra})))")
}

struct DraftQuestion {
    question: String,
    choices: Vec<String>,
    gold_idx: usize,
    hyp_amrs: Vec<String>,
    chain: Vec<usize>,
}

/// Builds the benchmark. The same config always yields the same output.
pub fn generate(cfg: &SyntheticConfig) -> Result<Benchmark> {
    if cfg.questions == 0 || cfg.choices < 2 || cfg.dim == 0 || cfg.buckets == 0 {
        return Err(DataError::Invalid("synthetic config needs questions, 2+ choices and a non-empty encoder".into()).into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut words = Words {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1)),
        used: BTreeSet::new(),
    };
    for (surface, _) in VERBS {
        words.used.insert(surface.to_string());
    }
    words.used.extend(["the", "of", "which", "sep"].map(String::from));

    let mut drafts: Vec<Draft> = Vec::new();
    let mut chain_links: Vec<(usize, usize)> = Vec::new();
    let mut questions = Vec::new();
    for _ in 0..cfg.questions {
        let verb = VERBS[rng.gen_range(0..VERBS.len())];
        let main = words.fresh();
        let extra = words.fresh();
        let answer = words.fresh();
        let distractors: Vec<String> = (1..cfg.choices).map(|_| words.fresh()).collect();

        let hops = if rng.gen_bool(cfg.three_hop_fraction) { 3 } else { 2 };
        let mut path = vec![main.clone()];
        for _ in 1..hops {
            path.push(words.fresh());
        }
        path.push(answer.clone());
        let mut chain = Vec::new();
        for w in path.windows(2) {
            let rel = words.fresh();
            chain.push(drafts.len());
            drafts.push(relation(&w[0], &rel, &w[1]));
        }
        for w in chain.windows(2) {
            chain_links.push((w[0], w[1]));
        }
        for end in distractors.iter().chain([&main, &extra]) {
            let (rel, sink) = (words.fresh(), words.fresh());
            drafts.push(relation(end, &rel, &sink));
        }
        for _ in 0..cfg.fillers_per_question {
            let fv = VERBS[rng.gen_range(0..VERBS.len())];
            let (x, y, z) = (words.fresh(), words.fresh(), words.fresh());
            drafts.push(filler(&x, fv, &y, &z));
        }

        let mut choices = distractors;
        let gold_idx = rng.gen_range(0..cfg.choices);
        choices.insert(gold_idx, answer);
        let hyp_amrs = choices
            .iter()
            .map(|c| hypothesis_amr(verb.1, c, &main, &extra))
            .collect();
        questions.push(DraftQuestion {
            question: format!("Which {} the {main} of {extra}?", verb.0),
            choices,
            gold_idx,
            hyp_amrs,
            chain,
        });
    }

    // ids follow a shuffled order so neighbouring ids carry no signal
    let mut order: Vec<usize> = (0..drafts.len()).collect();
    order.shuffle(&mut rng);
    let mut id_of = vec![FactId::new(""); drafts.len()];
    for (n, &d) in order.iter().enumerate() {
        id_of[d] = FactId::new(format!("f{n:05}"));
    }
    let facts: Vec<Fact> = order
        .iter()
        .map(|&d| Fact {
            id: id_of[d].clone(),
            text: drafts[d].text.clone(),
            amr: Some(drafts[d].amr.clone()),
        })
        .collect();

    let encoder = HashingEncoder::seeded(cfg.buckets, cfg.dim, cfg.encoder_seed);
    let base: Vec<Vec<f64>> = drafts.iter().map(|d| encoder.embed_text(&d.text)).collect();
    let mut vectors = base.clone();
    for &(a, b) in &chain_links {
        for k in 0..cfg.dim {
            vectors[a][k] += cfg.nudge * base[b][k];
            vectors[b][k] += cfg.nudge * base[a][k];
        }
    }
    let embeddings = Embeddings {
        dim: cfg.dim,
        records: order
            .iter()
            .map(|&d| {
                let v = vectors[d].iter().map(|&x| x as f32).collect();
                (id_of[d].as_str().to_string(), v)
            })
            .collect(),
    };

    let n_dev = ((cfg.questions as f64) * cfg.dev_fraction).round() as usize;
    let n_train = cfg.questions - n_dev.min(cfg.questions);
    let mut train = Vec::new();
    let mut dev = Vec::new();
    for (i, q) in questions.into_iter().enumerate() {
        let inst = QaInstance {
            id: format!("q{i:04}"),
            question: q.question,
            choices: q.choices,
            gold_idx: q.gold_idx,
            gold_chain: Some(q.chain.iter().map(|&d| id_of[d].clone()).collect()),
            hypothesis_amrs: q.hyp_amrs,
        };
        if i < n_train {
            train.push(inst);
        } else {
            dev.push(inst);
        }
    }
    Ok(Benchmark {
        facts,
        embeddings,
        train,
        dev,
    })
}
