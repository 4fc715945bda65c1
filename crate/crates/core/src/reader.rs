//! Linear answer scorer over mean-pooled hashed embeddings of
//! `question [SEP] choice [SEP] fact [SEP] fact ...`.

use serde::{Deserialize, Serialize};

use crate::chains::ChainSet;
use crate::corpus::Corpus;
use crate::retriever::{dot, HashingEncoder, SEP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReaderInput {
    pub question: String,
    pub choice: String,
    pub context_facts: Vec<String>,
}

impl ReaderInput {
    /// Context is the choice's active facts in chain order, capped at
    /// `max_evidence`. Facts missing from the corpus are skipped.
    pub fn new(question: &str, choice: &str, chains: &ChainSet, corpus: &Corpus, max_evidence: usize) -> Self {
        let context_facts = chains
            .ordered_facts()
            .iter()
            .filter_map(|f| corpus.text(f))
            .take(max_evidence)
            .map(str::to_string)
            .collect();
        ReaderInput {
            question: question.to_string(),
            choice: choice.to_string(),
            context_facts,
        }
    }

    pub fn text(&self) -> String {
        let mut s = format!("{} {SEP} {}", self.question, self.choice);
        for f in &self.context_facts {
            s.push_str(&format!(" {SEP} {f}"));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReaderParams {
    pub weight: Vec<f64>,
    pub bias: f64,
}

impl ReaderParams {
    pub fn zeros(dim: usize) -> Self {
        ReaderParams {
            weight: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn apply(&mut self, grad: &ReaderParams, learning_rate: f64) {
        for (w, g) in self.weight.iter_mut().zip(&grad.weight) {
            *w -= learning_rate * g;
        }
        self.bias -= learning_rate * grad.bias;
    }

    fn add_scaled(&mut self, phi: &[f64], scale: f64) {
        for (w, x) in self.weight.iter_mut().zip(phi) {
            *w += scale * x;
        }
        self.bias += scale;
    }
}

pub fn features(input: &ReaderInput, encoder: &HashingEncoder) -> Vec<f64> {
    encoder.embed_text(&input.text())
}

pub fn score_features(phi: &[f64], params: &ReaderParams) -> f64 {
    dot(phi, &params.weight) + params.bias
}

pub fn score_choice(input: &ReaderInput, params: &ReaderParams, encoder: &HashingEncoder) -> f64 {
    score_features(&features(input, encoder), params)
}

/// Index of the highest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// Scores every choice with its own context and returns the argmax.
pub fn predict(inputs: &[ReaderInput], params: &ReaderParams, encoder: &HashingEncoder) -> (usize, Vec<f64>) {
    let scores: Vec<f64> = inputs.iter().map(|i| score_choice(i, params, encoder)).collect();
    (argmax(&scores), scores)
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

/// Cross-entropy `−log softmax(scores)[gold]`.
pub fn reader_loss(scores: &[f64], gold: usize) -> f64 {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
    lse - scores[gold]
}

/// Cross-entropy loss and its gradient for precomputed per-choice features.
pub fn reader_loss_grad(phis: &[Vec<f64>], params: &ReaderParams, gold: usize) -> (f64, ReaderParams) {
    let scores: Vec<f64> = phis.iter().map(|p| score_features(p, params)).collect();
    let probs = softmax(&scores);
    let mut grad = ReaderParams::zeros(params.weight.len());
    for (j, (phi, p)) in phis.iter().zip(&probs).enumerate() {
        grad.add_scaled(phi, p - if j == gold { 1.0 } else { 0.0 });
    }
    (reader_loss(&scores, gold), grad)
}

pub fn reward(pred: usize, gold: usize) -> f64 {
    if pred == gold {
        1.0
    } else {
        0.0
    }
}
