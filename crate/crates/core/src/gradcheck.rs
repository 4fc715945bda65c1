//! Central finite-difference checks of analytic encoder gradients.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::retriever::{HashingEncoder, SparseGrad};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coords: Vec<usize>,
}

/// `|a − n| / max(|a|, |n|, 1e-6)`; the floor keeps near-zero gradients from
/// being judged on round-off.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Picks `n` coordinates, those with a nonzero analytic gradient first, in a
/// seeded random order. Returns fewer when there are fewer coordinates.
pub fn select_coords(analytic: &[f64], n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut nonzero, mut zero): (Vec<usize>, Vec<usize>) =
        (0..analytic.len()).partition(|&i| analytic[i] != 0.0);
    nonzero.shuffle(&mut rng);
    zero.shuffle(&mut rng);
    nonzero.into_iter().chain(zero).take(n).collect()
}

/// Compares `analytic` against `(f(θ+ε) − f(θ−ε)) / 2ε` at `coords`.
pub fn check_coords<F>(mut loss: F, params: &mut [f64], analytic: &[f64], eps: f64, coords: &[usize]) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let mut worst: f64 = 0.0;
    for &i in coords {
        let orig = params[i];
        params[i] = orig + eps;
        let up = loss(params);
        params[i] = orig - eps;
        let down = loss(params);
        params[i] = orig;
        worst = worst.max(rel_error(analytic[i], (up - down) / (2.0 * eps)));
    }
    worst
}

/// Checks a loss over encoder weights. `loss` must return its value and add
/// its gradient when given a buffer.
pub fn grad_check<F>(loss: F, params: &HashingEncoder, eps: f64, n_coords: usize, seed: u64) -> GradCheckReport
where
    F: Fn(&HashingEncoder, Option<&mut SparseGrad>) -> f64,
{
    let dim = params.weights().len() / params.buckets().max(1);
    let mut g = SparseGrad::new(dim);
    loss(params, Some(&mut g));
    let analytic = g.to_dense(params.buckets());
    let coords = select_coords(&analytic, n_coords, seed);
    let mut work = params.clone();
    let mut weights = params.weights().to_vec();
    let max_rel_error = check_coords(
        |w| {
            work.weights_mut().copy_from_slice(w);
            loss(&work, None)
        },
        &mut weights,
        &analytic,
        eps,
        &coords,
    );
    GradCheckReport { max_rel_error, coords }
}
