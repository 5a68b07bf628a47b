//! Learning vector quantization (LVQ1) with one codebook per class.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{epoch_order, linear_rate, nearest, squared_distance, PixelClassifier, TrainingSet};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LvqParams {
    pub iters: usize,
    pub eta0: f64,
    pub seed: u64,
}

impl Default for LvqParams {
    fn default() -> Self {
        LvqParams {
            iters: 200,
            eta0: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lvq {
    /// Codebook `c` represents class `c`.
    pub codebooks: Vec<Vec<f64>>,
}

impl Lvq {
    /// Negative squared distance to every class codebook.
    pub fn discriminants(&self, x: &[f64]) -> Vec<f64> {
        self.codebooks
            .iter()
            .map(|c| -squared_distance(c, x))
            .collect()
    }

    /// One LVQ1 update: the nearest codebook moves toward `x` when its class
    /// matches `label` and away from it otherwise. Returns the winner.
    pub fn step(&mut self, x: &[f64], label: u32, eta: f64) -> usize {
        let k = nearest(&self.codebooks, x);
        let sign = if k as u32 == label { 1.0 } else { -1.0 };
        for (w, xi) in self.codebooks[k].iter_mut().zip(x) {
            *w = (*w + sign * eta * (xi - *w)).clamp(0.0, 1.0);
        }
        k
    }
}

impl PixelClassifier for Lvq {
    fn input_dim(&self) -> usize {
        self.codebooks[0].len()
    }
    fn class_count(&self) -> usize {
        self.codebooks.len()
    }
    fn decide(&self, x: &[f64]) -> u32 {
        nearest(&self.codebooks, x) as u32
    }
}

/// Codebooks start at the class means and are refined with LVQ1 under a
/// linearly decaying rate.
pub fn train_lvq(ts: &TrainingSet, params: &LvqParams) -> Result<Lvq> {
    let m = ts.class_count();
    let dim = ts.dim();
    let mut sums = vec![vec![0.0; dim]; m];
    let mut counts = vec![0usize; m];
    for (x, &l) in ts.inputs().iter().zip(ts.labels()) {
        counts[l as usize] += 1;
        for (s, v) in sums[l as usize].iter_mut().zip(x) {
            *s += v;
        }
    }
    let codebooks = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &c)| s.into_iter().map(|v| v / c as f64).collect())
        .collect();
    let mut model = Lvq { codebooks };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let total = params.iters * ts.len();
    let mut step = 0;
    for _ in 0..params.iters {
        for i in epoch_order(ts.len(), &mut rng) {
            let eta = linear_rate(params.eta0, step, total);
            model.step(&ts.inputs()[i], ts.labels()[i], eta);
            step += 1;
        }
    }
    Ok(model)
}
