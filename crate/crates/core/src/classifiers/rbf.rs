//! Radial basis function network: k-means centers, Gaussian basis, linear
//! output layer trained by the delta rule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    argmax, epoch_order, linear_rate, nearest, one_hot, squared_distance, PixelClassifier,
    TrainingSet,
};
use crate::dialectics::initial_weights;
use crate::error::{Error, Result};

pub const MIN_WIDTH: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RbfParams {
    pub centers: usize,
    pub kmeans_iters: usize,
    pub eta0: f64,
    pub out_iters: usize,
    pub seed: u64,
}

impl Default for RbfParams {
    fn default() -> Self {
        RbfParams {
            centers: 18,
            kmeans_iters: 200,
            eta0: 0.1,
            out_iters: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rbf {
    pub centers: Vec<Vec<f64>>,
    pub widths: Vec<f64>,
    /// One row per class; the last entry is the bias.
    pub weights: Vec<Vec<f64>>,
}

impl Rbf {
    /// `exp(-‖x - c‖² / (2 σ²))` per center.
    pub fn basis(&self, x: &[f64]) -> Vec<f64> {
        self.centers
            .iter()
            .zip(&self.widths)
            .map(|(c, s)| (-squared_distance(c, x) / (2.0 * s * s)).exp())
            .collect()
    }

    fn outputs_from(&self, phi: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|r| r.iter().zip(phi).map(|(w, p)| w * p).sum::<f64>() + r[phi.len()])
            .collect()
    }

    pub fn outputs(&self, x: &[f64]) -> Vec<f64> {
        self.outputs_from(&self.basis(x))
    }
}

impl PixelClassifier for Rbf {
    fn input_dim(&self) -> usize {
        self.centers[0].len()
    }
    fn class_count(&self) -> usize {
        self.weights.len()
    }
    fn decide(&self, x: &[f64]) -> u32 {
        argmax(&self.outputs(x)) as u32
    }
}

fn assign(centers: &[Vec<f64>], data: &[Vec<f64>]) -> Vec<usize> {
    data.iter().map(|x| nearest(centers, x)).collect()
}

pub fn train_rbf(ts: &TrainingSet, params: &RbfParams) -> Result<Rbf> {
    let k = params.centers;
    if k == 0 || k > ts.len() {
        return Err(Error::InvalidParameter(format!(
            "center count {k} must lie in 1..={}",
            ts.len()
        )));
    }
    let data = ts.inputs();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut centers = initial_weights(data, k, &mut rng)?;
    let total = params.kmeans_iters * data.len();
    let mut step = 0;
    for _ in 0..params.kmeans_iters {
        for i in epoch_order(data.len(), &mut rng) {
            let eta = linear_rate(params.eta0, step, total);
            let w = nearest(&centers, &data[i]);
            for (c, xi) in centers[w].iter_mut().zip(&data[i]) {
                *c += eta * (xi - *c);
            }
            step += 1;
        }
    }

    let mut members = assign(&centers, data);
    let mut counts = vec![0usize; k];
    members.iter().for_each(|&m| counts[m] += 1);
    if counts.contains(&0) {
        for (c, n) in counts.iter().enumerate() {
            if *n == 0 {
                centers[c] = data[rng.random_range(0..data.len())].clone();
            }
        }
        members = assign(&centers, data);
    }
    let mut spread = vec![0.0; k];
    counts = vec![0; k];
    for (x, &m) in data.iter().zip(&members) {
        spread[m] += squared_distance(&centers[m], x).sqrt();
        counts[m] += 1;
    }
    let widths = spread
        .iter()
        .zip(&counts)
        .map(|(s, &n)| {
            if n == 0 {
                MIN_WIDTH
            } else {
                (s / n as f64).max(MIN_WIDTH)
            }
        })
        .collect();

    let m = ts.class_count();
    let mut net = Rbf {
        centers,
        widths,
        weights: vec![vec![0.0; k + 1]; m],
    };
    let features: Vec<Vec<f64>> = data.iter().map(|x| net.basis(x)).collect();
    let total = params.out_iters * data.len();
    let mut step = 0;
    for _ in 0..params.out_iters {
        for i in epoch_order(data.len(), &mut rng) {
            let eta = linear_rate(params.eta0, step, total);
            let phi = &features[i];
            let y = net.outputs_from(phi);
            let t = one_hot(ts.labels()[i], m);
            for ((row, yk), tk) in net.weights.iter_mut().zip(&y).zip(&t) {
                let err = tk - yk;
                for (w, p) in row.iter_mut().zip(phi) {
                    *w += eta * err * p;
                }
                row[k] += eta * err;
            }
            step += 1;
        }
    }
    if !net.weights.iter().flatten().all(|w| w.is_finite()) {
        return Err(Error::Diverged("non-finite training error".into()));
    }
    Ok(net)
}
