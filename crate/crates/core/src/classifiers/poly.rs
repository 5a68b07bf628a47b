//! Polynomial network: a one-layer perceptron over monomial features.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, classify, epoch_order, one_hot, PixelClassifier, TrainingSet};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::image::MultispectralImage;
use crate::morphology::wang_fidelity;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolynomialParams {
    pub degree: usize,
    pub eta0: f64,
    pub max_iters: usize,
    pub target_error: f64,
    pub seed: u64,
}

impl Default for PolynomialParams {
    fn default() -> Self {
        PolynomialParams {
            degree: 2,
            eta0: 0.1,
            max_iters: 200,
            target_error: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialNet {
    pub degree: usize,
    /// One row of term coefficients per class.
    pub weights: Vec<Vec<f64>>,
}

/// Number of monomials of total degree at most `degree` in `n` variables.
pub fn term_count(n: usize, degree: usize) -> usize {
    (1..=degree).fold(1usize, |acc, k| acc * (n + k) / k)
}

/// Index tuples for every monomial, grouped by degree. Within a degree the pure
/// powers come first, then mixed products in lexicographic order.
fn monomials(n: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for d in 1..=degree {
        let mut combos = Vec::new();
        let mut idx = vec![0usize; d];
        loop {
            combos.push(idx.clone());
            let Some(pos) = (0..d).rev().find(|&p| idx[p] + 1 < n) else {
                break;
            };
            let v = idx[pos] + 1;
            idx[pos..].iter_mut().for_each(|i| *i = v);
        }
        let (pure, mixed): (Vec<_>, Vec<_>) = combos
            .into_iter()
            .partition(|c| c.iter().all(|&i| i == c[0]));
        out.extend(pure);
        out.extend(mixed);
    }
    out
}

/// `(1, x₁…xₙ, x₁²…xₙ², x₁x₂, x₁x₃, …)` up to `degree`.
pub fn expand_polynomial(x: &[f64], degree: usize) -> Vec<f64> {
    monomials(x.len(), degree)
        .iter()
        .map(|m| m.iter().map(|&i| x[i]).product())
        .collect()
}

impl PolynomialNet {
    pub fn outputs(&self, x: &[f64]) -> Vec<f64> {
        let phi = expand_polynomial(x, self.degree);
        self.weights
            .iter()
            .map(|r| r.iter().zip(&phi).map(|(w, p)| w * p).sum())
            .collect()
    }

    fn input_dim_from_terms(&self) -> usize {
        let terms = self.weights[0].len();
        (1..)
            .find(|&n| term_count(n, self.degree) >= terms)
            .unwrap()
    }
}

impl PixelClassifier for PolynomialNet {
    fn input_dim(&self) -> usize {
        self.input_dim_from_terms()
    }
    fn class_count(&self) -> usize {
        self.weights.len()
    }
    fn decide(&self, x: &[f64]) -> u32 {
        argmax(&self.outputs(x)) as u32
    }
}

/// Normalized delta rule from zero weights: each step moves the outputs by
/// `η (t - y)` along the feature vector scaled by its squared norm.
pub fn train_polynomial(ts: &TrainingSet, params: &PolynomialParams) -> Result<PolynomialNet> {
    if params.degree == 0 {
        return Err(Error::InvalidParameter(
            "polynomial degree must be at least 1".into(),
        ));
    }
    let m = ts.class_count();
    let features: Vec<Vec<f64>> = ts
        .inputs()
        .iter()
        .map(|x| expand_polynomial(x, params.degree))
        .collect();
    let norms: Vec<f64> = features
        .iter()
        .map(|p| p.iter().map(|v| v * v).sum())
        .collect();
    let targets: Vec<Vec<f64>> = ts.labels().iter().map(|&l| one_hot(l, m)).collect();
    let terms = features[0].len();
    let mut net = PolynomialNet {
        degree: params.degree,
        weights: vec![vec![0.0; terms]; m],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let out = |net: &PolynomialNet, phi: &[f64]| -> Vec<f64> {
        net.weights
            .iter()
            .map(|r| r.iter().zip(phi).map(|(w, p)| w * p).sum())
            .collect()
    };
    for _ in 0..params.max_iters {
        let sse: f64 = features
            .iter()
            .zip(&targets)
            .map(|(phi, t)| {
                out(&net, phi)
                    .iter()
                    .zip(t)
                    .map(|(y, t)| (y - t) * (y - t))
                    .sum::<f64>()
            })
            .sum();
        let mse = sse / (ts.len() * m) as f64;
        if !mse.is_finite() {
            return Err(Error::Diverged("non-finite training error".into()));
        }
        if mse <= params.target_error {
            break;
        }
        for i in epoch_order(ts.len(), &mut rng) {
            let phi = &features[i];
            let y = out(&net, phi);
            let rate = params.eta0 / norms[i];
            for ((row, yk), tk) in net.weights.iter_mut().zip(&y).zip(&targets[i]) {
                let err = rate * (tk - yk);
                for (w, p) in row.iter_mut().zip(phi) {
                    *w += err * p;
                }
            }
        }
    }
    Ok(net)
}

/// Raises the degree from 2 until two consecutive classifications of `image`
/// agree to at least `threshold` under Wang's index.
pub fn select_polynomial_degree(
    ts: &TrainingSet,
    image: &MultispectralImage,
    max_degree: usize,
    threshold: f64,
    params: &PolynomialParams,
) -> Result<usize> {
    if max_degree < 2 {
        return Err(Error::InvalidParameter(
            "max degree must be at least 2".into(),
        ));
    }
    let classify_at = |degree: usize| -> Result<_> {
        let net = train_polynomial(ts, &PolynomialParams { degree, ..*params })?;
        classify(&net, image, Execution::default())
    };
    let mut previous = classify_at(2)?;
    for d in 2..max_degree {
        let next = classify_at(d + 1)?;
        let q = if next.labels() == previous.labels() {
            1.0
        } else {
            match wang_fidelity(&previous.to_band(), &next.to_band()) {
                Ok(q) => q,
                Err(Error::Degenerate(_)) => 0.0,
                Err(e) => return Err(e),
            }
        };
        if q >= threshold {
            return Ok(d);
        }
        previous = next;
    }
    Ok(max_degree)
}
