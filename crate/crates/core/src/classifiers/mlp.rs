//! Two-layer sigmoid perceptron trained by online backpropagation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, epoch_order, one_hot, PixelClassifier, TrainingSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: usize,
    pub eta0: f64,
    /// Maximum epochs.
    pub max_iters: usize,
    /// Stop once the training MSE drops to this value.
    pub target_error: f64,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: 60,
            eta0: 0.2,
            max_iters: 1000,
            target_error: 0.05,
            seed: 0,
        }
    }
}

/// Weight rows carry their bias as the last entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub hidden: Vec<Vec<f64>>,
    pub output: Vec<Vec<f64>>,
}

/// Gradient of [`Mlp::loss`] with the same layout as the network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradient {
    pub hidden: Vec<Vec<f64>>,
    pub output: Vec<Vec<f64>>,
}

impl MlpGradient {
    pub fn flatten(&self) -> Vec<f64> {
        self.hidden
            .iter()
            .chain(&self.output)
            .flatten()
            .copied()
            .collect()
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn affine(row: &[f64], x: &[f64]) -> f64 {
    let (w, b) = row.split_at(row.len() - 1);
    w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b[0]
}

impl Mlp {
    /// Weights uniform in `[-0.5, 0.5]`.
    pub fn random<R: Rng + ?Sized>(
        inputs: usize,
        hidden: usize,
        outputs: usize,
        rng: &mut R,
    ) -> Self {
        let mut layer = |rows: usize, cols: usize| -> Vec<Vec<f64>> {
            (0..rows)
                .map(|_| (0..=cols).map(|_| rng.random::<f64>() - 0.5).collect())
                .collect()
        };
        let hidden_w = layer(hidden, inputs);
        let output_w = layer(outputs, hidden);
        Mlp {
            hidden: hidden_w,
            output: output_w,
        }
    }

    /// Hidden activations and outputs.
    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h: Vec<f64> = self.hidden.iter().map(|r| sigmoid(affine(r, x))).collect();
        let y = self.output.iter().map(|r| sigmoid(affine(r, &h))).collect();
        (h, y)
    }

    pub fn outputs(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).1
    }

    /// `1/(2N) Σ ‖y - t‖²` over the given samples.
    pub fn loss(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
        let sum: f64 = inputs
            .iter()
            .zip(targets)
            .map(|(x, t)| {
                self.outputs(x)
                    .iter()
                    .zip(t)
                    .map(|(y, t)| (y - t) * (y - t))
                    .sum::<f64>()
            })
            .sum();
        sum / (2.0 * inputs.len() as f64)
    }

    /// Mean squared error per output unit.
    pub fn mse(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
        2.0 * self.loss(inputs, targets) / self.output.len() as f64
    }

    fn backprop(&self, x: &[f64], t: &[f64], grad: &mut MlpGradient, scale: f64) {
        let (h, y) = self.forward(x);
        let delta_out: Vec<f64> = y
            .iter()
            .zip(t)
            .map(|(y, t)| (y - t) * y * (1.0 - y))
            .collect();
        for (k, d) in delta_out.iter().enumerate() {
            let row = &mut grad.output[k];
            for (g, hj) in row.iter_mut().zip(&h) {
                *g += scale * d * hj;
            }
            *row.last_mut().unwrap() += scale * d;
        }
        for (j, hj) in h.iter().enumerate() {
            let back: f64 = delta_out
                .iter()
                .zip(&self.output)
                .map(|(d, r)| d * r[j])
                .sum();
            let d = back * hj * (1.0 - hj);
            let row = &mut grad.hidden[j];
            for (g, xi) in row.iter_mut().zip(x) {
                *g += scale * d * xi;
            }
            *row.last_mut().unwrap() += scale * d;
        }
    }

    fn zero_gradient(&self) -> MlpGradient {
        MlpGradient {
            hidden: self.hidden.iter().map(|r| vec![0.0; r.len()]).collect(),
            output: self.output.iter().map(|r| vec![0.0; r.len()]).collect(),
        }
    }

    /// Analytic gradient of [`Mlp::loss`].
    pub fn gradient(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> MlpGradient {
        let mut grad = self.zero_gradient();
        let scale = 1.0 / inputs.len() as f64;
        for (x, t) in inputs.iter().zip(targets) {
            self.backprop(x, t, &mut grad, scale);
        }
        grad
    }

    /// All weights, hidden layer first, in row order.
    pub fn parameters(&self) -> Vec<f64> {
        self.hidden
            .iter()
            .chain(&self.output)
            .flatten()
            .copied()
            .collect()
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.parameters().len() {
            return Err(Error::DimensionMismatch(
                "parameter count differs from network size".into(),
            ));
        }
        let mut it = values.iter();
        for w in self
            .hidden
            .iter_mut()
            .chain(self.output.iter_mut())
            .flatten()
        {
            *w = *it.next().unwrap();
        }
        Ok(())
    }

    fn apply(&mut self, grad: &MlpGradient, eta: f64) {
        for (rows, grows) in [
            (&mut self.hidden, &grad.hidden),
            (&mut self.output, &grad.output),
        ] {
            for (r, g) in rows.iter_mut().zip(grows) {
                for (w, d) in r.iter_mut().zip(g) {
                    *w -= eta * d;
                }
            }
        }
    }
}

impl PixelClassifier for Mlp {
    fn input_dim(&self) -> usize {
        self.hidden[0].len() - 1
    }
    fn class_count(&self) -> usize {
        self.output.len()
    }
    fn decide(&self, x: &[f64]) -> u32 {
        argmax(&self.outputs(x)) as u32
    }
}

/// Online backpropagation with a constant rate until the training MSE reaches
/// the target or `max_iters` epochs have run.
pub fn train_mlp(ts: &TrainingSet, params: &MlpParams) -> Result<Mlp> {
    if params.hidden == 0 {
        return Err(Error::InvalidParameter(
            "the hidden layer needs at least one unit".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut net = Mlp::random(ts.dim(), params.hidden, ts.class_count(), &mut rng);
    let targets: Vec<Vec<f64>> = ts
        .labels()
        .iter()
        .map(|&l| one_hot(l, ts.class_count()))
        .collect();
    let mut grad = net.zero_gradient();
    for _ in 0..params.max_iters {
        let mse = net.mse(ts.inputs(), &targets);
        if !mse.is_finite() {
            return Err(Error::Diverged("non-finite training error".into()));
        }
        if mse <= params.target_error {
            break;
        }
        for i in epoch_order(ts.len(), &mut rng) {
            for row in grad.hidden.iter_mut().chain(grad.output.iter_mut()) {
                row.iter_mut().for_each(|g| *g = 0.0);
            }
            net.backprop(&ts.inputs()[i], &targets[i], &mut grad, 1.0);
            net.apply(&grad, params.eta0);
        }
    }
    if !net.parameters().iter().all(|w| w.is_finite()) {
        return Err(Error::Diverged("non-finite training error".into()));
    }
    Ok(net)
}
