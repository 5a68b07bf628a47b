//! One-dimensional Kohonen self-organizing map.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_vectors, epoch_order, linear_rate, nearest, PixelClassifier};
use crate::dialectics::initial_weights;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SomParams {
    pub nodes: usize,
    /// Epochs over the data.
    pub iters: usize,
    pub eta0: f64,
    pub seed: u64,
}

impl Default for SomParams {
    fn default() -> Self {
        SomParams {
            nodes: 3,
            iters: 200,
            eta0: 0.1,
            seed: 0,
        }
    }
}

/// Chain of `m` prototypes; node `i` neighbors `i - 1` and `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Som {
    pub prototypes: Vec<Vec<f64>>,
}

impl PixelClassifier for Som {
    fn input_dim(&self) -> usize {
        self.prototypes[0].len()
    }
    fn class_count(&self) -> usize {
        self.prototypes.len()
    }
    fn decide(&self, x: &[f64]) -> u32 {
        nearest(&self.prototypes, x) as u32
    }
}

/// Winner-take-all with an immediate-neighbor update whose strength shrinks
/// linearly from 1 to 0 over the first half of training; η decays linearly.
pub fn train_som(data: &[Vec<f64>], params: &SomParams) -> Result<Som> {
    check_vectors(data)?;
    if params.nodes == 0 {
        return Err(Error::InvalidParameter(
            "a map needs at least one node".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut prototypes = initial_weights(data, params.nodes, &mut rng)?;
    let total = params.iters * data.len();
    let half = (total / 2).max(1);
    let mut step = 0;
    for _ in 0..params.iters {
        for i in epoch_order(data.len(), &mut rng) {
            let x = &data[i];
            let eta = linear_rate(params.eta0, step, total);
            let k = nearest(&prototypes, x);
            let reach = (1.0 - step as f64 / half as f64).max(0.0);
            let mut pull = |node: usize, rate: f64| {
                for (w, xi) in prototypes[node].iter_mut().zip(x) {
                    *w = (*w + rate * (xi - *w)).clamp(0.0, 1.0);
                }
            };
            pull(k, eta);
            if reach > 0.0 {
                if k > 0 {
                    pull(k - 1, eta * reach);
                }
                if k + 1 < params.nodes {
                    pull(k + 1, eta * reach);
                }
            }
            step += 1;
        }
    }
    Ok(Som { prototypes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn single_node_tracks_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<Vec<f64>> = (0..1000)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let som = train_som(
            &data,
            &SomParams {
                nodes: 1,
                seed: 1,
                ..SomParams::default()
            },
        )
        .unwrap();
        for d in 0..2 {
            let mean = data.iter().map(|x| x[d]).sum::<f64>() / data.len() as f64;
            assert!((som.prototypes[0][d] - mean).abs() < 0.05);
        }
    }

    #[test]
    fn two_clusters_two_nodes() {
        let mut data = vec![vec![0.1, 0.1]; 50];
        data.extend(vec![vec![0.9, 0.8]; 50]);
        for seed in 0..5 {
            let som = train_som(
                &data,
                &SomParams {
                    nodes: 2,
                    iters: 50,
                    seed,
                    ..SomParams::default()
                },
            )
            .unwrap();
            assert_ne!(som.decide(&[0.1, 0.1]), som.decide(&[0.9, 0.8]));
        }
    }

    #[test]
    fn zero_rate_keeps_initialization() {
        let data: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 20.0]).collect();
        let params = SomParams {
            nodes: 3,
            eta0: 0.0,
            iters: 10,
            seed: 9,
        };
        let som = train_som(&data, &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(som.prototypes, initial_weights(&data, 3, &mut rng).unwrap());
    }

    #[test]
    fn empty_data() {
        assert!(matches!(
            train_som(&[], &SomParams::default()),
            Err(Error::EmptyData)
        ));
    }
}
