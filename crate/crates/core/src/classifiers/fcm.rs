//! Online fuzzy c-means map.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_vectors, epoch_order, linear_rate, nearest, squared_distance, PixelClassifier};
use crate::dialectics::initial_weights;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FcmParams {
    pub clusters: usize,
    pub iters: usize,
    pub eta0: f64,
    pub fuzzifier: f64,
    pub seed: u64,
}

impl Default for FcmParams {
    fn default() -> Self {
        FcmParams {
            clusters: 3,
            iters: 200,
            eta0: 0.1,
            fuzzifier: 2.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyCMeans {
    pub centers: Vec<Vec<f64>>,
    pub fuzzifier: f64,
}

/// Fuzzy memberships `u_k = 1 / Σ_j (d_k / d_j)^(2/(q-1))`. A point on a center
/// belongs fully to the lowest-indexed such center.
pub fn fcm_memberships(centers: &[Vec<f64>], x: &[f64], fuzzifier: f64, out: &mut [f64]) {
    for (o, c) in out.iter_mut().zip(centers) {
        *o = squared_distance(c, x);
    }
    if let Some(hit) = out.iter().position(|d| *d == 0.0) {
        out.iter_mut().for_each(|o| *o = 0.0);
        out[hit] = 1.0;
        return;
    }
    // squared distances, so the exponent on d² is 1/(q-1)
    let p = 1.0 / (fuzzifier - 1.0);
    if p == 1.0 {
        let inv_sum: f64 = out.iter().map(|d| 1.0 / d).sum();
        out.iter_mut().for_each(|o| *o = 1.0 / (*o * inv_sum));
    } else {
        let inv_sum: f64 = out.iter().map(|d| d.powf(-p)).sum();
        out.iter_mut().for_each(|o| *o = o.powf(-p) / inv_sum);
    }
}

impl FuzzyCMeans {
    pub fn memberships(&self, x: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.centers.len()];
        fcm_memberships(&self.centers, x, self.fuzzifier, &mut u);
        u
    }
}

impl PixelClassifier for FuzzyCMeans {
    fn input_dim(&self) -> usize {
        self.centers[0].len()
    }
    fn class_count(&self) -> usize {
        self.centers.len()
    }
    /// Maximum membership, which is the nearest center.
    fn decide(&self, x: &[f64]) -> u32 {
        nearest(&self.centers, x) as u32
    }
}

/// Every center moves by `η u_k^q (x - c_k)` for each presented sample.
pub fn train_fcm(data: &[Vec<f64>], params: &FcmParams) -> Result<FuzzyCMeans> {
    check_vectors(data)?;
    if params.clusters < 2 {
        return Err(Error::InvalidParameter(
            "fuzzy c-means needs at least two clusters".into(),
        ));
    }
    if !(params.fuzzifier > 1.0) {
        return Err(Error::InvalidParameter("fuzzifier must exceed 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut centers = initial_weights(data, params.clusters, &mut rng)?;
    let total = params.iters * data.len();
    let mut u = vec![0.0; params.clusters];
    let mut step = 0;
    for _ in 0..params.iters {
        for i in epoch_order(data.len(), &mut rng) {
            let x = &data[i];
            let eta = linear_rate(params.eta0, step, total);
            fcm_memberships(&centers, x, params.fuzzifier, &mut u);
            for (c, uk) in centers.iter_mut().zip(&u) {
                let rate = eta * uk.powf(params.fuzzifier);
                for (w, xi) in c.iter_mut().zip(x) {
                    *w += rate * (xi - *w);
                }
            }
            step += 1;
        }
    }
    Ok(FuzzyCMeans {
        centers,
        fuzzifier: params.fuzzifier,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn point_on_center() {
        let m = FuzzyCMeans {
            centers: vec![vec![0.1, 0.1], vec![0.5, 0.5]],
            fuzzifier: 2.0,
        };
        assert_eq!(m.memberships(&[0.5, 0.5]), vec![0.0, 1.0]);
    }

    #[test]
    fn symmetric_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut data = Vec::new();
        for _ in 0..200 {
            let j = (rng.random::<f64>() - 0.5) * 0.1;
            data.push(vec![0.25 + j, 0.5]);
            data.push(vec![0.75 - j, 0.5]);
        }
        let m = train_fcm(
            &data,
            &FcmParams {
                clusters: 2,
                iters: 50,
                seed: 2,
                ..FcmParams::default()
            },
        )
        .unwrap();
        let mid = (m.centers[0][0] + m.centers[1][0]) / 2.0;
        assert!((mid - 0.5).abs() < 0.02, "midpoint {mid}");
        assert!((m.centers[0][0] - m.centers[1][0]).abs() > 0.3);
    }

    #[test]
    fn preconditions() {
        assert!(train_fcm(&[], &FcmParams::default()).is_err());
        let data = vec![vec![0.5]];
        assert!(train_fcm(
            &data,
            &FcmParams {
                clusters: 1,
                ..FcmParams::default()
            }
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn memberships_sum_to_one(x in proptest::collection::vec(0.0f64..1.0, 3),
                                  centers in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 3), 2..7),
                                  q in 1.2f64..3.0) {
            let mut u = vec![0.0; centers.len()];
            fcm_memberships(&centers, &x, q, &mut u);
            prop_assert!((u.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
