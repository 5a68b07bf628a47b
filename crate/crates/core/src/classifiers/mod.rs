//! Reference classifiers: Kohonen SOM, LVQ, fuzzy c-means, multilayer
//! perceptron, RBF network and polynomial network.
//!
//! Every trainer is sequential and deterministic for a fixed seed; the
//! presentation order is reshuffled once per epoch from the run seed. Trained
//! models are immutable and classify pixels in parallel.

mod fcm;
mod lvq;
mod mlp;
mod poly;
mod rbf;
mod som;

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dialectics::DialecticalSystem;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::image::{LabelMap, MultispectralImage};

pub use fcm::{fcm_memberships, train_fcm, FcmParams, FuzzyCMeans};
pub use lvq::{train_lvq, Lvq, LvqParams};
pub use mlp::{train_mlp, Mlp, MlpGradient, MlpParams};
pub use poly::{
    expand_polynomial, select_polynomial_degree, term_count, train_polynomial, PolynomialNet,
    PolynomialParams,
};
pub use rbf::{train_rbf, Rbf, RbfParams};
pub use som::{train_som, Som, SomParams};

/// Labeled condition vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    inputs: Vec<Vec<f64>>,
    labels: Vec<u32>,
    class_count: usize,
}

impl TrainingSet {
    /// Every class in `0..class_count` must have at least one sample.
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<u32>, class_count: usize) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::EmptyData);
        }
        if inputs.len() != labels.len() {
            return Err(Error::DimensionMismatch(
                "one label per sample is required".into(),
            ));
        }
        let dim = inputs[0].len();
        if dim == 0 || inputs.iter().any(|x| x.len() != dim) {
            return Err(Error::DimensionMismatch(
                "samples must share one positive length".into(),
            ));
        }
        let mut seen = vec![false; class_count];
        for &l in &labels {
            *seen.get_mut(l as usize).ok_or_else(|| {
                Error::InvalidParameter(format!("label {l} not below class count {class_count}"))
            })? = true;
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(Error::EmptyClass(c));
        }
        Ok(TrainingSet {
            inputs,
            labels,
            class_count,
        })
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Writes `x1,...,xn,label` rows under a header line.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.dim()).map(|i| format!("x{i}")).collect();
        header.push("label".into());
        w.write_record(&header).map_err(csv_err)?;
        for (x, l) in self.inputs.iter().zip(&self.labels) {
            let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            rec.push(l.to_string());
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }

    /// Reads the format written by [`TrainingSet::write_csv`]; the class count is
    /// one past the largest label.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            let n = rec.len();
            if n < 2 {
                return Err(Error::InvalidParameter(
                    "a row needs features and a label".into(),
                ));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidParameter(format!("bad number {s:?}")))
            };
            inputs.push(
                rec.iter()
                    .take(n - 1)
                    .map(parse)
                    .collect::<Result<Vec<_>>>()?,
            );
            labels.push(
                rec[n - 1]
                    .trim()
                    .parse::<u32>()
                    .map_err(|_| Error::InvalidParameter(format!("bad label {:?}", &rec[n - 1])))?,
            );
        }
        let m = labels.iter().copied().max().map_or(0, |l| l as usize + 1);
        TrainingSet::new(inputs, labels, m)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidParameter(format!("csv: {e}"))
}

/// Samples up to `max_per_class` pixels of every class marked in `mask`.
/// Mask labels at or above `class_count` are ignored (outside every ROI).
pub fn roi_training_set(
    image: &MultispectralImage,
    mask: &LabelMap,
    class_count: usize,
    max_per_class: Option<usize>,
    seed: u64,
) -> Result<TrainingSet> {
    if image.grid() != mask.grid() {
        return Err(Error::DimensionMismatch(
            "mask and image must share one grid".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for class in 0..class_count as u32 {
        let mut pixels: Vec<usize> = (0..mask.labels().len())
            .filter(|&i| mask.labels()[i] == class)
            .collect();
        if let Some(cap) = max_per_class {
            if pixels.len() > cap {
                pixels.shuffle(&mut rng);
                pixels.truncate(cap);
                pixels.sort_unstable();
            }
        }
        for p in pixels {
            inputs.push(image.pixel(p));
            labels.push(class);
        }
    }
    TrainingSet::new(inputs, labels, class_count)
}

/// Anything that assigns a class to a condition vector.
pub trait PixelClassifier: Sync {
    fn input_dim(&self) -> usize;
    fn class_count(&self) -> usize;
    fn decide(&self, x: &[f64]) -> u32;
}

impl PixelClassifier for DialecticalSystem {
    fn input_dim(&self) -> usize {
        self.condition_dim()
    }
    fn class_count(&self) -> usize {
        self.pole_count()
    }
    fn decide(&self, x: &[f64]) -> u32 {
        self.winner(x) as u32
    }
}

/// Per-pixel decision over an image.
pub fn classify<C: PixelClassifier + ?Sized>(
    model: &C,
    image: &MultispectralImage,
    exec: Execution,
) -> Result<LabelMap> {
    let n = model.input_dim();
    if image.band_count() != n {
        return Err(Error::DimensionMismatch(format!(
            "image has {} bands, model expects {n}",
            image.band_count()
        )));
    }
    let labels = exec.map_range(image.pixel_count(), |u| {
        let mut x = vec![0.0; n];
        image.pixel_into(u, &mut x);
        model.decide(&x)
    });
    LabelMap::new(image.grid(), labels, model.class_count() as u32)
}

/// Index of the largest value; lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Index of the nearest prototype by Euclidean distance; lowest index on ties.
pub fn nearest(prototypes: &[Vec<f64>], x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in prototypes.iter().enumerate() {
        let d = squared_distance(p, x);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `η₀ (1 - step / total)`.
pub(crate) fn linear_rate(eta0: f64, step: usize, total: usize) -> f64 {
    eta0 * (1.0 - step as f64 / total.max(1) as f64)
}

pub(crate) fn check_vectors(data: &[Vec<f64>]) -> Result<usize> {
    let dim = data.first().ok_or(Error::EmptyData)?.len();
    if dim == 0 || data.iter().any(|x| x.len() != dim) {
        return Err(Error::DimensionMismatch(
            "vectors must share one positive length".into(),
        ));
    }
    Ok(dim)
}

/// Presentation order for one epoch.
pub(crate) fn epoch_order(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

pub(crate) fn one_hot(label: u32, m: usize) -> Vec<f64> {
    let mut t = vec![0.0; m];
    t[label as usize] = 1.0;
    t
}

/// Classifier trained from labeled samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SupervisedModel {
    Mlp(Mlp),
    Rbf(Rbf),
    Lvq(Lvq),
    #[serde(rename = "PO")]
    Polynomial(PolynomialNet),
}

impl SupervisedModel {
    fn inner(&self) -> &dyn PixelClassifier {
        match self {
            SupervisedModel::Mlp(m) => m,
            SupervisedModel::Rbf(m) => m,
            SupervisedModel::Lvq(m) => m,
            SupervisedModel::Polynomial(m) => m,
        }
    }
}

impl PixelClassifier for SupervisedModel {
    fn input_dim(&self) -> usize {
        self.inner().input_dim()
    }
    fn class_count(&self) -> usize {
        self.inner().class_count()
    }
    fn decide(&self, x: &[f64]) -> u32 {
        self.inner().decide(x)
    }
}

/// Clustering model whose outputs need post-labeling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum UnsupervisedModel {
    #[serde(rename = "KO")]
    Som(Som),
    #[serde(rename = "CM")]
    FuzzyCMeans(FuzzyCMeans),
}

impl UnsupervisedModel {
    fn inner(&self) -> &dyn PixelClassifier {
        match self {
            UnsupervisedModel::Som(m) => m,
            UnsupervisedModel::FuzzyCMeans(m) => m,
        }
    }
}

impl PixelClassifier for UnsupervisedModel {
    fn input_dim(&self) -> usize {
        self.inner().input_dim()
    }
    fn class_count(&self) -> usize {
        self.inner().class_count()
    }
    fn decide(&self, x: &[f64]) -> u32 {
        self.inner().decide(x)
    }
}

#[cfg(test)]
pub(crate) mod testdata {
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::TrainingSet;

    /// Gaussian-ish blobs around `centers`, `per` samples each, clamped to [0, 1].
    pub fn blobs(centers: &[Vec<f64>], per: usize, spread: f64, seed: u64) -> TrainingSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..per {
                inputs.push(
                    center
                        .iter()
                        .map(|v| (v + spread * (rng.random::<f64>() * 2.0 - 1.0)).clamp(0.0, 1.0))
                        .collect(),
                );
                labels.push(c as u32);
            }
        }
        TrainingSet::new(inputs, labels, centers.len()).unwrap()
    }

    pub fn accuracy<C: super::PixelClassifier>(model: &C, ts: &TrainingSet) -> f64 {
        let hits = ts
            .inputs()
            .iter()
            .zip(ts.labels())
            .filter(|(x, l)| model.decide(x) == **l)
            .count();
        hits as f64 / ts.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{Band, Grid};

    #[test]
    fn training_set_validation() {
        assert!(matches!(
            TrainingSet::new(vec![], vec![], 2),
            Err(Error::EmptyData)
        ));
        assert!(matches!(
            TrainingSet::new(vec![vec![0.0], vec![1.0]], vec![0, 0], 2),
            Err(Error::EmptyClass(1))
        ));
        assert!(TrainingSet::new(vec![vec![0.0], vec![1.0, 2.0]], vec![0, 1], 2).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let ts = TrainingSet::new(vec![vec![0.25, 0.5], vec![1.0, 0.0]], vec![1, 0], 2).unwrap();
        let mut buf = Vec::new();
        ts.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x1,x2,label\n0.25,0.5,1\n"));
        assert_eq!(TrainingSet::read_csv(&buf[..]).unwrap(), ts);
    }

    #[test]
    fn roi_extraction() {
        let g = Grid::new(4, 1).unwrap();
        let img = MultispectralImage::single(Band::new(g, vec![0.1, 0.2, 0.3, 0.4]).unwrap());
        let mask = LabelMap::new(g, vec![0, 255, 1, 0], 256).unwrap();
        let ts = roi_training_set(&img, &mask, 2, None, 0).unwrap();
        assert_eq!(ts.inputs(), &[vec![0.1], vec![0.4], vec![0.3]]);
        assert_eq!(ts.labels(), &[0, 0, 1]);
        let capped = roi_training_set(&img, &mask, 2, Some(1), 0).unwrap();
        assert_eq!(capped.len(), 2);
    }

    #[test]
    fn argmax_ties_lowest() {
        assert_eq!(argmax(&[0.2, 0.7, 0.7]), 1);
        assert_eq!(nearest(&[vec![0.0], vec![1.0]], &[0.5]), 0);
    }
}
