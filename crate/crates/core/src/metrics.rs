//! Classification evaluation: confusion matrix, overall accuracy, κ,
//! volume fractions and the per-slice generalization index.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::LabelMap;

/// `t[i][j]` counts objects of true class `j` classified as class `i`
/// (rows = predicted, columns = truth).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    t: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_rows(t: Vec<Vec<u64>>) -> Result<Self> {
        let m = t.len();
        if m == 0 || t.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch(
                "confusion matrix must be square".into(),
            ));
        }
        Ok(ConfusionMatrix { t })
    }

    pub fn size(&self) -> usize {
        self.t.len()
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.t
    }

    pub fn total(&self) -> u64 {
        self.t.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.size()).map(|i| self.t[i][i]).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.t.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.size())
            .map(|j| self.t.iter().map(|r| r[j]).sum())
            .collect()
    }

    fn nonempty_total(&self) -> Result<f64> {
        match self.total() {
            0 => Err(Error::Degenerate("confusion matrix is empty".into())),
            n => Ok(n as f64),
        }
    }

    /// φ = trace / total.
    pub fn overall_accuracy(&self) -> Result<f64> {
        Ok(self.trace() as f64 / self.nonempty_total()?)
    }

    /// Chance agreement `ρ_z = Σ_i row_i · col_i / total²`.
    pub fn chance_agreement(&self) -> Result<f64> {
        let n = self.nonempty_total()?;
        let rz: f64 = self
            .row_sums()
            .iter()
            .zip(self.col_sums())
            .map(|(r, c)| *r as f64 * c as f64)
            .sum();
        Ok(rz / (n * n))
    }

    /// κ = (ρ_v - ρ_z) / (1 - ρ_z).
    pub fn kappa(&self) -> Result<f64> {
        let rv = self.overall_accuracy()?;
        let rz = self.chance_agreement()?;
        if rz >= 1.0 {
            return Err(Error::UndefinedKappa);
        }
        Ok((rv - rz) / (1.0 - rz))
    }
}

/// Tallies predicted against truth labels over `m` classes.
pub fn build_confusion(
    predicted: &LabelMap,
    truth: &LabelMap,
    m: usize,
) -> Result<ConfusionMatrix> {
    if predicted.grid() != truth.grid() {
        return Err(Error::DimensionMismatch(
            "predicted and truth maps must share one grid".into(),
        ));
    }
    let mut t = vec![vec![0u64; m]; m];
    for (&p, &q) in predicted.labels().iter().zip(truth.labels()) {
        let (p, q) = (p as usize, q as usize);
        if p >= m || q >= m {
            return Err(Error::InvalidParameter(format!(
                "label pair ({p}, {q}) not below class count {m}"
            )));
        }
        t[p][q] += 1;
    }
    ConfusionMatrix::from_rows(t)
}

/// Maps each predicted label to the truth label it overlaps most (lowest on ties).
/// This is mechanical post-labeling of unsupervised clusters.
pub fn majority_mapping(predicted: &LabelMap, truth: &LabelMap) -> Result<BTreeMap<u32, u32>> {
    if predicted.grid() != truth.grid() {
        return Err(Error::DimensionMismatch(
            "predicted and truth maps must share one grid".into(),
        ));
    }
    let rows = predicted.class_count() as usize;
    let cols = truth.class_count() as usize;
    let mut overlap = vec![vec![0u64; cols]; rows];
    for (&p, &q) in predicted.labels().iter().zip(truth.labels()) {
        overlap[p as usize][q as usize] += 1;
    }
    Ok((0..rows)
        .map(|p| {
            let best = (0..cols).fold(0, |b, q| if overlap[p][q] > overlap[p][b] { q } else { b });
            (p as u32, best as u32)
        })
        .collect())
}

/// Percentual class volumes and the fluid-matter ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeFractions {
    /// Percent of pixels per class; sums to 100.
    pub percent: Vec<f64>,
    pub fluid_percent: f64,
    pub matter_percent: f64,
    pub fluid_matter_ratio: f64,
}

/// Class volumes over one or more label maps. `fluid` and `matter` list the
/// labels that make up the fluid (V1) and matter (V2) compartments.
pub fn volume_fractions(
    maps: &[LabelMap],
    m: usize,
    fluid: &[u32],
    matter: &[u32],
) -> Result<VolumeFractions> {
    let mut counts = vec![0u64; m];
    for map in maps {
        for &l in map.labels() {
            let l = l as usize;
            if l >= m {
                return Err(Error::InvalidParameter(format!("label {l} not below {m}")));
            }
            counts[l] += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyData);
    }
    let percent: Vec<f64> = counts
        .iter()
        .map(|c| 100.0 * *c as f64 / total as f64)
        .collect();
    let sum_of = |labels: &[u32]| -> Result<f64> {
        labels
            .iter()
            .map(|&l| {
                percent
                    .get(l as usize)
                    .copied()
                    .ok_or_else(|| Error::InvalidParameter(format!("role label {l} not below {m}")))
            })
            .sum()
    };
    let fluid_percent = sum_of(fluid)?;
    let matter_percent = sum_of(matter)?;
    if matter_percent == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    Ok(VolumeFractions {
        fluid_matter_ratio: fluid_percent / matter_percent,
        percent,
        fluid_percent,
        matter_percent,
    })
}

/// Per-slice (φ, κ) scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceScores {
    pub phi: Vec<f64>,
    pub kappa: Vec<f64>,
}

/// Generalization index `1 - (κ_max - κ_min) / κ̄`, clamped to `[0, 1]`,
/// together with the raw range and mean it is built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Generalization {
    pub index: f64,
    pub kappa_range: f64,
    pub kappa_mean: f64,
}

pub fn generalization_index(scores: &SliceScores) -> Result<Generalization> {
    let k = &scores.kappa;
    if k.len() < 2 {
        return Err(Error::InvalidParameter(
            "generalization needs at least two slices".into(),
        ));
    }
    let mean = k.iter().sum::<f64>() / k.len() as f64;
    if !(mean > 0.0) {
        return Err(Error::Degenerate("mean kappa is not positive".into()));
    }
    let max = k.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = k.iter().copied().fold(f64::INFINITY, f64::min);
    let range = max - min;
    Ok(Generalization {
        index: (1.0 - range / mean).clamp(0.0, 1.0),
        kappa_range: range,
        kappa_mean: mean,
    })
}
