//! Objective dialectical classifier (ODC).
//!
//! Each class is a *pole* carrying a weight vector and a measure of force. A
//! historical phase presents the training data `phase_length` times; for every
//! condition vector the pole with the greatest anticontradiction wins, moves
//! toward the input and gains one unit of force. At the end of a phase a
//! revolutionary crisis eliminates weak poles, absorbs near-duplicates,
//! optionally synthesizes a pole from the most contradictory pair and
//! perturbs all weights with Gaussian noise.

use std::collections::{BTreeMap, HashSet};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::image::{LabelMap, MultispectralImage};

/// Similarity of a condition vector to a pole.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Anticontradiction {
    /// `g_i(x) = exp(-‖x - w_i‖)`.
    Gauss,
    /// `g_i(x) = (Σ_k ‖x - w_i‖² / ‖x - w_k‖²)^-1`, a fuzzy c-means membership.
    Ratio,
}

/// How the winning pole moves toward an input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum UpdateRule {
    /// `w += η (x - w)`
    Plain,
    /// `w += η g_k(x)² (x - w)`
    GSquared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    pub weights: Vec<f64>,
    pub force: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialecticalSystem {
    poles: Vec<Pole>,
    dim: usize,
    anticontradiction: Anticontradiction,
    update_rule: UpdateRule,
}

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl DialecticalSystem {
    pub fn new(
        poles: Vec<Pole>,
        anticontradiction: Anticontradiction,
        update_rule: UpdateRule,
    ) -> Result<Self> {
        let dim = poles
            .first()
            .ok_or_else(|| Error::InvalidParameter("a system needs at least one pole".into()))?
            .weights
            .len();
        if dim == 0 || poles.iter().any(|p| p.weights.len() != dim) {
            return Err(Error::DimensionMismatch(
                "all pole weight vectors must share one positive length".into(),
            ));
        }
        Ok(DialecticalSystem {
            poles,
            dim,
            anticontradiction,
            update_rule,
        })
    }

    /// System whose poles sit at `weights` with zero force.
    pub fn from_weights(
        weights: Vec<Vec<f64>>,
        anticontradiction: Anticontradiction,
        update_rule: UpdateRule,
    ) -> Result<Self> {
        let poles = weights
            .into_iter()
            .map(|weights| Pole {
                weights,
                force: 0.0,
            })
            .collect();
        Self::new(poles, anticontradiction, update_rule)
    }

    pub fn poles(&self) -> &[Pole] {
        &self.poles
    }

    pub fn pole_count(&self) -> usize {
        self.poles.len()
    }

    pub fn condition_dim(&self) -> usize {
        self.dim
    }

    pub fn anticontradiction_kind(&self) -> Anticontradiction {
        self.anticontradiction
    }

    pub fn update_rule(&self) -> UpdateRule {
        self.update_rule
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "condition vector has length {}, system expects {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Anticontradiction values of every pole at `x`, written into `out`.
    ///
    /// Under `Ratio`, an `x` that coincides with one or more poles gives 1 to
    /// the lowest-indexed coinciding pole and 0 to every other pole.
    pub fn anticontradictions_into(&self, x: &[f64], out: &mut [f64]) {
        match self.anticontradiction {
            Anticontradiction::Gauss => {
                for (o, p) in out.iter_mut().zip(&self.poles) {
                    *o = (-squared_distance(x, &p.weights).sqrt()).exp();
                }
            }
            Anticontradiction::Ratio => {
                for (o, p) in out.iter_mut().zip(&self.poles) {
                    *o = squared_distance(x, &p.weights);
                }
                if let Some(hit) = out.iter().position(|d| *d == 0.0) {
                    out.iter_mut().for_each(|o| *o = 0.0);
                    out[hit] = 1.0;
                    return;
                }
                let inv_sum: f64 = out.iter().map(|d| 1.0 / d).sum();
                for o in out.iter_mut() {
                    *o = (1.0 / (*o * inv_sum)).min(1.0);
                }
            }
        }
    }

    pub fn anticontradictions(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut out = vec![0.0; self.poles.len()];
        self.anticontradictions_into(x, &mut out);
        Ok(out)
    }

    /// `g_i(x)` for a single pole.
    pub fn anticontradiction(&self, i: usize, x: &[f64]) -> Result<f64> {
        if i >= self.poles.len() {
            return Err(Error::InvalidParameter(format!("no pole {i}")));
        }
        Ok(self.anticontradictions(x)?[i])
    }

    /// Index of the pole with the greatest anticontradiction, lowest index on ties.
    ///
    /// Both kinds are strictly decreasing in `‖x - w_i‖`, so this is the nearest
    /// pole; the distance comparison avoids ties introduced by rounding in `exp`.
    pub fn winner(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.poles.iter().enumerate() {
            let d = squared_distance(x, &p.weights);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn winner_index(&self, x: &[f64]) -> Result<usize> {
        self.check_dim(x)?;
        Ok(self.winner(x))
    }

    /// Moves the winner toward `x` by the configured rule and adds one unit of force.
    pub fn evolution_step(&mut self, x: &[f64], eta: f64) -> Result<usize> {
        self.check_dim(x)?;
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidParameter(format!("eta {eta} outside (0, 1]")));
        }
        Ok(self.step_unchecked(x, eta))
    }

    fn step_unchecked(&mut self, x: &[f64], eta: f64) -> usize {
        let k = self.winner(x);
        let factor = match self.update_rule {
            UpdateRule::Plain => eta,
            UpdateRule::GSquared => {
                let g = self.membership_of(k, x);
                eta * g * g
            }
        };
        let pole = &mut self.poles[k];
        for (w, xi) in pole.weights.iter_mut().zip(x) {
            *w = *w + factor * (xi - *w);
        }
        pole.force += 1.0;
        k
    }

    fn membership_of(&self, k: usize, x: &[f64]) -> f64 {
        match self.anticontradiction {
            Anticontradiction::Gauss => (-squared_distance(x, &self.poles[k].weights).sqrt()).exp(),
            Anticontradiction::Ratio => {
                let mut g = vec![0.0; self.poles.len()];
                self.anticontradictions_into(x, &mut g);
                g[k]
            }
        }
    }

    /// `f_i / max_j f_j`.
    pub fn normalized_forces(&self) -> Result<Vec<f64>> {
        let max = self.poles.iter().map(|p| p.force).fold(0.0, f64::max);
        if max <= 0.0 {
            return Err(Error::DegeneratePhase);
        }
        Ok(self.poles.iter().map(|p| p.force / max).collect())
    }

    /// `δ_{i,j} = 1 - g_i(w_j)`.
    pub fn contradiction(&self, i: usize, j: usize) -> Result<f64> {
        if i == j {
            return Err(Error::InvalidParameter(
                "contradiction needs two distinct poles".into(),
            ));
        }
        if i >= self.poles.len() || j >= self.poles.len() {
            return Err(Error::InvalidParameter(format!("no pole pair ({i}, {j})")));
        }
        Ok((1.0 - self.anticontradiction(i, &self.poles[j].weights)?).clamp(0.0, 1.0))
    }

    pub fn reset_forces(&mut self) {
        self.poles.iter_mut().for_each(|p| p.force = 0.0);
    }

    /// Structural part of a crisis: elimination, absorption and synthesis.
    /// Forces of the survivors are kept.
    pub fn qualitative_change(
        &self,
        cfg: &CrisisConfig,
    ) -> Result<(DialecticalSystem, CrisisReport)> {
        let n = self.poles.len();
        let forces = self.normalized_forces()?;
        let weak: Vec<bool> = forces.iter().map(|f| *f < cfg.f_min).collect();

        let mut absorbed = vec![false; n];
        for j in 1..n {
            for i in 0..j {
                if absorbed[i] || absorbed[j] {
                    continue;
                }
                if self.contradiction(i, j)? < cfg.delta_min {
                    absorbed[j] = true;
                }
            }
        }

        let mut keep: Vec<usize> = (0..n).filter(|&i| !weak[i] && !absorbed[i]).collect();
        let degenerate = keep.is_empty();
        if degenerate {
            let strongest = (0..n).fold(0, |best, i| {
                if self.poles[i].force > self.poles[best].force {
                    i
                } else {
                    best
                }
            });
            keep.push(strongest);
        }

        let mut poles: Vec<Pole> = keep.iter().map(|&i| self.poles[i].clone()).collect();
        let mut synthesized = None;
        if cfg.synthesis && poles.len() > cfg.target_poles && poles.len() >= 2 {
            let survivors = DialecticalSystem {
                poles: poles.clone(),
                ..self.clone()
            };
            let mut best: Option<(usize, usize, f64)> = None;
            for j in 1..poles.len() {
                for i in 0..j {
                    let d = survivors.contradiction(i, j)?;
                    if best.is_none_or(|(_, _, b)| d > b) {
                        best = Some((i, j, d));
                    }
                }
            }
            if let Some((i, j, _)) = best {
                // odd coordinates (1-based) from pole i, even from pole j
                let weights = (0..self.dim)
                    .map(|k| {
                        if k % 2 == 0 {
                            poles[i].weights[k]
                        } else {
                            poles[j].weights[k]
                        }
                    })
                    .collect();
                poles.push(Pole {
                    weights,
                    force: 0.0,
                });
                synthesized = Some((keep[i], keep[j]));
            }
        }

        let report = CrisisReport {
            poles_before: n,
            poles_after: poles.len(),
            eliminated: (0..n).filter(|&i| weak[i] && !keep.contains(&i)).collect(),
            absorbed: (0..n)
                .filter(|&i| absorbed[i] && !weak[i] && !keep.contains(&i))
                .collect(),
            synthesized,
            degenerate,
        };
        Ok((
            DialecticalSystem {
                poles,
                ..self.clone()
            },
            report,
        ))
    }

    /// Adds `chi_max · r` with `r ~ N(0, 1)` to every weight coordinate, then clamps to `[0, 1]`.
    pub fn apply_crisis_noise<R: Rng + ?Sized>(&mut self, chi_max: f64, rng: &mut R) {
        if chi_max == 0.0 {
            return;
        }
        for p in &mut self.poles {
            for w in &mut p.weights {
                let r: f64 = rng.sample(StandardNormal);
                *w = (*w + chi_max * r).clamp(0.0, 1.0);
            }
        }
    }

    /// Complete crisis: qualitative change, crisis noise and force reset.
    pub fn revolutionary_crisis<R: Rng + ?Sized>(
        &self,
        cfg: &CrisisConfig,
        rng: &mut R,
    ) -> Result<(DialecticalSystem, CrisisReport)> {
        let (mut next, report) = self.qualitative_change(cfg)?;
        next.apply_crisis_noise(cfg.chi_max, rng);
        next.reset_forces();
        Ok((next, report))
    }

    /// Per-pixel winner over a multispectral image.
    pub fn classify(&self, image: &MultispectralImage) -> Result<LabelMap> {
        self.classify_with(image, Execution::default())
    }

    pub fn classify_with(&self, image: &MultispectralImage, exec: Execution) -> Result<LabelMap> {
        if image.band_count() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "image has {} bands, system expects {}",
                image.band_count(),
                self.dim
            )));
        }
        let labels = exec.map_range(image.pixel_count(), |u| {
            let mut x = vec![0.0; self.dim];
            image.pixel_into(u, &mut x);
            self.winner(&x) as u32
        });
        LabelMap::new(image.grid(), labels, self.poles.len() as u32)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: DialecticalSystem = serde_json::from_str(text)?;
        Self::new(raw.poles, raw.anticontradiction, raw.update_rule)
    }
}

/// Thresholds used at crisis time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrisisConfig {
    pub f_min: f64,
    pub delta_min: f64,
    pub chi_max: f64,
    pub target_poles: usize,
    pub synthesis: bool,
}

/// What a crisis did, with indices into the pre-crisis pole list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrisisReport {
    pub poles_before: usize,
    pub poles_after: usize,
    pub eliminated: Vec<usize>,
    pub absorbed: Vec<usize>,
    pub synthesized: Option<(usize, usize)>,
    /// Every pole would have been removed; the strongest one was kept.
    pub degenerate: bool,
}

/// Training parameters. Defaults reproduce the published experiment:
/// 10 initial poles, 5 phases of 100 passes, η₀ = 0.1, 1 % minimum force,
/// 25 % minimum contradiction, 25 % maximum crisis, 4 target poles,
/// ratio anticontradiction with the g²-weighted update and no synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdcConfig {
    pub n_phases: usize,
    pub phase_length: usize,
    pub target_poles: usize,
    pub initial_poles: usize,
    pub eta0: f64,
    /// Lower bound of the linearly decaying step.
    pub eta_floor: f64,
    pub chi_max: f64,
    pub f_min: f64,
    pub delta_min: f64,
    pub seed: u64,
    pub anticontradiction: Anticontradiction,
    pub update_rule: UpdateRule,
    pub synthesis: bool,
}

impl Default for OdcConfig {
    fn default() -> Self {
        OdcConfig {
            n_phases: 5,
            phase_length: 100,
            target_poles: 4,
            initial_poles: 10,
            eta0: 0.1,
            eta_floor: 0.01,
            chi_max: 0.25,
            f_min: 0.01,
            delta_min: 0.25,
            seed: 0,
            anticontradiction: Anticontradiction::Ratio,
            update_rule: UpdateRule::GSquared,
            synthesis: false,
        }
    }
}

impl OdcConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.n_phases == 0 || self.phase_length == 0 {
            return bad("n_phases and phase_length must be at least 1");
        }
        if self.target_poles == 0 || self.target_poles > self.initial_poles {
            return bad("need 1 <= target_poles <= initial_poles");
        }
        if !(self.eta0 > 0.0 && self.eta0 < 1.0) {
            return bad("eta0 must lie in (0, 1)");
        }
        if !(self.eta_floor > 0.0) {
            return bad("eta_floor must be positive");
        }
        for (v, name) in [
            (self.chi_max, "chi_max"),
            (self.f_min, "f_min"),
            (self.delta_min, "delta_min"),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in [0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn crisis(&self) -> CrisisConfig {
        CrisisConfig {
            f_min: self.f_min,
            delta_min: self.delta_min,
            chi_max: self.chi_max,
            target_poles: self.target_poles,
            synthesis: self.synthesis,
        }
    }
}

/// Linearly decaying step `max(floor, η₀ (1 - t / total))`; constant when `η₀ <= floor`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub eta0: f64,
    pub floor: f64,
    pub total_steps: usize,
}

impl StepSchedule {
    pub fn eta(&self, step: usize) -> f64 {
        if self.eta0 <= self.floor {
            return self.eta0;
        }
        let frac = step as f64 / self.total_steps.max(1) as f64;
        (self.eta0 * (1.0 - frac)).max(self.floor)
    }
}

/// One winner update during training.
#[derive(Debug, Clone, Copy)]
pub struct EvolutionEvent<'a> {
    pub phase: usize,
    pub step: usize,
    pub winner: usize,
    pub eta: f64,
    pub weights: &'a [f64],
}

/// Summary of one historical phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase: usize,
    pub total_force: f64,
    pub crisis: CrisisReport,
    /// False after the final phase: the last qualitative change is not perturbed.
    pub perturbed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdcTraining {
    pub system: DialecticalSystem,
    pub phases: Vec<PhaseRecord>,
}

fn check_data(data: &[Vec<f64>]) -> Result<usize> {
    let dim = data.first().ok_or(Error::EmptyData)?.len();
    if dim == 0 || data.iter().any(|x| x.len() != dim) {
        return Err(Error::DimensionMismatch(
            "all condition vectors must share one positive length".into(),
        ));
    }
    Ok(dim)
}

/// Indices of the first occurrence of every distinct vector, in data order.
pub(crate) fn distinct_indices(data: &[Vec<f64>]) -> Vec<usize> {
    let mut seen = HashSet::new();
    data.iter()
        .enumerate()
        .filter(|(_, x)| seen.insert(x.iter().map(|v| v.to_bits()).collect::<Vec<_>>()))
        .map(|(i, _)| i)
        .collect()
}

/// Draws `count` weight vectors uniformly, without replacement, from the set of
/// distinct condition vectors; tops up with uniform random vectors in `[0, 1]^n`
/// when the set is smaller than `count`.
pub fn initial_weights<R: Rng + ?Sized>(
    data: &[Vec<f64>],
    count: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let dim = check_data(data)?;
    let distinct = distinct_indices(data);
    let take = count.min(distinct.len());
    let mut weights: Vec<Vec<f64>> = index::sample(rng, distinct.len(), take)
        .into_iter()
        .map(|i| data[distinct[i]].clone())
        .collect();
    while weights.len() < count {
        weights.push((0..dim).map(|_| rng.random::<f64>()).collect());
    }
    Ok(weights)
}

/// Trains an ODC; see [`train_odc_observed`].
pub fn train_odc(data: &[Vec<f64>], cfg: &OdcConfig) -> Result<DialecticalSystem> {
    Ok(train_odc_observed(data, cfg, |_| {})?.system)
}

/// Trains an ODC, reporting every winner update to `observer`.
///
/// Phases repeat until `n_phases` have run or the pole count drops to
/// `target_poles` or below. Every phase ends with a qualitative change; crisis
/// noise and the force reset are applied only when another phase follows, so
/// the returned poles are the converged ones and carry the last phase's forces.
pub fn train_odc_observed<F>(
    data: &[Vec<f64>],
    cfg: &OdcConfig,
    mut observer: F,
) -> Result<OdcTraining>
where
    F: FnMut(&EvolutionEvent<'_>),
{
    cfg.validate()?;
    check_data(data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let weights = initial_weights(data, cfg.initial_poles, &mut rng)?;
    let mut system =
        DialecticalSystem::from_weights(weights, cfg.anticontradiction, cfg.update_rule)?;
    let schedule = StepSchedule {
        eta0: cfg.eta0,
        floor: cfg.eta_floor,
        total_steps: cfg.n_phases * cfg.phase_length * data.len(),
    };
    let crisis = cfg.crisis();
    let mut phases = Vec::new();
    let mut step = 0usize;
    for phase in 0..cfg.n_phases {
        system.reset_forces();
        for _ in 0..cfg.phase_length {
            for x in data {
                let eta = schedule.eta(step);
                let k = system.step_unchecked(x, eta);
                observer(&EvolutionEvent {
                    phase,
                    step,
                    winner: k,
                    eta,
                    weights: &system.poles[k].weights,
                });
                step += 1;
            }
        }
        let total_force = system.poles.iter().map(|p| p.force).sum();
        let (next, report) = system.qualitative_change(&crisis)?;
        system = next;
        let last = phase + 1 == cfg.n_phases || system.pole_count() <= cfg.target_poles;
        if !last {
            system.apply_crisis_noise(cfg.chi_max, &mut rng);
            system.reset_forces();
        }
        phases.push(PhaseRecord {
            phase,
            total_force,
            crisis: report,
            perturbed: !last,
        });
        if last {
            break;
        }
    }
    Ok(OdcTraining { system, phases })
}

/// Pointwise label substitution. The result's class count is one past the
/// largest target label.
pub fn relabel(map: &LabelMap, merge: &BTreeMap<u32, u32>) -> Result<LabelMap> {
    for l in map.distinct_labels() {
        if !merge.contains_key(&l) {
            return Err(Error::MissingMapping(l));
        }
    }
    let labels: Vec<u32> = map.labels().iter().map(|l| merge[l]).collect();
    let m = merge.values().copied().max().map_or(1, |v| v + 1);
    LabelMap::new(map.grid(), labels, m)
}

/// Parses a merge map given as a JSON object `{"source": target, ...}`.
pub fn merge_map_from_json(text: &str) -> Result<BTreeMap<u32, u32>> {
    Ok(serde_json::from_str(text)?)
}
