//! End-to-end runs: train on one slice, classify every slice, score against
//! ground truth and write reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adc::{compute_adc_with, AdcConfig};
use crate::classifiers::{
    classify, roi_training_set, train_fcm, train_lvq, train_mlp, train_polynomial, train_rbf,
    train_som, FcmParams, LvqParams, MlpParams, PixelClassifier, PolynomialParams, RbfParams,
    SomParams, SupervisedModel, UnsupervisedModel,
};
use crate::dataset::{read_truth, read_volume};
use crate::dialectics::{relabel, train_odc, DialecticalSystem, OdcConfig};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::image::{LabelMap, MultispectralImage, Volume};
use crate::metrics::{
    build_confusion, generalization_index, majority_mapping, volume_fractions, Generalization,
    SliceScores, VolumeFractions,
};
use crate::pgm::{write_atomic, write_label_map};

pub const CONFIG_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Odc,
    Ko,
    Lvq,
    Cm,
    Mlp,
    Rbf,
    Po,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Odc,
        Method::Ko,
        Method::Lvq,
        Method::Cm,
        Method::Mlp,
        Method::Rbf,
        Method::Po,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Odc => "ODC",
            Method::Ko => "KO",
            Method::Lvq => "LVQ",
            Method::Cm => "CM",
            Method::Mlp => "MLP",
            Method::Rbf => "RBF",
            Method::Po => "PO",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(name.trim()))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown classifier {name:?}")))
    }

    /// Clustering methods whose outputs are mapped onto truth labels afterwards.
    pub fn is_unsupervised(self) -> bool {
        matches!(self, Method::Odc | Method::Ko | Method::Cm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    #[default]
    Multispectral,
    Adc,
}

fn default_version() -> u32 {
    CONFIG_VERSION
}

fn default_samples() -> Option<usize> {
    Some(200)
}

fn default_fluid() -> Vec<u32> {
    vec![1]
}

fn default_matter() -> Vec<u32> {
    vec![2, 3]
}

/// Configuration of `run`. Relative paths resolve against the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    /// Dataset directory holding a manifest and band PGMs.
    pub volume: PathBuf,
    /// Directory with `truth_sliceNN.pgm`; defaults to the volume directory.
    #[serde(default)]
    pub truth: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub train_slice: usize,
    pub classifiers: Vec<String>,
    #[serde(default)]
    pub input: InputKind,
    /// Number of classes; defaults to one past the largest truth label.
    #[serde(default)]
    pub class_count: Option<usize>,
    /// Cap on ROI samples per class for supervised methods.
    #[serde(default = "default_samples")]
    pub samples_per_class: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Pole-to-class map for ODC; majority post-labeling when absent.
    #[serde(default)]
    pub merge: Option<BTreeMap<u32, u32>>,
    #[serde(default = "default_fluid")]
    pub fluid_labels: Vec<u32>,
    #[serde(default = "default_matter")]
    pub matter_labels: Vec<u32>,
    #[serde(default)]
    pub odc: OdcConfig,
    #[serde(default)]
    pub adc: AdcConfig,
    #[serde(default)]
    pub som: SomParams,
    #[serde(default)]
    pub lvq: LvqParams,
    #[serde(default)]
    pub fcm: FcmParams,
    #[serde(default)]
    pub mlp: MlpParams,
    #[serde(default)]
    pub rbf: RbfParams,
    #[serde(default)]
    pub poly: PolynomialParams,
}

impl RunConfig {
    /// Minimal config with defaults for everything else.
    pub fn new(
        volume: impl Into<PathBuf>,
        out_dir: impl Into<PathBuf>,
        train_slice: usize,
        classifiers: &[Method],
    ) -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            volume: volume.into(),
            truth: None,
            out_dir: out_dir.into(),
            train_slice,
            classifiers: classifiers.iter().map(|m| m.name().to_string()).collect(),
            input: InputKind::default(),
            class_count: None,
            samples_per_class: default_samples(),
            seed: 0,
            merge: None,
            fluid_labels: default_fluid(),
            matter_labels: default_matter(),
            odc: OdcConfig::default(),
            adc: AdcConfig::default(),
            som: SomParams::default(),
            lvq: LvqParams::default(),
            fcm: FcmParams::default(),
            mlp: MlpParams::default(),
            rbf: RbfParams::default(),
            poly: PolynomialParams::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.volume);
        join(&mut self.out_dir);
        if let Some(t) = self.truth.as_mut() {
            join(t);
        }
    }

    /// One seed drives every stochastic step of the run.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.odc.seed = seed;
        self.som.seed = seed;
        self.lvq.seed = seed;
        self.fcm.seed = seed;
        self.mlp.seed = seed;
        self.rbf.seed = seed;
        self.poly.seed = seed;
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        if self.classifiers.is_empty() {
            return Err(Error::InvalidParameter("no classifiers requested".into()));
        }
        self.classifiers.iter().map(|c| Method::parse(c)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported config version {}",
                self.version
            )));
        }
        self.methods()?;
        self.odc.validate()?;
        self.adc.validate()?;
        if self.class_count == Some(0) {
            return Err(Error::InvalidParameter(
                "class count must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceReport {
    pub slice: usize,
    pub phi: f64,
    pub kappa: f64,
    /// Rows are predicted classes, columns truth classes.
    pub confusion: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub tool_version: String,
    pub method: Method,
    pub input: InputKind,
    pub seed: u64,
    pub train_slice: usize,
    pub class_count: usize,
    pub training_samples: usize,
    /// Output-to-class map applied before scoring, for clustering methods.
    pub mapping: Option<BTreeMap<u32, u32>>,
    pub poles: Option<usize>,
    pub slices: Vec<SliceReport>,
    pub scores: SliceScores,
    /// Absent for a single slice or a nonpositive mean kappa.
    pub generalization: Option<Generalization>,
    /// Absent when the predicted matter volume is zero.
    pub volume_fractions: Option<VolumeFractions>,
    pub config: RunConfig,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum TrainedModel {
    Dialectical(DialecticalSystem),
    Supervised(SupervisedModel),
    Unsupervised(UnsupervisedModel),
}

impl TrainedModel {
    pub fn as_classifier(&self) -> &dyn PixelClassifier {
        match self {
            TrainedModel::Dialectical(m) => m,
            TrainedModel::Supervised(m) => m,
            TrainedModel::Unsupervised(m) => m,
        }
    }
}

pub struct MethodOutcome {
    pub report: MethodReport,
    pub model: TrainedModel,
    /// Raw model outputs per slice.
    pub raw_maps: Vec<LabelMap>,
    /// Scored maps, after post-labeling where applicable.
    pub maps: Vec<LabelMap>,
}

/// Condition images for each slice: the bands themselves or a one-band ADC map.
pub fn prepare_inputs(
    volume: &Volume,
    kind: InputKind,
    adc: &AdcConfig,
    exec: Execution,
) -> Result<Vec<MultispectralImage>> {
    match kind {
        InputKind::Multispectral => Ok(volume.slices().to_vec()),
        InputKind::Adc => volume
            .slices()
            .iter()
            .map(|s| compute_adc_with(s, adc, exec).map(MultispectralImage::single))
            .collect(),
    }
}

/// Trains `method` on `inputs[cfg.train_slice]` and scores every slice.
pub fn run_method(
    method: Method,
    inputs: &[MultispectralImage],
    truth: &[LabelMap],
    class_count: usize,
    cfg: &RunConfig,
    exec: Execution,
) -> Result<MethodOutcome> {
    if inputs.len() != truth.len() {
        return Err(Error::DimensionMismatch(
            "one truth map per slice is required".into(),
        ));
    }
    let train = inputs.get(cfg.train_slice).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "train slice {} outside 0..{}",
            cfg.train_slice,
            inputs.len()
        ))
    })?;
    let train_truth = &truth[cfg.train_slice];

    let (model, training_samples) = if method.is_unsupervised() {
        let data = train.condition_vectors();
        let n = data.len();
        let model = match method {
            Method::Odc => TrainedModel::Dialectical(train_odc(&data, &cfg.odc)?),
            Method::Ko => TrainedModel::Unsupervised(UnsupervisedModel::Som(train_som(
                &data,
                &SomParams {
                    nodes: class_count,
                    ..cfg.som
                },
            )?)),
            _ => TrainedModel::Unsupervised(UnsupervisedModel::FuzzyCMeans(train_fcm(
                &data,
                &FcmParams {
                    clusters: class_count,
                    ..cfg.fcm
                },
            )?)),
        };
        (model, n)
    } else {
        let ts = roi_training_set(
            train,
            train_truth,
            class_count,
            cfg.samples_per_class,
            cfg.seed,
        )?;
        let model = match method {
            Method::Lvq => SupervisedModel::Lvq(train_lvq(&ts, &cfg.lvq)?),
            Method::Mlp => SupervisedModel::Mlp(train_mlp(&ts, &cfg.mlp)?),
            Method::Rbf => SupervisedModel::Rbf(train_rbf(&ts, &cfg.rbf)?),
            _ => SupervisedModel::Polynomial(train_polynomial(&ts, &cfg.poly)?),
        };
        (TrainedModel::Supervised(model), ts.len())
    };

    let classifier = model.as_classifier();
    let raw_maps = exec
        .map_slice(inputs, |img| {
            classify(classifier, img, Execution::Sequential)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mapping = if method.is_unsupervised() {
        Some(match (&cfg.merge, method) {
            (Some(m), Method::Odc) => m.clone(),
            _ => majority_mapping(&raw_maps[cfg.train_slice], train_truth)?,
        })
    } else {
        None
    };
    let maps = match &mapping {
        Some(m) => raw_maps
            .iter()
            .map(|r| relabel(r, m))
            .collect::<Result<Vec<_>>>()?,
        None => raw_maps.clone(),
    };

    let mut slices = Vec::with_capacity(maps.len());
    for (z, (pred, t)) in maps.iter().zip(truth).enumerate() {
        let cm = build_confusion(pred, t, class_count)?;
        slices.push(SliceReport {
            slice: z,
            phi: cm.overall_accuracy()?,
            kappa: cm.kappa()?,
            confusion: cm.rows().to_vec(),
        });
    }
    let scores = SliceScores {
        phi: slices.iter().map(|s| s.phi).collect(),
        kappa: slices.iter().map(|s| s.kappa).collect(),
    };
    let generalization = generalization_index(&scores).ok();
    let fractions =
        match volume_fractions(&maps, class_count, &cfg.fluid_labels, &cfg.matter_labels) {
            Ok(f) => Some(f),
            Err(Error::UndefinedRatio) => None,
            Err(e) => return Err(e),
        };
    let poles = match &model {
        TrainedModel::Dialectical(s) => Some(s.pole_count()),
        _ => None,
    };
    let report = MethodReport {
        tool_version: TOOL_VERSION.to_string(),
        method,
        input: cfg.input,
        seed: cfg.seed,
        train_slice: cfg.train_slice,
        class_count,
        training_samples,
        mapping,
        poles,
        slices,
        scores,
        generalization,
        volume_fractions: fractions,
        config: cfg.clone(),
    };
    Ok(MethodOutcome {
        report,
        model,
        raw_maps,
        maps,
    })
}

/// Per-method summary row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: Method,
    pub mean_phi: f64,
    pub mean_kappa: f64,
    pub generalization: Option<f64>,
    pub fluid_matter_ratio: Option<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn label_file_name(slice: usize) -> String {
    format!("labels_slice{slice:02}.pgm")
}

pub fn raw_file_name(slice: usize) -> String {
    format!("raw_slice{slice:02}.pgm")
}

/// Loads the data named in `cfg`, runs every requested method and writes
/// `<out>/<METHOD>/{report.json, scores.csv, model.json, labels_sliceNN.pgm}`
/// plus `<out>/summary.csv`.
pub fn run(cfg: &RunConfig, exec: Execution) -> Result<Vec<RunSummary>> {
    cfg.validate()?;
    let methods = cfg.methods()?;
    let (_, volume) = read_volume(&cfg.volume)?;
    let truth_dir = cfg.truth.as_deref().unwrap_or(&cfg.volume);
    let truth = read_truth(truth_dir, volume.slice_count())?;
    let class_count = match cfg.class_count {
        Some(m) => m,
        None => truth
            .iter()
            .map(|t| t.class_count() as usize)
            .max()
            .unwrap_or(0),
    };
    let inputs = prepare_inputs(&volume, cfg.input, &cfg.adc, exec)?;

    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let mut summary = Vec::new();
    for method in methods {
        let outcome = run_method(method, &inputs, &truth, class_count, cfg, exec)?;
        write_outcome(&cfg.out_dir.join(method.name()), &outcome)?;
        let r = &outcome.report;
        summary.push(RunSummary {
            method,
            mean_phi: mean(&r.scores.phi),
            mean_kappa: mean(&r.scores.kappa),
            generalization: r.generalization.map(|g| g.index),
            fluid_matter_ratio: r.volume_fractions.as_ref().map(|v| v.fluid_matter_ratio),
        });
    }
    let mut csv = String::from("method,mean_phi,mean_kappa,generalization,fluid_matter_ratio\n");
    for s in &summary {
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            s.method.name(),
            s.mean_phi,
            s.mean_kappa,
            opt(s.generalization),
            opt(s.fluid_matter_ratio)
        );
    }
    write_atomic(&cfg.out_dir.join("summary.csv"), csv.as_bytes())?;
    Ok(summary)
}

/// Loads a config file, applies an optional seed override and runs it.
pub fn run_config_file(path: &Path, seed: Option<u64>, exec: Execution) -> Result<Vec<RunSummary>> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = seed {
        cfg.apply_seed(seed);
    }
    run(&cfg, exec)
}

pub fn write_outcome(dir: &Path, outcome: &MethodOutcome) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut report = serde_json::to_string_pretty(&outcome.report)?;
    report.push('\n');
    write_atomic(&dir.join("report.json"), report.as_bytes())?;
    let mut model = serde_json::to_string_pretty(&outcome.model)?;
    model.push('\n');
    write_atomic(&dir.join("model.json"), model.as_bytes())?;

    let mut csv = String::from("slice,phi,kappa\n");
    for s in &outcome.report.slices {
        let _ = writeln!(csv, "{},{},{}", s.slice, s.phi, s.kappa);
    }
    write_atomic(&dir.join("scores.csv"), csv.as_bytes())?;

    for (z, map) in outcome.maps.iter().enumerate() {
        write_label_map(map, &dir.join(label_file_name(z)))?;
    }
    if outcome.report.mapping.is_some() {
        for (z, map) in outcome.raw_maps.iter().enumerate() {
            write_label_map(map, &dir.join(raw_file_name(z)))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.name()).unwrap(), m);
            assert_eq!(Method::parse(&m.name().to_lowercase()).unwrap(), m);
        }
        assert!(Method::parse("SVM").is_err());
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = RunConfig::from_json(
            r#"{"volume":"v","out_dir":"o","train_slice":1,"classifiers":["ODC"]}"#,
        )
        .unwrap();
        assert_eq!(cfg.input, InputKind::Multispectral);
        assert_eq!(cfg.samples_per_class, Some(200));
        assert_eq!(cfg.odc, OdcConfig::default());
        assert!(RunConfig::from_json(
            r#"{"volume":"v","out_dir":"o","train_slice":1,"classifiers":["XYZ"]}"#
        )
        .is_err());
        assert!(RunConfig::from_json(
            r#"{"volume":"v","out_dir":"o","train_slice":1,"classifiers":["KO"],"bogus":1}"#
        )
        .is_err());
        assert!(RunConfig::from_json(
            r#"{"version":2,"volume":"v","out_dir":"o","train_slice":1,"classifiers":["KO"]}"#
        )
        .is_err());
    }

    #[test]
    fn seed_reaches_every_trainer() {
        let mut cfg = RunConfig::new("v", "o", 0, &[Method::Odc]);
        cfg.apply_seed(42);
        assert_eq!(
            [
                cfg.odc.seed,
                cfg.som.seed,
                cfg.lvq.seed,
                cfg.fcm.seed,
                cfg.mlp.seed,
                cfg.rbf.seed,
                cfg.poly.seed
            ],
            [42; 7]
        );
    }

    #[test]
    fn relative_paths_follow_config() {
        let mut cfg = RunConfig::new("data", "/abs/out", 0, &[Method::Ko]);
        cfg.resolve_paths(Path::new("/cfg"));
        assert_eq!(cfg.volume, PathBuf::from("/cfg/data"));
        assert_eq!(cfg.out_dir, PathBuf::from("/abs/out"));
    }
}
