use std::fs;

use odc_core::adc::{compute_adc_with, AdcConfig};
use odc_core::classifiers::{classify, train_lvq, LvqParams, TrainingSet};
use odc_core::dataset::{read_truth, read_volume, write_volume};
use odc_core::dialectics::{train_odc, OdcConfig};
use odc_core::morphology::{binarize, pattern_spectrum_with, StructuringElement};
use odc_core::pgm::BitDepth;
use odc_core::phantom::{default_brain_phantom, synthesize_phantom};
use odc_core::pipeline::{run, InputKind, Method, RunConfig};
use odc_core::Execution;

#[test]
fn dataset_round_trip_keeps_truth_and_quantizes_bands() {
    let tmp = tempfile::tempdir().unwrap();
    let phantom = synthesize_phantom(&default_brain_phantom(32, 2).unwrap()).unwrap();
    write_volume(
        tmp.path(),
        &phantom.volume,
        Some(&phantom.truth),
        BitDepth::Sixteen,
    )
    .unwrap();
    let (manifest, volume) = read_volume(tmp.path()).unwrap();
    assert_eq!(
        (manifest.width, manifest.slices, manifest.bands),
        (32, 2, 3)
    );
    assert_eq!(read_truth(tmp.path(), 2).unwrap(), phantom.truth);
    for (a, b) in volume.slices().iter().zip(phantom.volume.slices()) {
        for (x, y) in a.bands().iter().zip(b.bands()) {
            for (u, v) in x.values().iter().zip(y.values()) {
                assert!((u - v).abs() <= 0.5 / 65535.0 + 1e-15);
            }
        }
    }
}

#[test]
fn execution_modes_agree() {
    let phantom = synthesize_phantom(&default_brain_phantom(64, 1).unwrap()).unwrap();
    let image = &phantom.volume.slices()[0];
    let system = train_odc(&image.condition_vectors(), &OdcConfig::default()).unwrap();
    assert_eq!(
        system.classify_with(image, Execution::Sequential).unwrap(),
        system.classify_with(image, Execution::Parallel).unwrap()
    );
    let cfg = AdcConfig::default();
    assert_eq!(
        compute_adc_with(image, &cfg, Execution::Sequential).unwrap(),
        compute_adc_with(image, &cfg, Execution::Parallel).unwrap()
    );
    let mask = binarize(&image.bands()[0], 0.3).unwrap();
    assert_eq!(
        pattern_spectrum_with(&mask, StructuringElement::Cross3, Execution::Sequential).unwrap(),
        pattern_spectrum_with(&mask, StructuringElement::Cross3, Execution::Parallel).unwrap()
    );
}

#[test]
fn classification_follows_relabeled_codebooks() {
    let phantom = synthesize_phantom(&default_brain_phantom(32, 1).unwrap()).unwrap();
    let image = &phantom.volume.slices()[0];
    let truth = &phantom.truth[0];
    let inputs = image.condition_vectors();
    let ts = TrainingSet::new(inputs.clone(), truth.labels().to_vec(), 4).unwrap();
    let model = train_lvq(&ts, &LvqParams::default()).unwrap();
    let mut permuted = model.clone();
    permuted.codebooks.rotate_left(1);
    let a = classify(&model, image, Execution::default()).unwrap();
    let b = classify(&permuted, image, Execution::default()).unwrap();
    for (x, y) in a.labels().iter().zip(b.labels()) {
        assert_eq!(*y, (x + 3) % 4);
    }
}

#[test]
fn adc_input_runs_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = default_brain_phantom(32, 3).unwrap();
    spec.noise_sigma = 0.02;
    let phantom = synthesize_phantom(&spec).unwrap();
    write_volume(
        &tmp.path().join("data"),
        &phantom.volume,
        Some(&phantom.truth),
        BitDepth::Sixteen,
    )
    .unwrap();
    let mut cfg = RunConfig::new(
        tmp.path().join("data"),
        tmp.path().join("out"),
        1,
        &[Method::Cm, Method::Lvq],
    );
    cfg.input = InputKind::Adc;
    let summary = run(&cfg, Execution::default()).unwrap();
    assert_eq!(summary.len(), 2);
    let report = fs::read_to_string(tmp.path().join("out/CM/report.json")).unwrap();
    assert!(report.contains("\"input\": \"adc\""));
    let scores = fs::read_to_string(tmp.path().join("out/LVQ/scores.csv")).unwrap();
    assert_eq!(scores.lines().count(), 4);
}

#[test]
fn odc_merge_map_is_applied() {
    let tmp = tempfile::tempdir().unwrap();
    let phantom = synthesize_phantom(&default_brain_phantom(32, 2).unwrap()).unwrap();
    write_volume(
        &tmp.path().join("data"),
        &phantom.volume,
        Some(&phantom.truth),
        BitDepth::Sixteen,
    )
    .unwrap();
    let mut cfg = RunConfig::new(
        tmp.path().join("data"),
        tmp.path().join("out"),
        0,
        &[Method::Odc],
    );
    cfg.merge = Some((0..10).map(|p| (p, 0)).collect());
    cfg.matter_labels = vec![0];
    run(&cfg, Execution::default()).unwrap();
    let report = fs::read_to_string(tmp.path().join("out/ODC/report.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(v["volume_fractions"]["percent"][0].as_f64().unwrap(), 100.0);
}
