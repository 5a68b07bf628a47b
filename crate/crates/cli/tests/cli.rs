use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn odc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_odc"))
        .args(args)
        .env_remove("ODC_SEED")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// 8-bit label map, one byte per label.
fn write_map(path: &Path, rows: &[&str]) {
    let mut bytes = format!("P5\n{} {}\n255\n", rows[0].len(), rows.len()).into_bytes();
    for r in rows {
        bytes.extend(r.bytes().map(|b| b - b'0'));
    }
    fs::write(path, bytes).unwrap();
}

const SQUARE: [&str; 6] = ["000000", "011110", "011110", "011110", "011110", "000000"];
const PIXEL: [&str; 6] = ["000000", "000000", "001000", "000000", "000000", "000000"];

#[test]
fn phantom_layout_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(
        code(&odc(&[
            "phantom",
            "--out",
            p(&a),
            "--noise",
            "0.03",
            "--seed",
            "9"
        ])),
        0
    );
    assert_eq!(
        code(&odc(&[
            "phantom",
            "--out",
            p(&b),
            "--noise",
            "0.03",
            "--seed",
            "9"
        ])),
        0
    );
    let mut names: Vec<String> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.iter().filter(|n| n.starts_with("slice")).count(), 24);
    assert_eq!(names.iter().filter(|n| n.starts_with("truth")).count(), 8);
    assert!(names.contains(&"manifest.json".to_string()));
    for n in &names {
        assert_eq!(
            fs::read(a.join(n)).unwrap(),
            fs::read(b.join(n)).unwrap(),
            "{n}"
        );
    }
}

#[test]
fn phantom_rejects_bad_spec() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("spec.json");
    fs::write(&spec, "{ not json").unwrap();
    let out = odc(&[
        "phantom",
        "--spec",
        p(&spec),
        "--out",
        p(&tmp.path().join("o")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

fn write_run_config(dir: &Path, classifiers: &str, extra: &str) -> std::path::PathBuf {
    let cfg = dir.join("run.json");
    fs::write(
        &cfg,
        format!(r#"{{"volume":"data","out_dir":"out","train_slice":4,"classifiers":{classifiers}{extra}}}"#),
    )
    .unwrap();
    cfg
}

#[test]
fn run_odc_reports_kappa_per_slice() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&odc(&["phantom", "--out", p(&tmp.path().join("data"))])),
        0
    );
    let cfg = write_run_config(tmp.path(), r#"["ODC"]"#, "");
    let out = odc(&["run", "--config", p(&cfg)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/ODC/report.json")).unwrap())
            .unwrap();
    let kappa = report["scores"]["kappa"].as_array().unwrap();
    assert_eq!(kappa.len(), 8);
    assert!(kappa.iter().all(|k| k.as_f64().unwrap() >= 0.99));
    assert!(tmp.path().join("out/ODC/labels_slice07.pgm").exists());
    assert!(tmp.path().join("out/summary.csv").exists());
}

#[test]
fn seed_flag_beats_environment() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&odc(&[
            "phantom",
            "--out",
            p(&tmp.path().join("data")),
            "--size",
            "32",
            "--slices",
            "2"
        ])),
        0
    );
    let cfg = tmp.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"volume":"data","out_dir":"out","train_slice":0,"classifiers":["LVQ"],"seed":1}"#,
    )
    .unwrap();
    let seed_of = || -> u64 {
        let text = fs::read_to_string(tmp.path().join("out/LVQ/report.json")).unwrap();
        serde_json::from_str::<serde_json::Value>(&text).unwrap()["seed"]
            .as_u64()
            .unwrap()
    };
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_odc"));
        c.args(["run", "--config", p(&cfg)]).env_remove("ODC_SEED");
        if let Some(v) = env {
            c.env("ODC_SEED", v);
        }
        if let Some(v) = flag {
            c.args(["--seed", v]);
        }
        assert!(c.output().unwrap().status.success());
    };
    run(None, None);
    assert_eq!(seed_of(), 1);
    run(Some("7"), None);
    assert_eq!(seed_of(), 7);
    run(Some("7"), Some("8"));
    assert_eq!(seed_of(), 8);
}

#[test]
fn run_rejects_unknown_classifier() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_run_config(tmp.path(), r#"["SVM"]"#, "");
    assert_eq!(code(&odc(&["run", "--config", p(&cfg)])), 2);
}

#[test]
fn run_missing_config() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&odc(&["run", "--config", p(&tmp.path().join("nope.json"))])),
        2
    );
}

#[test]
fn spectrum_csv_and_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let map = tmp.path().join("map.pgm");
    write_map(&map, &SQUARE);
    let csv = tmp.path().join("s.csv");
    assert_eq!(
        code(&odc(&[
            "spectrum",
            "--map",
            p(&map),
            "--class",
            "1",
            "--out",
            p(&csv)
        ])),
        0
    );
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("k,V,Xi,xi"));
    let row1: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(row1[3], "1");
    assert_eq!(
        code(&odc(&[
            "spectrum",
            "--map",
            p(&map),
            "--class",
            "5",
            "--out",
            p(&csv)
        ])),
        3
    );
    let missing = tmp.path().join("missing.pgm");
    assert_eq!(
        code(&odc(&[
            "spectrum",
            "--map",
            p(&missing),
            "--class",
            "1",
            "--out",
            p(&csv)
        ])),
        2
    );
}

#[test]
fn similarity_values_and_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let square = tmp.path().join("square.pgm");
    let pixel = tmp.path().join("pixel.pgm");
    let small = tmp.path().join("small.pgm");
    write_map(&square, &SQUARE);
    write_map(&pixel, &PIXEL);
    write_map(&small, &["010", "000"]);
    let stdout = |args: &[&str]| {
        let out = odc(args);
        assert_eq!(code(&out), 0);
        String::from_utf8(out.stdout).unwrap().trim().to_string()
    };
    assert_eq!(
        stdout(&[
            "similarity",
            "--a",
            p(&square),
            "--b",
            p(&square),
            "--class",
            "1"
        ]),
        "1.0000"
    );
    assert_eq!(
        stdout(&[
            "similarity",
            "--a",
            p(&square),
            "--b",
            p(&pixel),
            "--class",
            "1"
        ]),
        "0.2431"
    );
    assert_eq!(
        code(&odc(&[
            "similarity",
            "--a",
            p(&square),
            "--b",
            p(&pixel),
            "--class",
            "2"
        ])),
        3
    );
    assert_eq!(
        code(&odc(&[
            "similarity",
            "--a",
            p(&square),
            "--b",
            p(&small),
            "--class",
            "1"
        ])),
        2
    );
}

#[test]
fn relabel_applies_merge_map() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in.pgm");
    write_map(&input, &["0123", "3210"]);
    let merge = tmp.path().join("merge.json");
    fs::write(&merge, r#"{"0":0,"1":1,"2":1,"3":2}"#).unwrap();
    let out = tmp.path().join("out.pgm");
    assert_eq!(
        code(&odc(&[
            "relabel",
            "--input",
            p(&input),
            "--merge",
            p(&merge),
            "--out",
            p(&out)
        ])),
        0
    );
    let bytes = fs::read(&out).unwrap();
    assert_eq!(&bytes[bytes.len() - 8..], &[0, 1, 1, 2, 2, 1, 1, 0]);
    fs::write(&merge, r#"{"0":0,"1":1}"#).unwrap();
    assert_eq!(
        code(&odc(&[
            "relabel",
            "--input",
            p(&input),
            "--merge",
            p(&merge),
            "--out",
            p(&out)
        ])),
        2
    );
}

#[test]
fn adc_writes_one_map_per_slice() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    assert_eq!(
        code(&odc(&[
            "phantom",
            "--out",
            p(&data),
            "--size",
            "32",
            "--slices",
            "3"
        ])),
        0
    );
    let out = tmp.path().join("adc");
    assert_eq!(
        code(&odc(&["adc", "--volume", p(&data), "--out", p(&out)])),
        0
    );
    for z in 0..3 {
        assert!(out.join(format!("adc_slice{z:02}.pgm")).exists());
    }
}
