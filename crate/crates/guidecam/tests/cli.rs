mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use guidecam::npy::load_npy;
use serde_json::json;

fn guidecam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_guidecam"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn png_text(path: &Path) -> Vec<(String, String)> {
    let decoder = png::Decoder::new(std::io::BufReader::new(fs::File::open(path).unwrap()));
    let reader = decoder.read_info().unwrap();
    reader
        .info()
        .uncompressed_latin1_text
        .iter()
        .map(|t| (t.keyword.clone(), t.text.clone()))
        .collect()
}

fn png_size(path: &Path) -> (u32, u32) {
    let decoder = png::Decoder::new(std::io::BufReader::new(fs::File::open(path).unwrap()));
    let info = decoder.read_info().unwrap().info().clone();
    (info.width, info.height)
}

#[test]
fn explain_writes_map_and_overlay() {
    let out = tempfile::tempdir().unwrap();
    let bundle = common::fixture("collection/a.bundle");
    let o = guidecam(&[
        "explain",
        s(&bundle),
        "--method",
        "guided",
        "--out",
        s(out.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let npy = out.path().join("a.saliency.npy");
    let overlay = out.path().join("a.overlay.png");
    let map = load_npy(&npy).unwrap();
    assert_eq!(map.shape(), &[32, 32]);
    assert!(map.data().iter().all(|v| (0.0..=1.0).contains(v)));
    assert_eq!(png_size(&overlay), (32, 32));
    let text = png_text(&overlay);
    assert!(text.contains(&("colormap".into(), "viridis".into())));
    assert!(text.contains(&("alpha".into(), "0.5".into())));
    assert!(text.contains(&("method".into(), "guided".into())));
}

#[test]
fn gradcam_outputs_carry_an_infix() {
    let out = tempfile::tempdir().unwrap();
    let bundle = common::fixture("collection/a.bundle");
    let o = guidecam(&[
        "explain",
        s(&bundle),
        "--method",
        "gradcam",
        "--alpha",
        "0.3",
        "--out",
        s(out.path()),
    ]);
    assert!(o.status.success());
    assert!(out.path().join("a.gradcam.saliency.npy").is_file());
    assert!(out.path().join("a.gradcam.overlay.png").is_file());
    assert!(!out.path().join("a.saliency.npy").exists());
    assert!(png_text(&out.path().join("a.gradcam.overlay.png"))
        .contains(&("alpha".into(), "0.3".into())));
}

#[test]
fn corrupt_bundle_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("x.bundle");
    fs::create_dir(&bundle).unwrap();
    fs::write(bundle.join("manifest.json"), "{").unwrap();
    let o = guidecam(&["explain", s(&bundle), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));

    let o = guidecam(&["explain", s(&dir.path().join("missing.bundle"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(guidecam(&[]).status.code(), Some(2));
    assert_eq!(
        guidecam(&["explain", "x", "--method", "scorecam"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        guidecam(&["evaluate", "cfg.json", "--steps", "many"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(guidecam(&["--help"]).status.code(), Some(0));
}

fn write_config(dir: &Path, extra: serde_json::Value) -> PathBuf {
    let mut cfg = json!({
        "collection": common::fixture("collection"),
        "scorer": common::fixture("stub_scorer.json"),
        "output_dir": "out",
        "metrics": { "steps": 10 }
    });
    for (k, v) in extra.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    let path = dir.join("run.json");
    fs::write(&path, cfg.to_string()).unwrap();
    path
}

#[test]
fn evaluate_one_method() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), json!({ "methods": ["guided"] }));
    let o = guidecam(&["evaluate", s(&cfg)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[3].starts_with("guided,aggregate,"));
    assert!(!out.join("comparison.csv").exists());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["reports"][0]["item_count"], 3);
    assert_eq!(
        report["reports"][0]["settings"]["increase_convention"],
        "count_fraction"
    );
}

#[test]
fn evaluate_both_methods_compares_them() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), json!({}));
    let o = guidecam(&["evaluate", s(&cfg), "--workers", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("out/comparison.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("metric,gradcam,guided,delta"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 9);
    for row in &rows {
        if let (Ok(a), Ok(b), Ok(d)) = (
            row[1].parse::<f64>(),
            row[2].parse::<f64>(),
            row[3].parse::<f64>(),
        ) {
            assert!((b - a - d).abs() < 1e-12, "{row:?}");
        }
    }
}

#[test]
fn evaluate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), json!({ "seed": 11, "subsample": 2 }));
    let read = |name: &str| fs::read(dir.path().join("out").join(name)).unwrap();
    assert!(guidecam(&["evaluate", s(&cfg), "--workers", "1"])
        .status
        .success());
    let first = (read("report.csv"), read("report.json"));
    assert!(guidecam(&["evaluate", s(&cfg), "--workers", "4"])
        .status
        .success());
    assert_eq!(first, (read("report.csv"), read("report.json")));
    assert_eq!(
        String::from_utf8(first.0).unwrap().lines().count(),
        1 + 2 * 3
    );
}

#[test]
fn evaluate_flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), json!({}));
    let alt = dir.path().join("alt");
    let o = guidecam(&[
        "evaluate",
        s(&cfg),
        "--method",
        "gradcam",
        "--tau",
        "0.25",
        "--steps",
        "4",
        "--out",
        s(&alt),
    ]);
    assert!(o.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(alt.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["reports"].as_array().unwrap().len(), 1);
    assert_eq!(report["reports"][0]["settings"]["tau"], 0.25);
    assert_eq!(report["reports"][0]["settings"]["steps"], 4);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = [
        json!({ "methods": [] }),
        json!({ "metrics": { "tau": 2.0 } }),
        json!({ "unknown": 1 }),
    ];
    for extra in bad {
        let cfg = write_config(dir.path(), extra.clone());
        assert_eq!(
            guidecam(&["evaluate", s(&cfg)]).status.code(),
            Some(2),
            "{extra}"
        );
    }
    let cfg = write_config(dir.path(), json!({}));
    assert_eq!(
        guidecam(&["evaluate", s(&cfg), "--tau", "0"]).status.code(),
        Some(2)
    );
    assert_eq!(
        guidecam(&["evaluate", s(&dir.path().join("absent.json"))])
            .status
            .code(),
        Some(2)
    );
    let cfg = write_config(
        dir.path(),
        json!({ "collection": "/nonexistent/collection" }),
    );
    assert_eq!(guidecam(&["evaluate", s(&cfg)]).status.code(), Some(2));
}

#[test]
fn curves_csv_and_plot() {
    let out = tempfile::tempdir().unwrap();
    let bundle = common::fixture("collection/b.bundle");
    let scorer = common::fixture("stub_scorer.json");
    let o = guidecam(&[
        "curves",
        s(&bundle),
        "--scorer",
        s(&scorer),
        "--steps",
        "25",
        "--out",
        s(out.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.path().join("b.curves.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("fraction,insertion_score,deletion_score")
    );
    assert_eq!(lines.count(), 26);
    let plot = out.path().join("b.curves.png");
    assert_eq!(png_size(&plot), (480, 320));
}

#[test]
fn constant_scorer_gives_constant_aucs() {
    let dir = tempfile::tempdir().unwrap();
    let stub = dir.path().join("constant.json");
    // softmax([ln 0.7, ln 0.3]) = [0.7, 0.3] for every image
    let l0 = (0.7f32).ln() - (0.3f32).ln();
    let mut logits = vec![0.0f32; 10];
    let b = guidecam::bundle::load_bundle(&common::fixture("collection/c.bundle")).unwrap();
    logits[b.class_index()] = l0;
    let rest = (0.3f32 / 9.0).ln() - (0.7f32).ln() + l0;
    for (i, v) in logits.iter_mut().enumerate() {
        if i != b.class_index() {
            *v = rest;
        }
    }
    fs::write(
        &stub,
        json!({ "table": {}, "fallback": { "logits": logits } }).to_string(),
    )
    .unwrap();
    let bundle = common::fixture("collection/c.bundle");
    let out = guidecam::cli::cmd_curves(
        &bundle,
        &stub,
        guidecam_core::Method::GuidedCam,
        20,
        dir.path(),
    )
    .unwrap();
    assert!((out.insertion.auc - 0.7).abs() < 1e-6);
    assert!((out.deletion.auc - 0.7).abs() < 1e-6);
    assert!(out.plot.is_file());
}

#[test]
fn curves_with_a_real_graph() {
    let out = tempfile::tempdir().unwrap();
    let bundle = common::fixture("collection/a.bundle");
    let model = common::fixture("tiny_cnn.onnx");
    let o = guidecam(&[
        "curves",
        s(&bundle),
        "--scorer",
        s(&model),
        "--method",
        "gradcam",
        "--steps",
        "8",
        "--out",
        s(out.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.path().join("a.gradcam.curves.csv").is_file());
    assert!(out.path().join("a.gradcam.curves.png").is_file());
    let o = guidecam(&[
        "curves",
        s(&bundle),
        "--scorer",
        s(&common::fixture("mnist_like.onnx")),
        "--out",
        s(out.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
