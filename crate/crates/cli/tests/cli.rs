use std::path::Path;
use std::process::{Command, Output};

use cad_core::datagen::SynthConfig;
use cad_core::features::{write_feature_file, FeatureStream, FrameSpec};
use cad_core::io::SplitManifest;
use cad_core::labels::{
    intervals_to_frame_labels, read_annotations, write_annotations, ActivityLabel, AnnotationInterval, LabelScheme,
};
use cad_core::metrics::write_trace_csv;
use cad_core::models::{Arch, ModelConfig};
use cad_core::training::TrainConfig;
use ndarray::Array2;

fn cad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cad")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = cad(args);
    assert!(
        out.status.success(),
        "cad {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tiny_corpus(dir: &Path) -> std::path::PathBuf {
    let cfg = SynthConfig {
        n_instructors: 4,
        n_withheld: 1,
        sessions_per_instructor: 2,
        session_minutes: 0.1,
        ..SynthConfig::default()
    };
    let cfg_path = dir.join("synth.json");
    std::fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let corpus = dir.join("corpus");
    ok(&["synth", "--config", s(&cfg_path), "--seed", "3", "--out", s(&corpus)]);
    corpus.join("manifest.json")
}

#[test]
fn full_pipeline_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = tiny_corpus(dir.path());
    let m = SplitManifest::load(&manifest).unwrap();
    assert_eq!(m.test2.len(), 2);

    let feats = dir.path().join("feats");
    ok(&["features", "--manifest", s(&manifest), "--out", s(&feats)]);
    assert!(feats.join("features.json").exists());

    let mut model = ModelConfig::new(Arch::Bigru, 0, 4, 1, 4);
    model.dropout_rate = 0.1;
    let mut tc = TrainConfig::new(model, LabelScheme::Four);
    tc.max_epochs = 2;
    tc.chunk_len = Some(200);
    let tc_path = dir.path().join("train.json");
    std::fs::write(&tc_path, serde_json::to_string(&tc).unwrap()).unwrap();

    let mut logs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        ok(&[
            "train",
            "--config",
            s(&tc_path),
            "--seed",
            "7",
            "--manifest",
            s(&manifest),
            "--features",
            s(&feats),
            "--out",
            s(&out),
        ]);
        logs.push(std::fs::read(out.join("train_log.csv")).unwrap());
        assert!(out.join("model.ckpt").exists());
    }
    assert_eq!(logs[0], logs[1]);
    assert_eq!(String::from_utf8_lossy(&logs[0]).lines().count(), 3);

    let ckpt = dir.path().join("a/model.ckpt");
    let wav = manifest.parent().unwrap().join(&m.test1[0].wav);
    let pred = dir.path().join("pred");
    ok(&["predict", "--checkpoint", s(&ckpt), "--wav", s(&wav), "--out", s(&pred)]);
    let stem = wav.file_stem().unwrap().to_str().unwrap();
    let trace = std::fs::read_to_string(pred.join(format!("{stem}.trace.csv"))).unwrap();
    assert_eq!(trace.lines().count(), 600 + 1);

    let mismatch = cad(&[
        "predict",
        "--checkpoint",
        s(&ckpt),
        "--wav",
        s(&wav),
        "--recipe",
        "mel",
        "--out",
        s(&pred),
    ]);
    assert!(!mismatch.status.success());
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("recipe"));

    let report = dir.path().join("eval");
    ok(&[
        "eval",
        "--manifest",
        s(&manifest),
        "--split",
        "test2",
        "--checkpoint",
        s(&ckpt),
        "--features",
        s(&feats),
        "--out",
        s(&report),
    ]);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["frames"], 1200);
    assert!(report.join("confusion.csv").exists() && report.join("pr.svg").exists());
}

#[test]
fn eval_of_perfect_posteriors_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = tiny_corpus(dir.path());
    let base = manifest.parent().unwrap();
    let m = SplitManifest::load(&manifest).unwrap();
    let preds = dir.path().join("perfect");
    std::fs::create_dir_all(&preds).unwrap();
    for r in &m.test1 {
        let annos = read_annotations(base.join(&r.annotations)).unwrap();
        let labels = intervals_to_frame_labels(&annos, 600, 10.0, LabelScheme::Nine, false).unwrap();
        let post = Array2::from_shape_fn((600, 9), |(t, c)| if labels.labels[t] == c { 1.0 } else { 0.0 });
        let stream = FeatureStream::new("posteriors", FrameSpec::new(10.0, 10.0).unwrap(), post);
        write_feature_file(preds.join(format!("{}.posteriors.feat", r.session)), &stream).unwrap();
    }
    let out = dir.path().join("report");
    let stdout = ok(&[
        "eval",
        "--manifest",
        s(&manifest),
        "--predictions",
        s(&preds),
        "--scheme",
        "9",
        "--out",
        s(&out),
    ]);
    assert!(stdout.contains("accuracy 1.0000"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["accuracy"], 1.0);
    assert_eq!(json["error_rate"], 0.0);
}

#[test]
fn aggregate_reports_minutes() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path();
    let anno = |label| {
        vec![AnnotationInterval {
            start_s: 0.0,
            end_s: 60.0,
            label,
        }]
    };
    write_annotations(base.join("x.csv"), &anno(ActivityLabel::G)).unwrap();
    write_annotations(base.join("y.csv"), &anno(ActivityLabel::L)).unwrap();
    let manifest = serde_json::json!({
        "seed": 0, "withheld_instructors": [1], "ratios": [0.68, 0.16, 0.16],
        "train": [], "dev": [],
        "test1": [{"session": "x", "instructor": 0, "wav": "x.wav", "annotations": "x.csv"}],
        "test2": [{"session": "y", "instructor": 1, "wav": "y.wav", "annotations": "y.csv"}],
    });
    std::fs::write(base.join("manifest.json"), manifest.to_string()).unwrap();
    let preds = base.join("preds");
    std::fs::create_dir_all(&preds).unwrap();
    write_trace_csv(preds.join("x.trace.csv"), &[6; 6000], None, 10.0, LabelScheme::Nine).unwrap();

    let out = base.join("agg.json");
    ok(&[
        "aggregate",
        "--manifest",
        s(&base.join("manifest.json")),
        "--predictions",
        s(&preds),
        "--out",
        s(&out),
    ]);
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["sessions"][0]["predicted_minutes"][6], 1.0);
    assert_eq!(r["rmse_minutes"][6], 0.0);
    assert!(out.with_extension("svg").exists());
}

#[test]
fn usage_errors_exit_non_zero() {
    let out = cad(&["train", "--bogus"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    let out = cad(&["frobnicate"]);
    assert!(!out.status.success());

    let dir = tempfile::tempdir().unwrap();
    let out = cad(&[
        "features",
        "--manifest",
        s(&dir.path().join("missing.json")),
        "--out",
        s(dir.path()),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));
}

#[test]
fn split_withholds_instructors() {
    let dir = tempfile::tempdir().unwrap();
    let sessions: Vec<serde_json::Value> = (0..9)
        .flat_map(|i| {
            (0..4).map(move |j| {
                serde_json::json!({"session": format!("i{i}s{j}"), "instructor": i, "wav": "a.wav", "annotations": "a.csv"})
            })
        })
        .collect();
    let list = dir.path().join("sessions.json");
    std::fs::write(&list, serde_json::to_string(&sessions).unwrap()).unwrap();
    let out = dir.path().join("manifest.json");
    ok(&["split", "--sessions", s(&list), "--seed", "4", "--out", s(&out)]);
    let m = SplitManifest::load(&out).unwrap();
    assert_eq!(m.withheld_instructors.len(), 3);
    assert_eq!(m.test2.len(), 12);
    assert_eq!(m.train.len() + m.dev.len() + m.test1.len(), 24);
}
