use lowasc::cli::run;
use lowasc::fusion::{prod_fuse, ProbabilityMatrix};
use std::path::Path;
use std::process::Command;

fn lowasc(args: &[&str]) -> (i32, String) {
    let mut buf = Vec::new();
    let mut full = vec!["lowasc"];
    full.extend_from_slice(args);
    let code = run(full, &mut buf);
    (code, String::from_utf8(buf).unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn kb120_quantized_passes_the_small_gate() {
    let (code, out) = lowasc(&["compress", "--variant", "kb120", "--quantize"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("128KB budget: PASS"), "{out}");
    let (_, out) = lowasc(&["compress", "--variant", "baseline"]);
    assert!(out.contains("128KB budget: FAIL") && out.contains("20MB budget: PASS"), "{out}");
}

#[test]
fn fuse_delegates_to_prod_fusion() {
    let dir = tempfile::tempdir().unwrap();
    let classes = vec!["a".to_string(), "b".to_string()];
    let ids = vec!["x".to_string(), "y".to_string()];
    let p1 = ProbabilityMatrix::new("m1", classes.clone(), ids.clone(), vec![0.6, 0.4, 0.2, 0.8]).unwrap();
    let p2 = ProbabilityMatrix::new("m2", classes, ids, vec![0.5, 0.5, 0.9, 0.1]).unwrap();
    let (a, b, o) = (dir.path().join("a.csv"), dir.path().join("b.csv"), dir.path().join("f.csv"));
    p1.write_csv(&a).unwrap();
    p2.write_csv(&b).unwrap();
    let (code, out) = lowasc(&["fuse", s(&a), s(&b), "--out", s(&o)]);
    assert_eq!(code, 0);
    let expect = prod_fuse(&[&p1, &p2]).unwrap();
    assert_eq!(out, "clip_id,label\nx,a\ny,a\n");
    let text = std::fs::read_to_string(&o).unwrap();
    let first = text.lines().nth(1).unwrap();
    let v: Vec<f64> = first.split(',').skip(1).take(2).map(|t| t.parse().unwrap()).collect();
    assert!((v[0] - expect.row(0)[0]).abs() < 1e-12 && (v[1] - expect.row(0)[1]).abs() < 1e-12, "{first}");
    assert!(dir.path().join("f.csv.provenance.json").exists());
}

#[test]
fn scenario_report_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (d1, d2) = (dir.path().join("r1"), dir.path().join("r2"));
    let (code, out) = lowasc(&["report", "--scenario", "--seed", "3", "--out", s(&d1)]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(out.matches("transition at").count(), 5, "{out}");
    lowasc(&["report", "--scenario", "--seed", "3", "--out", s(&d2)]);
    for f in ["timeline.svg", "alarm_counts.svg", "alarm_ratios.svg", "ontology.svg", "report.json"] {
        assert!(std::fs::read(d1.join(f)).unwrap() == std::fs::read(d2.join(f)).unwrap(), "{f}");
    }
    let j: serde_json::Value = serde_json::from_slice(&std::fs::read(d1.join("report.json")).unwrap()).unwrap();
    assert_eq!(j["threshold"], 0.3);
    assert!(j["provenance"]["config_digest"].as_str().unwrap().len() == 64);
}

#[test]
fn pipeline_synth_extract_train_eval() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("corpus");
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "version = 1\nvariant = \"baseline\"\n[channels]\ninc1 = 4\ninc2 = 4\ninc3 = 4\ninc4 = 4\nfc1 = 8\n\
         [train]\nbatch_size = 6\nepochs_total = 2\nepochs_phase1 = 1\n[augment]\ncrop_frames = 24\nmask_count = 1\n",
    )
    .unwrap();
    let (code, out) = lowasc(&["synth", "--out", s(&root), "--train-per-class", "4", "--eval-per-class", "4", "--duration", "1.0"]);
    assert_eq!(code, 0, "{out}");
    let manifest = root.join("manifest.tsv");
    let feats = dir.path().join("mel.bin");
    let (code, out) = lowasc(&["extract", "--manifest", s(&manifest), "--kind", "mel", "--out", s(&feats)]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("128x32x3") || out.contains("128×32×3"), "{out}");

    let model = dir.path().join("m.bin");
    let args = ["--config", s(&cfg), "train", "--manifest", s(&manifest), "--features", s(&feats), "--out", s(&model), "--seed", "5"];
    let (code, out) = lowasc(&args);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("s4\tunseen"), "{out}");
    assert!(dir.path().join("m.bin.log.jsonl").exists());
    let first = std::fs::read(&model).unwrap();
    let (code, _) = lowasc(&args);
    assert_eq!(code, 0);
    assert!(std::fs::read(&model).unwrap() == first, "same seed, same model file");

    let ev = dir.path().join("eval");
    let (code, out) = lowasc(&["eval", "--weights", s(&model), "--manifest", s(&manifest), "--features", s(&feats), "--out", s(&ev)]);
    assert_eq!(code, 0, "{out}");
    assert!(out.starts_with("device\tseen"), "{out}");
    for f in ["breakdown.json", "breakdown.tsv", "probs.csv"] {
        assert!(ev.join(f).exists(), "{f}");
    }

    let q = dir.path().join("q.bin");
    let (code, out) = lowasc(&["compress", "--weights", s(&model), "--quantize", "--out", s(&q)]);
    assert_eq!(code, 0, "{out}");
    let (code, _) = lowasc(&["eval", "--weights", s(&q), "--manifest", s(&manifest), "--features", s(&feats)]);
    assert_eq!(code, 0);
}

#[test]
fn exit_codes_by_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.tsv");
    assert_eq!(lowasc(&["extract", "--manifest", s(&missing), "--out", "x.bin"]).0, 3);
    assert_eq!(lowasc(&["extract", "--manifest", s(&missing)]).0, 2);
    assert_eq!(lowasc(&["compress", "--variant", "huge"]).0, 2);
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "version = 7\n").unwrap();
    assert_eq!(lowasc(&["--config", s(&bad), "compress"]).0, 2);
}

#[test]
fn binary_reports_exit_status() {
    let exe = env!("CARGO_BIN_EXE_lowasc");
    let ok = Command::new(exe).args(["compress", "--variant", "rd64"]).output().unwrap();
    assert!(ok.status.success());
    let bad = Command::new(exe).args(["fuse", "/nonexistent/a.csv"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("error:"));
}
