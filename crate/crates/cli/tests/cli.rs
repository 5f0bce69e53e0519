use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use flowaug::flow::{Dataset, FlowSample};
use flowaug::RngStream;
use serde_json::Value;

fn flowaug(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowaug")).args(args).output().unwrap()
}

fn ok_json(args: &[&str]) -> Value {
    let out = flowaug(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn blobs(path: &Path, count: usize) {
    let mut rng = RngStream::new(5);
    let samples = (0..count)
        .map(|i| {
            let label = i % 2;
            let centre = if label == 0 { 300.0 } else { 1100.0 };
            let sizes: Vec<u32> = (0..6).map(|_| rng.normal(centre, 60.0).max(1.0) as u32).collect();
            let dirs: Vec<i8> = (0..6).map(|_| if rng.bernoulli(0.5) { 1 } else { -1 }).collect();
            let iats: Vec<f64> = (0..6).map(|t| if t == 0 { 0.0 } else { rng.uniform_in(0.0, 0.05) }).collect();
            FlowSample::from_prefix(&sizes, &dirs, &iats, 6, label).unwrap()
        })
        .collect();
    let d = Dataset::new(samples, vec!["small".into(), "large".into()]).unwrap();
    flowaug::dataio::save(&d, path).unwrap();
}

fn small_synth(dir: &Path) -> PathBuf {
    let p = dir.join("synth.jsonl");
    ok_json(&["synth", "-o", s(&p), "--classes", "3", "--total", "240", "--series-len", "8", "--seed", "2"]);
    p
}

#[test]
fn version_reports_formats() {
    let v = ok_json(&["--version"]);
    assert_eq!(v["toolkit"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["formats"]["flow_record"], 1);
}

#[test]
fn synth_counts_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    let v = ok_json(&["synth", "-o", s(&a), "--seed", "7"]);
    let counts: Vec<u64> = v["class_counts"].as_object().unwrap().values().map(|c| c.as_u64().unwrap()).collect();
    assert_eq!(counts, [1707, 854, 569, 427, 341, 284, 244, 213, 190, 171]);
    ok_json(&["synth", "-o", s(&b), "--seed", "7"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let v = ok_json(&["synth", "-o", s(&b), "--zipf", "0", "--total", "600", "--classes", "6"]);
    assert!(v["class_counts"].as_object().unwrap().values().all(|c| c == 100));
}

#[test]
fn augment_identity_flip_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let input = small_synth(dir.path());
    let out = |name: &str| dir.path().join(name);
    ok_json(&["augment", "-i", s(&input), "-o", s(&out("id")), "--aug", "identity"]);
    assert_eq!(fs::read(&input).unwrap(), fs::read(out("id")).unwrap());
    ok_json(&["augment", "-i", s(&input), "-o", s(&out("f1")), "--aug", "flip"]);
    ok_json(&["augment", "-i", s(&out("f1")), "-o", s(&out("f2")), "--aug", "flip"]);
    assert_ne!(fs::read(&input).unwrap(), fs::read(out("f1")).unwrap());
    assert_eq!(fs::read(&input).unwrap(), fs::read(out("f2")).unwrap());
    for aug in ["cutmix", "gaussian_noise sigma_rel=0.3", "wrap p_edit=0.3"] {
        ok_json(&["augment", "-i", s(&input), "-o", s(&out("x")), "--aug", aug, "--seed", "4"]);
        ok_json(&["augment", "-i", s(&input), "-o", s(&out("y")), "--aug", aug, "--seed", "4"]);
        assert_eq!(fs::read(out("x")).unwrap(), fs::read(out("y")).unwrap(), "{aug}");
        ok_json(&["augment", "-i", s(&input), "-o", s(&out("z")), "--aug", aug, "--seed", "5"]);
        assert_ne!(fs::read(out("x")).unwrap(), fs::read(out("z")).unwrap(), "{aug}");
    }
    let bad = flowaug(&["augment", "-i", s(&input), "-o", s(&out("w")), "--aug", "mixup"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("packet_loss"));
    let missing = flowaug(&["augment", "-i", "/nonexistent.jsonl", "-o", s(&out("w")), "--aug", "flip"]);
    assert!(!missing.status.success());
    assert!(missing.stdout.is_empty());
}

#[test]
fn train_reports_and_rejects_unknown_methods() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("blobs.jsonl");
    blobs(&data, 300);
    let model = dir.path().join("model.txt");
    let r = ok_json(&["train", "-d", s(&data), "--epochs", "20", "--save-model", s(&model)]);
    assert!(r["weighted_f1"].as_f64().unwrap() >= 0.95, "{r}");
    assert!(fs::read_to_string(&model).unwrap().starts_with("flowaug-mlp 1"));
    let again = ok_json(&["train", "-d", s(&data), "--epochs", "20"]);
    assert_eq!(r, again);

    let r0 = ok_json(&["train", "-d", s(&data), "--epochs", "0", "--seed", "3"]);
    assert!(r0["accuracy"].as_f64().unwrap() < 0.8, "{r0}");

    let bad = flowaug(&["train", "-d", s(&data), "--method", "mixup"]);
    assert!(!bad.status.success());
    let err = String::from_utf8_lossy(&bad.stderr);
    for name in ["noaug", "noaug_nosampler", "translation", "cutmix"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    let out = dir.path().join("o.jsonl");
    fs::write(&cfg, format!("seed = 3\n[synth]\nclasses = 4\ntotal = 40\nzipf = 0.0\noutput = \"{}\"\n", s(&out))).unwrap();
    let v = ok_json(&["--config", s(&cfg), "synth"]);
    assert_eq!(v["config"]["classes"], 4);
    assert_eq!(v["config"]["seed"], 3);
    let v = ok_json(&["--config", s(&cfg), "synth", "--classes", "2", "--seed", "9"]);
    assert_eq!(v["config"]["classes"], 2);
    assert_eq!(v["config"]["seed"], 9);
    fs::write(&cfg, "[synth]\nbogus = 1\n").unwrap();
    assert!(!flowaug(&["--config", s(&cfg), "synth", "-o", s(&out)]).status.success());
}

fn write_plan(dir: &Path, data: &Path, methods: &str, seeds: &str, epochs: usize) -> PathBuf {
    let p = dir.join("plan.toml");
    fs::write(
        &p,
        format!("methods = {methods}\nseeds = {seeds}\n[data]\npath = \"{}\"\n[train]\nepochs = {epochs}\nbatch_size = 16\n", s(data)),
    )
    .unwrap();
    p
}

#[test]
fn bench_grid_parallelism_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_synth(dir.path());
    let plan = write_plan(dir.path(), &data, r#"["noaug", "translation"]"#, "[1, 2]", 3);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let v = ok_json(&["bench", "-p", s(&plan), "-o", s(&a), "-j", "1"]);
    assert_eq!(v["complete"], true);
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert_eq!(text.lines().next(), Some("method,seed,weighted_f1"));
    ok_json(&["bench", "-p", s(&plan), "-o", s(&b), "-j", "3"]);
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let m: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("a.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["plan_hash"], v["plan_hash"]);
    assert_eq!(m["effective_config"]["parallelism"], 1);
    assert_eq!(m["effective_config"]["plan"]["train"]["epochs"], 3);

    let slow = flowaug(&["bench", "-p", s(&plan), "-o", s(&dir.path().join("c.csv")), "--cell-time-budget", "1e-9"]);
    assert!(!slow.status.success());
    let err = String::from_utf8_lossy(&slow.stderr);
    assert!(err.contains("4 cell(s) failed") && err.contains("(translation, 2)"), "{err}");
    assert!(!dir.path().join("c.csv").exists());
    let m: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("c.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["failures"].as_array().unwrap().len(), 4);

    let bad = write_plan(dir.path(), &data, r#"["noaug", "noaug"]"#, "[1, 2]", 1);
    assert!(!flowaug(&["bench", "-p", s(&bad), "-o", s(&a)]).status.success());
}

#[test]
fn bench_resumes_after_being_killed() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.jsonl");
    ok_json(&["synth", "-o", s(&data), "--classes", "3", "--total", "900", "--seed", "1"]);
    let plan = write_plan(dir.path(), &data, r#"["noaug", "window_mask", "flip"]"#, "[0, 1, 2, 3]", 12);
    let full = dir.path().join("full.csv");
    ok_json(&["bench", "-p", s(&plan), "-o", s(&full), "-j", "1"]);

    let out = dir.path().join("resumed.csv");
    let ck = dir.path().join("ck.csv");
    let mut child = Command::new(env!("CARGO_BIN_EXE_flowaug"))
        .args(["bench", "-p", s(&plan), "-o", s(&out), "-j", "1", "--checkpoint", s(&ck)])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let start = Instant::now();
    let rows = |p: &Path| fs::read_to_string(p).map(|t| t.lines().count().saturating_sub(1)).unwrap_or(0);
    while rows(&ck) < 2 && start.elapsed() < Duration::from_secs(120) {
        std::thread::sleep(Duration::from_millis(5));
    }
    child.kill().unwrap();
    child.wait().unwrap();
    let done = rows(&ck);
    assert!(done >= 2, "checkpoint rows: {done}");
    assert!(!out.exists() || done == 12);

    let v = ok_json(&["bench", "-p", s(&plan), "-o", s(&out), "-j", "2", "--checkpoint", s(&ck)]);
    assert!(v["resumed"].as_u64().unwrap() >= 2);
    assert_eq!(fs::read(&full).unwrap(), fs::read(&out).unwrap());

    let part = dir.path().join("part.csv");
    let v = ok_json(&["bench", "-p", s(&plan), "-o", s(&part), "--max-new-cells", "5"]);
    assert_eq!(v["complete"], false);
    assert_eq!(v["pending"], 7);
    assert!(!part.exists());
    ok_json(&["bench", "-p", s(&plan), "-o", s(&part)]);
    assert_eq!(fs::read(&full).unwrap(), fs::read(&part).unwrap());
}

#[test]
fn cdchart_reports_groups_and_rejects_bad_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    let mut text = String::from("method,seed,weighted_f1\n");
    for m in ["a", "b", "c"] {
        for seed in 0..10 {
            let v = match m {
                "a" => 0.9,
                "b" => 0.8,
                _ => 0.7,
            };
            text.push_str(&format!("{m},{seed},{v}\n"));
        }
    }
    fs::write(&csv, &text).unwrap();
    let r = ok_json(&["cdchart", "-i", s(&csv), "--baseline", "c"]);
    assert_eq!(r["groups"], serde_json::json!([["a", "b"], ["b", "c"]]));
    assert_eq!(r["friedman_chi2"], 20.0);
    assert!((r["cd"].as_f64().unwrap() - 2.343 * 0.2f64.sqrt()).abs() < 1e-12);
    let svg = fs::read_to_string(dir.path().join("r.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("group-bar"));
    let json: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(json, r);

    let same = dir.path().join("same.csv");
    let mut text = String::from("method,seed,weighted_f1\n");
    for m in ["x", "y", "z", "w"] {
        for seed in 0..5 {
            text.push_str(&format!("{m},{seed},0.5\n"));
        }
    }
    fs::write(&same, text).unwrap();
    let r = ok_json(&["cdchart", "-i", s(&same), "--svg", s(&dir.path().join("s.svg")), "--json", s(&dir.path().join("s.json"))]);
    assert_eq!(r["groups"].as_array().unwrap().len(), 1);
    assert!((r["p_value"].as_f64().unwrap() - 1.0).abs() < 1e-12, "{r}");

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "method,seed,weighted_f1\na,0,0.5\na,1,0.4\nb,0,0.3\nb,one,0.2\n").unwrap();
    let out = flowaug(&["cdchart", "-i", s(&bad)]);
    assert!(!out.status.success());
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 5"), "{}", String::from_utf8_lossy(&out.stderr));
}
