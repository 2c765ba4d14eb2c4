mod common;

use std::fs;

use common::{artifacts, ok, radmix, recipe, workspace};

#[test]
fn end_to_end_recipe_writes_every_artifact() {
    let ws = workspace();
    let dir = ws.path();
    recipe(dir, &[]);
    for f in [
        "work/manifest.json",
        "work/vocab.txt",
        "work/vocab.txt.meta.json",
        "work/mix/plan.json",
        "work/mix/stream.jsonl",
        "work/mix/chunks.jsonl",
        "work/train.rec",
        "work/train.rec.meta.json",
        "work/pre.ckpt",
        "work/pre.ckpt.loss.csv",
        "work/ft.ckpt",
        "work/preds.jsonl",
        "work/metrics.json",
    ] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("work/train.rec.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["command"], "instances");
    assert_eq!(meta["seed"], 11);
    assert_eq!(meta["details"]["mode"], "simultaneous");
    assert_eq!(meta["inputs"].as_array().unwrap().len(), 3);
    let curve = fs::read_to_string(dir.join("work/pre.ckpt.loss.csv")).unwrap();
    assert_eq!(curve.lines().count(), 5);

    // two runs per system are enough to exercise the reporting commands
    fs::copy(dir.join("work/metrics.json"), dir.join("m2.json")).unwrap();
    let out = ok(dir, &["report", "--metrics", "work/metrics.json", "--metrics", "m2.json"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("tiny"));
    let out = ok(
        dir,
        &["--format", "json", "sigtest", "--a", "work/metrics.json", "--a", "m2.json", "--b", "m2.json", "--b", "m2.json"],
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["p_value"], 1.0);
}

#[test]
fn repeated_runs_are_byte_identical_across_thread_counts() {
    let a = workspace();
    let b = workspace();
    recipe(a.path(), &["--threads", "1"]);
    recipe(b.path(), &["--threads", "3"]);
    let (fa, fb) = (artifacts(a.path()), artifacts(b.path()));
    assert_eq!(fa.len(), fb.len());
    for ((na, ba), (nb, bb)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        assert!(ba == bb, "{na} differs between runs");
    }
}

#[test]
fn task_adaptive_needs_no_general_corpus() {
    let ws = workspace();
    let dir = ws.path();
    let c = ["--config", "config.toml"];
    ok(dir, &[&c[..], &["clean", "--input", "raw/domain.jsonl", "--out", "d.jsonl"]].concat());
    ok(dir, &[&c[..], &["vocab-train", "--input", "d.jsonl", "--out", "v.txt"]].concat());
    ok(
        dir,
        &[&c[..], &["instances", "--mode", "task-adaptive", "--vocab", "v.txt", "--domain", "d.jsonl", "--out", "t.rec"]].concat(),
    );
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("t.rec.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["details"]["mode"], "task-adaptive");
    assert_eq!(meta["details"]["config"]["dupe_factor"], 10);
    assert!(meta["details"]["stats"]["instances"].as_u64().unwrap() > 0);

    let out = radmix(
        dir,
        &[&c[..], &["instances", "--mode", "simultaneous", "--vocab", "v.txt", "--domain", "d.jsonl", "--out", "s.rec"]].concat(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("general corpus"));
    assert!(!dir.join("s.rec").exists());
}

#[test]
fn resumed_pretraining_matches_an_uninterrupted_run() {
    let ws = workspace();
    let dir = ws.path();
    let c = ["--config", "config.toml"];
    ok(dir, &[&c[..], &["clean", "--input", "raw/domain.jsonl", "--out", "d.jsonl"]].concat());
    ok(dir, &[&c[..], &["vocab-train", "--input", "d.jsonl", "--out", "v.txt"]].concat());
    ok(
        dir,
        &[&c[..], &["instances", "--mode", "task-adaptive", "--vocab", "v.txt", "--domain", "d.jsonl", "--out", "t.rec"]].concat(),
    );
    let pre = |extra: &[&str]| {
        let base = ["pretrain-tiny", "--records", "t.rec", "--vocab", "v.txt"];
        ok(dir, &[&c[..], &base[..], extra].concat());
    };
    pre(&["--steps", "4", "--out", "full.ckpt"]);
    pre(&["--steps", "2", "--out", "half.ckpt"]);
    pre(&["--steps", "2", "--resume", "half.ckpt", "--out", "resumed.ckpt"]);
    assert_eq!(fs::read(dir.join("full.ckpt")).unwrap(), fs::read(dir.join("resumed.ckpt")).unwrap());

    // a different vocabulary is refused
    ok(dir, &[&c[..], &["vocab-train", "--input", "d.jsonl", "--vocab-size", "500", "--out", "v2.txt"]].concat());
    let out = radmix(dir, &[&c[..], &["pretrain-tiny", "--records", "t.rec", "--vocab", "v2.txt", "--out", "x.ckpt"]].concat());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("vocabulary hash mismatch"));
}

#[test]
fn usage_and_input_errors_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(radmix(dir.path(), &["clean"]).status.code(), Some(2));
    assert_eq!(radmix(dir.path(), &["no-such-command"]).status.code(), Some(2));
    let out = radmix(dir.path(), &["--format", "json", "dedup", "--input", "missing.jsonl", "--out", "o.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "io");

    fs::write(dir.path().join("bad.txt"), "some text\n").unwrap();
    let out = radmix(dir.path(), &["clean", "--input", "bad.txt", "--out", "o.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--source"));
}

#[test]
fn clean_reads_txt_with_a_source_tag() {
    let dir = tempfile::tempdir().unwrap();
    let long = "Sol lateral ventrikül normal genişliktedir ve orta hat yapıları santral konumdadır. ".repeat(2);
    fs::write(dir.path().join("notes.txt"), format!("{long}\n\nkısa\n\n{long}x\n")).unwrap();
    ok(
        dir.path(),
        &["clean", "--input", "notes.txt", "--source", "radiology-theses", "--out", "c.jsonl"],
    );
    let text = fs::read_to_string(dir.path().join("c.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.contains("\"source\":\"radiology-theses\""));
    let out = ok(dir.path(), &["stats", "--input", "c.jsonl", "--out", "manifest.json"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("Radiology"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["created"], "2023-11-14T22:13:20Z");
}
