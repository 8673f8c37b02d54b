use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_poolaudit"));
    c.arg("--quiet").env_remove("POOLAUDIT_MODE");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn poolaudit")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// One demo corpus shared by the tests in this file.
fn demo() -> &'static Path {
    static DIR: OnceLock<(tempfile::TempDir, PathBuf)> = OnceLock::new();
    &DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("demo");
        ok(&["demo", corpus.to_str().unwrap()]);
        (dir, corpus)
    })
    .1
}

fn config() -> String {
    demo().join("audit.json").to_string_lossy().into_owned()
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn version_lists_bundled_data() {
    let out = ok(&["--version"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("poolaudit "));
    for key in ["public_suffix_list", "stopwords", "category_map", "news_sites"] {
        assert!(text.contains(key), "{key} missing from {text}");
    }
}

#[test]
fn worker_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("w1"), tmp.path().join("w8"));
    ok(&["--workers", "1", "run", "-c", &config(), "--out", a.to_str().unwrap()]);
    ok(&["--workers", "8", "run", "-c", &config(), "--out", b.to_str().unwrap()]);
    let (da, db) = (read_dir(&a), read_dir(&b));
    assert_eq!(da.len(), 14);
    assert_eq!(da, db);
    let m = manifest(&a);
    assert_eq!(m["network"]["offline"], true);
    assert_eq!(m["filter"]["passed"], 3000);
}

#[test]
fn demo_regenerated_elsewhere_gives_identical_report() {
    let tmp = tempfile::tempdir().unwrap();
    let other = tmp.path().join("again");
    ok(&["demo", other.to_str().unwrap(), "--run"]);
    let here = tmp.path().join("here");
    ok(&["run", "-c", &config(), "--out", here.to_str().unwrap()]);
    assert_eq!(read_dir(&other.join("report")), read_dir(&here));
}

#[test]
fn staged_stats_then_report_matches_run() {
    let tmp = tempfile::tempdir().unwrap();
    let stats = tmp.path().join("stats.json");
    let staged = tmp.path().join("staged");
    let direct = tmp.path().join("direct");
    ok(&["stats", "-c", &config(), "--out", stats.to_str().unwrap()]);
    ok(&["report", "--from", stats.to_str().unwrap(), "--out", staged.to_str().unwrap()]);
    ok(&["run", "-c", &config(), "--out", direct.to_str().unwrap()]);
    assert_eq!(read_dir(&staged), read_dir(&direct));
}

#[test]
fn filtered_records_feed_back_in_as_shards() {
    let tmp = tempfile::tempdir().unwrap();
    let scored = tmp.path().join("scored.jsonl");
    let out = ok(&["filter", "-c", &config(), "--out", scored.to_str().unwrap(), "--passed-only"]);
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["written"], 3000);
    // Every passing record passes again under the same fixed threshold.
    let t = summary["resolved_threshold"].as_f64().unwrap().to_string();
    let again = tmp.path().join("again.jsonl");
    let out = ok(&[
        "filter",
        "-c",
        &config(),
        "--shards",
        scored.to_str().unwrap(),
        "--threshold",
        &t,
        "--out",
        again.to_str().unwrap(),
    ]);
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["passed"], 3000);
    assert_eq!(summary["scored"], 3000);
}

#[test]
fn disabling_an_analysis_removes_only_its_table() {
    let tmp = tempfile::tempdir().unwrap();
    let full = tmp.path().join("full");
    let fewer = tmp.path().join("fewer");
    ok(&["run", "-c", &config(), "--out", full.to_str().unwrap()]);
    let all = manifest(&full)["analyses"].as_array().unwrap().clone();
    let kept: Vec<&str> = all.iter().filter_map(|a| a.as_str()).filter(|a| *a != "categories").collect();
    ok(&["run", "-c", &config(), "--analyses", &kept.join(","), "--out", fewer.to_str().unwrap()]);
    let (mut a, b) = (read_dir(&full), read_dir(&fewer));
    assert!(a.remove("categories.csv").is_some());
    assert!(!b.contains_key("categories.csv"));
    a.remove("manifest.json");
    let mut b = b;
    b.remove("manifest.json");
    assert_eq!(a, b);
}

#[test]
fn flag_change_changes_config_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let hash = |extra: &[&str]| {
        let mut args = vec!["validate", "-c"];
        let c = config();
        args.push(&c);
        args.extend_from_slice(extra);
        let out = ok(&args);
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        v["config_hash"].as_str().unwrap().to_string()
    };
    let base = hash(&[]);
    assert_eq!(base, hash(&[]));
    assert_ne!(base, hash(&["--top-frac", "0.2"]));
    assert_ne!(base, hash(&["--strict-ties"]));
    drop(tmp);
}

#[test]
fn threshold_and_top_frac_together_is_a_config_error() {
    let out = run(&["validate", "--shards", "/nonexistent/*.jsonl", "--threshold", "0.28", "--top-frac", "0.3"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("mutually exclusive"), "{err}");
}

#[test]
fn config_errors_are_reported_together() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    std::fs::write(&cfg, r#"{"shards": ["missing/*.jsonl"], "embeddings": ["nope.paem"], "analyses": ["bogus"]}"#)
        .unwrap();
    let out = run(&["validate", "-c", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for needle in ["missing", "nope.paem", "bogus"] {
        assert!(err.contains(needle), "{needle} not in {err}");
    }
}

#[test]
fn empty_config_file_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("empty.json");
    std::fs::write(&cfg, "").unwrap();
    let out = run(&["validate", "-c", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no config"));
}

#[test]
fn missing_fixture_exits_with_its_own_code() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("fixtures");
    std::fs::create_dir(&empty).unwrap();
    let out = run(&[
        "run",
        "-c",
        &config(),
        "--fixtures",
        empty.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("faces") && err.contains("uid=demo-"), "{err}");
}

#[test]
fn corrupt_embedding_file_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let shard = tmp.path().join("s.jsonl");
    std::fs::write(&shard, "{\"uid\":\"a\",\"url\":\"https://e.com/a.jpg\",\"text\":\"t\",\"clip_score\":0.3}\n").unwrap();
    let emb = tmp.path().join("e.paem");
    std::fs::write(&emb, b"not an embedding matrix").unwrap();
    let out = run(&[
        "ingest",
        "--shards",
        shard.to_str().unwrap(),
        "--embeddings",
        emb.to_str().unwrap(),
        "--out",
        tmp.path().join("r.jsonl").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn annotate_and_knn_write_one_row_per_record() {
    let tmp = tempfile::tempdir().unwrap();
    let ann = tmp.path().join("ann.jsonl");
    ok(&["annotate", "-c", &config(), "--out", ann.to_str().unwrap()]);
    assert_eq!(std::fs::read_to_string(&ann).unwrap().lines().count(), 10_000);
    let knn = tmp.path().join("knn.jsonl");
    let out = ok(&["knn", "-c", &config(), "--out", knn.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let n = v["annotated"].as_u64().unwrap();
    assert_eq!(std::fs::read_to_string(&knn).unwrap().lines().count() as u64, n);
    let first: serde_json::Value =
        serde_json::from_str(std::fs::read_to_string(&knn).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(first["k"], 5);
}
