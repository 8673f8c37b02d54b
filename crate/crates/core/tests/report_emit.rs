use poolaudit_core::ingest::SampleRecord;
use poolaudit_core::pipeline::{run_audit, write_jsonl, AuditConfig};
use poolaudit_core::report::{emit_tables, ANALYSES};
use poolaudit_core::Exec;

fn corpus(dir: &std::path::Path) {
    // Ten scores; the third largest is 0.243, so the top 30% cut lands on it.
    let scores = [0.5, 0.4, 0.243, 0.2, 0.19, 0.18, 0.17, 0.16, 0.15, 0.1];
    let texts = ["a woman", "two men", "a man", "woman at work", "", "men", "asian woman", "", "gay man", "x"];
    let recs: Vec<SampleRecord> = scores
        .iter()
        .zip(texts)
        .enumerate()
        .map(|(i, (s, t))| {
            let mut r = SampleRecord::new(format!("r{i}"), format!("https://www.example.co.uk/{i}.jpg"), t);
            r.clip_score = Some(*s);
            r.language = Some("en".into());
            r
        })
        .collect();
    write_jsonl(&dir.join("s.jsonl"), &recs).unwrap();
}

fn config(analyses: &[&str]) -> AuditConfig {
    AuditConfig {
        shards: vec!["s.jsonl".into()],
        top_frac: Some(0.30),
        analyses: Some(analyses.iter().map(|s| s.to_string()).collect()),
        ..Default::default()
    }
}

#[test]
fn manifest_records_requested_fraction_and_resolved_threshold() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    let cfg = config(&["identity_keywords"]).resolve(dir.path(), None).unwrap();
    let report = run_audit(&cfg, &Exec::new(2), None).unwrap();
    let m: serde_json::Value = serde_json::from_slice(&report.manifest.to_json()).unwrap();
    assert_eq!(m["filter"]["spec"]["mode"]["kind"], "top_fraction");
    assert_eq!(m["filter"]["spec"]["mode"]["value"], 0.3);
    assert_eq!(m["filter"]["resolved_threshold"], 0.243);
    assert_eq!(m["filter"]["passed"], 3);
    assert_eq!(m["network"]["offline"], true);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn every_enabled_analysis_gets_a_table_even_when_empty() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    // Text and domain analyses only: the rest need fixtures or extra inputs.
    let names = ["identity_keywords", "intersections", "gender_word_gap", "languages", "cctld", "websites", "news_sites"];
    let cfg = config(&names).resolve(dir.path(), None).unwrap();
    let report = run_audit(&cfg, &Exec::default(), None).unwrap();
    let out = dir.path().join("out");
    let files = emit_tables(&report, &out).unwrap();
    assert_eq!(files.len(), names.len() + 1);
    for n in names {
        assert!(ANALYSES.contains(&n));
        let text = std::fs::read_to_string(out.join(format!("{n}.csv"))).unwrap();
        assert!(text.ends_with('\n') && !text.contains('\r'), "{n}");
    }
    // Nothing qualifies for news sites, so only the header is written.
    let news = std::fs::read_to_string(out.join("news_sites.csv")).unwrap();
    assert_eq!(news.lines().count(), 1);
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    for n in names {
        assert!(m["tables"][n]["min_support"].is_u64(), "{n}");
        assert!(m["tables"][n]["suppressed"].is_u64(), "{n}");
    }
}

#[test]
fn emitting_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    let cfg = config(&["identity_keywords", "websites"]).resolve(dir.path(), None).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    emit_tables(&run_audit(&cfg, &Exec::new(1), None).unwrap(), &a).unwrap();
    emit_tables(&run_audit(&cfg, &Exec::new(4), None).unwrap(), &b).unwrap();
    for f in ["identity_keywords.csv", "websites.csv", "manifest.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn rows_are_ordered_by_descending_pass_rate_then_label() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    let cfg = config(&["identity_keywords"]).resolve(dir.path(), None).unwrap();
    let report = run_audit(&cfg, &Exec::default(), None).unwrap();
    let csv = String::from_utf8(report.tables["identity_keywords"].to_csv()).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let gender: Vec<(&str, f64)> = rows
        .iter()
        .filter(|r| r[0] == "gender")
        .map(|r| (r[1], r[4].parse().unwrap()))
        .collect();
    assert!(gender.windows(2).all(|w| w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0)), "{gender:?}");
}
