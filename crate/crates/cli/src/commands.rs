use std::path::Path;

use poolaudit_core::clients::FetchMode;
use poolaudit_core::exec::default_workers;
use poolaudit_core::face_knn::{build_index, knn_annotate_batch, Attribute, GroupScore, KnnConfig, ReferenceDb};
use poolaudit_core::ingest::SampleRecord;
use poolaudit_core::pipeline::{
    filter, ingest, run_audit, validate_config, write_demo, write_jsonl, Filtered, Ingested, ResolvedConfig,
};
use poolaudit_core::report::{emit_tables, AuditReport};
use poolaudit_core::source_annot::{
    match_news_site, DomainExtractor, NewsSites, PublicSuffixList, RegionTable, SuffixMode,
};
use poolaudit_core::text_annot::PatternSet;
use poolaudit_core::{Error, Exec, Result};
use serde::Serialize;
use serde_json::json;

use crate::args::{AttributeArg, Cli, Command, Overrides};

fn resolve(o: &Overrides) -> Result<ResolvedConfig> {
    let (cfg, base) = o.load()?;
    let env_mode = FetchMode::from_env().map_err(|e| Error::Config(vec![e.to_string()]))?;
    cfg.resolve(&base, Some(env_mode))
}

fn print_json(v: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serialisable"));
}

pub fn dispatch(cli: Cli) -> Result<()> {
    let exec = Exec::new(cli.workers.unwrap_or_else(default_workers));
    match cli.command {
        Command::Validate(o) => {
            let cfg = resolve(&o)?;
            print_json(&json!({
                "config_hash": cfg.hash(),
                "analyses": cfg.analyses,
                "filter": cfg.filter,
                "min_support": cfg.min_support,
                "mode": cfg.mode,
                "config": cfg.config,
            }));
            Ok(())
        }
        Command::Ingest { cfg, out } => {
            let cfg = resolve(&cfg)?;
            let ing = ingest(&cfg, &exec)?;
            let n = write_jsonl(&out, &ing.records)?;
            print_json(&json!({
                "shards": ing.shards,
                "lines": ing.tally.lines,
                "records": n,
                "skipped": ing.tally.skipped,
            }));
            Ok(())
        }
        Command::Filter { cfg, out, passed_only } => {
            let cfg = resolve(&cfg)?;
            let ing = ingest(&cfg, &exec)?;
            let f = filter(&ing, &cfg, &exec)?;
            let rows = f.decisions.iter().filter(|d| d.passed || !passed_only).map(|d| SampleRecord {
                clip_score: Some(d.score),
                ..ing.records[d.index].clone()
            });
            let written = write_jsonl(&out, rows)?;
            print_json(&json!({
                "spec": cfg.filter,
                "resolved_threshold": f.threshold,
                "scored": f.decisions.len(),
                "passed": f.passed(),
                "unscoreable": f.unscoreable,
                "discrepancies": f.discrepancies,
                "written": written,
            }));
            Ok(())
        }
        Command::Annotate { cfg, out } => {
            let cfg = resolve(&cfg)?;
            let ing = ingest(&cfg, &exec)?;
            let f = filter(&ing, &cfg, &exec)?;
            let n = annotate(&cfg, &ing, &f, &exec, &out)?;
            print_json(&json!({ "annotated": n }));
            Ok(())
        }
        Command::Knn { cfg, out, attribute } => {
            let cfg = resolve(&cfg)?;
            let ing = ingest(&cfg, &exec)?;
            let f = filter(&ing, &cfg, &exec)?;
            let (annotated, unanimous) = knn(&cfg, &ing, &f, &exec, attribute, &out)?;
            print_json(&json!({ "annotated": annotated, "unanimous": unanimous }));
            Ok(())
        }
        Command::Stats { cfg, out } => {
            let cfg = resolve(&cfg)?;
            let report = run_audit(&cfg, &exec, None)?;
            write_report_json(&report, &out)?;
            log::info!("stats: {} tables written to {}", report.tables.len(), out.display());
            Ok(())
        }
        Command::Report { from, out } => {
            let bytes = std::fs::read(&from).map_err(|e| Error::io(format!("read {}", from.display()), e))?;
            let report: AuditReport = serde_json::from_slice(&bytes)
                .map_err(|e| Error::Config(vec![format!("{}: not a stats file: {e}", from.display())]))?;
            let files = emit_tables(&report, &out)?;
            log::info!("report: {} files written to {}", files.len(), out.display());
            Ok(())
        }
        Command::Run { cfg, out } => {
            let cfg = resolve(&cfg)?;
            let out = out
                .or_else(|| cfg.output_dir().map(Path::to_path_buf))
                .ok_or_else(|| Error::Config(vec!["no output directory: set output_dir or pass --out".into()]))?;
            let report = run_audit(&cfg, &exec, None)?;
            let files = emit_tables(&report, &out)?;
            log::info!("report: {} files written to {}", files.len(), out.display());
            Ok(())
        }
        Command::Demo { dir, seed, run } => {
            let cfg_path = write_demo(&dir, seed)?;
            log::info!("demo: corpus and config written to {}", cfg_path.display());
            if run {
                let cfg = validate_config(&cfg_path)?;
                let report = run_audit(&cfg, &exec, None)?;
                let out = dir.join("report");
                let files = emit_tables(&report, &out)?;
                log::info!("report: {} files written to {}", files.len(), out.display());
            }
            Ok(())
        }
    }
}

fn write_report_json(report: &AuditReport, out: &Path) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(report).expect("report serialises");
    bytes.push(b'\n');
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(format!("create {}", parent.display()), e))?;
    }
    std::fs::write(out, bytes).map_err(|e| Error::io(format!("write {}", out.display()), e))
}

#[derive(Serialize)]
struct Annotation<'a> {
    uid: &'a str,
    score: f64,
    passed: bool,
    identity: Vec<String>,
    gender: Vec<String>,
    registered_domain: Option<String>,
    cctld: Option<String>,
    western: Option<bool>,
    news_country: Option<String>,
}

fn annotate(cfg: &ResolvedConfig, ing: &Ingested, f: &Filtered, exec: &Exec, out: &Path) -> Result<u64> {
    let c = &cfg.config;
    let identity = match &c.patterns.identity {
        Some(p) => PatternSet::load(p)?,
        None => PatternSet::identity(),
    };
    let gender = match &c.patterns.gender {
        Some(p) => PatternSet::load(p)?,
        None => PatternSet::gender(),
    };
    let regions = match &c.regions {
        Some(p) => RegionTable::load(p)?,
        None => RegionTable::bundled().clone(),
    };
    let news = match &c.news_sites {
        Some(p) => NewsSites::load(p)?,
        None => NewsSites::bundled().clone(),
    };
    let psl = PublicSuffixList::bundled();
    let extractor = DomainExtractor::new(psl, &regions, SuffixMode::from(c.suffix_mode));
    let rows = exec.map(&f.decisions, |d| {
        let r = &ing.records[d.index];
        let domain = extractor.extract(&r.url).ok();
        Annotation {
            uid: &r.uid,
            score: d.score,
            passed: d.passed,
            identity: identity.matches(&r.text).into_iter().collect(),
            gender: gender.matches(&r.text).into_iter().collect(),
            news_country: domain
                .as_ref()
                .and_then(|dm| match_news_site(dm, &news))
                .map(|n| n.country.clone()),
            registered_domain: domain.as_ref().map(|dm| dm.registered.clone()),
            cctld: domain.as_ref().and_then(|dm| dm.cctld.clone()),
            western: domain.as_ref().and_then(|dm| dm.western),
        }
    });
    write_jsonl(out, &rows)
}

#[derive(Serialize)]
struct KnnRow<'a> {
    uid: &'a str,
    passed: bool,
    #[serde(flatten)]
    score: GroupScore,
}

fn knn(
    cfg: &ResolvedConfig,
    ing: &Ingested,
    f: &Filtered,
    exec: &Exec,
    attribute: AttributeArg,
    out: &Path,
) -> Result<(u64, u64)> {
    let c = &cfg.config;
    let reference = c
        .reference_db
        .as_ref()
        .ok_or_else(|| Error::Config(vec!["knn needs reference_db".into()]))?;
    let face = ing
        .face()
        .ok_or_else(|| Error::Config(vec!["knn needs face-crop embeddings".into()]))?;
    let db = ReferenceDb::load(&reference.embeddings, &reference.labels)?;
    let index = build_index(&db)?;
    let kcfg = match attribute {
        AttributeArg::Race => KnnConfig {
            k: c.knn.k,
            p: c.knn.p,
            attribute: Attribute::Race,
        },
        AttributeArg::Gender => KnnConfig {
            p: c.knn.p,
            ..KnnConfig::gender()
        },
    };
    let mut uids = Vec::new();
    let mut queries: Vec<&[f32]> = Vec::new();
    for d in &f.decisions {
        let r = &ing.records[d.index];
        if let Some([b]) = r.face_boxes.as_deref() {
            if let Some(row) = b.embedding {
                uids.push((r.uid.as_str(), d.passed));
                queries.push(face.row(row)?);
            }
        }
    }
    let scores = knn_annotate_batch(&queries, &index, &kcfg, exec)?;
    let unanimous = scores.iter().filter(|s| s.unanimous).count() as u64;
    let rows = uids
        .into_iter()
        .zip(scores)
        .map(|((uid, passed), score)| KnnRow { uid, passed, score });
    let n = write_jsonl(out, rows)?;
    Ok((n, unanimous))
}
