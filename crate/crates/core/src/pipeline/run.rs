use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use super::config::ResolvedConfig;
use super::stages::{filter, ingest};
use super::occupations::OccupationTable;
use crate::clients::{Client, FetchMode, FixtureStore, LiveTransport, Transport};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::face_knn::{build_index, knn_annotate_batch, unanimity_filter, Attribute, KnnConfig, ReferenceDb};
use crate::ingest::{reservoir_sample, SampleRecord};
use crate::report::{
    group_stats_table, intersection_table, word_gap_table, AuditReport, Extrapolation, ExtrapolationInterval,
    FilterSummary, GroupStatsOptions, IngestSummary, KnnSummary, Manifest, NetworkSummary, Table, TrendSummary,
    GROUP_COLUMNS,
};
use crate::source_annot::{
    earliest_index_year, ip_country, map_categories, match_news_site, CategoryMap, DomainExtractor, DomainInfo,
    IpRangeDb, NewsSites, PublicSuffixList, RegionTable,
};
use crate::stats::{age_decade_bucket, binomial_interval, extrapolate_pool, ols_trend, GroupCount, IntervalMethod, Tally};
use crate::text_annot::{bundled_stopwords, IntersectionTally, PatternSet, WordGapTally, STOPWORDS_TXT};

pub const TOOL_NAME: &str = "poolaudit";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Identity-keyword groups crossed pairwise in the intersection maps.
const INTERSECTION_GROUPS: [&str; 4] = ["race", "religion", "sexuality", "gender"];
const WORD_GAP_SIDES: (&str, &str) = ("woman", "man");
pub const NSFW_CATEGORY: &str = "NSFW";

/// Versions of the bundled data files, for `--version` and the manifest.
pub fn data_versions() -> BTreeMap<String, String> {
    let psl = PublicSuffixList::bundled();
    let mut v = BTreeMap::new();
    v.insert(
        "public_suffix_list".into(),
        format!("{} (icann, {} rules)", psl.version().unwrap_or("unknown"), psl.len()),
    );
    v.insert(
        "stopwords".into(),
        format!("word_cloud 1.9.6 ({} words)", STOPWORDS_TXT.lines().filter(|l| !l.trim().is_empty()).count()),
    );
    v.insert("category_map".into(), format!("{} rows", CategoryMap::bundled().len()));
    v.insert("news_sites".into(), format!("{} rows", NewsSites::bundled().len()));
    v
}

/// One scored record.
struct Item<'a> {
    rec: &'a SampleRecord,
    passed: bool,
}

struct Inputs {
    identity: PatternSet,
    gender: PatternSet,
    stopwords: HashSet<String>,
    categories: CategoryMap,
    news: NewsSites,
    regions: RegionTable,
    psl: PublicSuffixList,
}

impl Inputs {
    fn load(cfg: &ResolvedConfig) -> Result<Self> {
        let c = &cfg.config;
        let identity = match &c.patterns.identity {
            Some(p) => PatternSet::load(p)?,
            None => PatternSet::identity(),
        };
        let gender = match &c.patterns.gender {
            Some(p) => PatternSet::load(p)?,
            None => PatternSet::gender(),
        };
        let stopwords = match &c.stopwords {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| Error::io(format!("read {}", p.display()), e))?
                .lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty())
                .collect(),
            None => bundled_stopwords(),
        };
        let categories = match &c.category_map {
            Some(p) => CategoryMap::load(p)?,
            None => CategoryMap::bundled().clone(),
        };
        let news = match &c.news_sites {
            Some(p) => NewsSites::load(p)?,
            None => NewsSites::bundled().clone(),
        };
        let regions = match &c.regions {
            Some(p) => RegionTable::load(p)?,
            None => RegionTable::bundled().clone(),
        };
        Ok(Inputs {
            identity,
            gender,
            stopwords,
            categories,
            news,
            regions,
            psl: PublicSuffixList::bundled().clone(),
        })
    }
}

fn region_dimension(regions: &RegionTable, code: Option<&str>) -> &'static str {
    match code.and_then(|c| regions.western(c)) {
        Some(true) => "western",
        Some(false) => "non_western",
        None => "unknown",
    }
}

fn trend(x: &str, y: &str, points: Vec<(f64, f64)>) -> TrendSummary {
    let n = points.len();
    match ols_trend(&points) {
        Ok(r) => TrendSummary {
            x: x.into(),
            y: y.into(),
            points: n,
            result: Some(r),
            note: None,
        },
        Err(e) => TrendSummary {
            x: x.into(),
            y: y.into(),
            points: n,
            result: None,
            note: Some(e.to_string()),
        },
    }
}

/// (x, pass rate) for rows of `dimension` with at least `min_support` raw samples.
fn rate_points<F>(tally: &Tally, dimension: &str, min_support: u64, x_of: F) -> Vec<(f64, f64)>
where
    F: Fn(&str, GroupCount) -> Option<f64>,
{
    tally
        .dimension(dimension)
        .filter(|(_, c)| c.raw >= min_support)
        .filter_map(|(label, c)| Some((x_of(label, c)?, c.pass_rate()?)))
        .collect()
}

fn extrapolation(successes: u64, trials: u64, pool: u64, confidence: f64) -> Result<Extrapolation> {
    let mut intervals = Vec::new();
    for method in [IntervalMethod::ClopperPearson, IntervalMethod::Normal] {
        let ci = binomial_interval(successes, trials, confidence, method)?;
        let (pool_low, pool_high) = extrapolate_pool(&ci, pool);
        intervals.push(ExtrapolationInterval {
            method,
            confidence,
            point: ci.point,
            low: ci.low,
            high: ci.high,
            pool_low,
            pool_high,
        });
    }
    Ok(Extrapolation {
        successes,
        trials,
        pool_size: pool,
        intervals,
    })
}

/// First error in input order, so failures do not depend on scheduling.
fn collect_ordered<T, E>(results: Vec<std::result::Result<T, E>>) -> std::result::Result<Vec<T>, E> {
    results.into_iter().collect()
}

#[derive(Default)]
struct TextPartial {
    identity: Tally,
    intersections: Vec<IntersectionTally>,
    words: WordGapTally,
    languages: Tally,
    occupations: Tally,
}

impl TextPartial {
    fn merge(mut self, other: TextPartial) -> Self {
        self.identity = self.identity.merge(other.identity);
        if self.intersections.is_empty() {
            self.intersections = other.intersections;
        } else {
            self.intersections = self
                .intersections
                .into_iter()
                .zip(other.intersections)
                .map(|(a, b)| a.merge(b))
                .collect();
        }
        self.words = self.words.merge(other.words);
        self.languages = self.languages.merge(other.languages);
        self.occupations = self.occupations.merge(other.occupations);
        self
    }
}

fn group_pairs() -> Vec<(&'static str, &'static str)> {
    let g = INTERSECTION_GROUPS;
    let mut v = Vec::new();
    for i in 0..g.len() {
        for j in i + 1..g.len() {
            v.push((g[i], g[j]));
        }
    }
    v
}

/// Execute the full audit described by `cfg`. `transport` overrides the
/// network transport used in record and live modes.
pub fn run_audit(cfg: &ResolvedConfig, exec: &Exec, transport: Option<Arc<dyn Transport>>) -> Result<AuditReport> {
    let c = &cfg.config;
    let inputs = Inputs::load(cfg)?;
    let opts = |key: &str| GroupStatsOptions {
        min_support: cfg.min_support(key),
        method: c.interval.method,
        confidence: c.interval.confidence,
    };

    let ing = ingest(cfg, exec)?;
    let records = &ing.records;
    let face = ing.face();
    let filtered = filter(&ing, cfg, exec)?;
    let threshold = filtered.threshold;
    let items: Vec<Item> = filtered
        .decisions
        .iter()
        .map(|d| Item {
            rec: &records[d.index],
            passed: d.passed,
        })
        .collect();
    let passed = filtered.passed();
    let global = GroupCount::new(items.len() as u64, passed);

    let mut tables: Vec<Table> = Vec::new();
    let mut trends: BTreeMap<String, TrendSummary> = BTreeMap::new();
    let mut extrapolations = BTreeMap::new();
    let mut knn_summary = None;

    // Text analyses share one pass over the records.
    let occupations = match (&c.occupations, cfg.enabled("occupations")) {
        (Some(p), true) => Some(OccupationTable::load(p)?),
        _ => None,
    };
    let pairs = group_pairs();
    let keep_label = |set: &PatternSet, l: &str| c.include_excluded_labels || !set.is_excluded(l);
    let by_group = |hits: &BTreeSet<String>, group: &str| -> BTreeSet<String> {
        hits.iter()
            .filter(|l| inputs.identity.group_of(l) == Some(group) && keep_label(&inputs.identity, l))
            .cloned()
            .collect()
    };
    let want_identity = cfg.enabled("identity_keywords") || cfg.enabled("intersections");
    let text = exec.fold_reduce(
        &items,
        TextPartial::default,
        |mut acc, it| {
            if want_identity {
                let hits = inputs.identity.matches(&it.rec.text);
                for l in &hits {
                    let group = inputs.identity.group_of(l).unwrap_or("ungrouped");
                    acc.identity.add(group, l, it.passed);
                }
                if cfg.enabled("intersections") {
                    if acc.intersections.is_empty() {
                        acc.intersections = vec![IntersectionTally::default(); pairs.len()];
                    }
                    for (slot, (ga, gb)) in acc.intersections.iter_mut().zip(&pairs) {
                        slot.add(&by_group(&hits, ga), &by_group(&hits, gb), it.passed);
                    }
                }
            }
            if cfg.enabled("gender_word_gap") {
                let hits = inputs.gender.matches(&it.rec.text);
                let side = |s: &str| hits.iter().any(|l| inputs.gender.group_of(l) == Some(s));
                acc.words.add(
                    &it.rec.text,
                    side(WORD_GAP_SIDES.0),
                    side(WORD_GAP_SIDES.1),
                    it.passed,
                    &inputs.stopwords,
                );
            }
            if cfg.enabled("languages") {
                if let Some(lang) = &it.rec.language {
                    acc.languages.add("language", lang, it.passed);
                }
            }
            if let Some(occ) = &occupations {
                for title in occ.patterns.matches(&it.rec.text) {
                    acc.occupations.add("occupation", &title, it.passed);
                }
            }
            acc
        },
        TextPartial::merge,
    );

    if cfg.enabled("identity_keywords") {
        tables.push(group_stats_table(
            "identity_keywords",
            &text.identity,
            global,
            opts("identity_keywords"),
            |_, l| keep_label(&inputs.identity, l),
        ));
    }
    if cfg.enabled("intersections") {
        let labels_of = |group: &str| -> Vec<String> {
            inputs
                .identity
                .entries()
                .iter()
                .filter(|e| e.group.as_deref() == Some(group) && keep_label(&inputs.identity, &e.label))
                .map(|e| e.label.clone())
                .collect()
        };
        let ms = cfg.min_support("intersections");
        let maps: Vec<_> = pairs
            .iter()
            .enumerate()
            .map(|(i, (ga, gb))| {
                let tally = text.intersections.get(i).cloned().unwrap_or_default();
                (format!("{ga} x {gb}"), tally.finish(&labels_of(ga), &labels_of(gb), ms))
            })
            .collect();
        tables.push(intersection_table("intersections", &maps, ms));
    }
    if cfg.enabled("gender_word_gap") {
        let ms = cfg.min_support("gender_word_gap");
        let gaps = text.words.finish(ms, c.top_k);
        tables.push(word_gap_table("gender_word_gap", &gaps, WORD_GAP_SIDES.0, WORD_GAP_SIDES.1, ms));
    }
    if cfg.enabled("languages") {
        tables.push(group_stats_table("languages", &text.languages, global, opts("languages"), |_, _| true));
        let pts = rate_points(&text.languages, "language", cfg.min_support("language_trend"), |_, c| {
            Some((c.raw as f64).log10())
        });
        trends.insert("language_frequency".into(), trend("log10(raw count)", "pass rate", pts));
    }
    if let Some(occ) = &occupations {
        tables.push(group_stats_table("occupations", &text.occupations, global, opts("occupations"), |_, _| true));
        let ms = cfg.min_support("occupations");
        let salary = rate_points(&text.occupations, "occupation", ms, |t, _| occ.get(t)?.salary);
        let prestige = rate_points(&text.occupations, "occupation", ms, |t, _| occ.get(t)?.prestige);
        trends.insert("occupation_salary".into(), trend("salary", "pass rate", salary));
        trends.insert("occupation_prestige".into(), trend("prestige", "pass rate", prestige));
    }

    // URL-derived analyses.
    let extractor = DomainExtractor::new(&inputs.psl, &inputs.regions, c.suffix_mode.into());
    let want_domains = ["cctld", "websites", "news_sites"].iter().any(|a| cfg.enabled(a));
    if want_domains {
        let domains: Vec<Option<DomainInfo>> = exec.map(&items, |it| extractor.extract(&it.rec.url).ok());
        let tally = exec.fold_reduce(
            &(0..items.len()).collect::<Vec<_>>(),
            Tally::new,
            |mut t, &i| {
                let (it, d) = (&items[i], &domains[i]);
                if let Some(d) = d {
                    if let Some(cc) = &d.cctld {
                        t.add(&format!("cctld:{}", region_dimension(&inputs.regions, Some(cc))), cc, it.passed);
                    }
                    t.add("website", &d.registered, it.passed);
                    if let Some(site) = match_news_site(d, &inputs.news) {
                        t.add(&format!("news:{}", site.country), &site.name, it.passed);
                    }
                }
                t
            },
            Tally::merge,
        );
        let split = |prefix: &str| {
            let mut out = Tally::new();
            for (k, v) in tally.iter() {
                if let Some(dim) = k.dimension.strip_prefix(prefix) {
                    out.add_count(crate::stats::GroupKey::new(dim, k.label.clone()), *v);
                }
            }
            out
        };
        if cfg.enabled("cctld") {
            tables.push(group_stats_table("cctld", &split("cctld:"), global, opts("cctld"), |_, _| true));
        }
        if cfg.enabled("websites") {
            tables.push(group_stats_table("websites", &tally, global, opts("websites"), |d, _| d == "website"));
        }
        if cfg.enabled("news_sites") {
            tables.push(group_stats_table("news_sites", &split("news:"), global, opts("news_sites"), |_, _| true));
        }
    }

    // Service-backed analyses run on a seeded subsample.
    let service_analyses = ["face_gender_age", "categories", "years", "ip_country"];
    let mut network = NetworkSummary {
        mode: cfg.mode.as_str().into(),
        offline: !cfg.mode.touches_network(),
        resolver_origin: c.fixtures.resolver_origin.clone(),
        ..Default::default()
    };
    let mut service_sample_size = None;
    if let Some(dir) = &c.fixtures.dir {
        let transport: Arc<dyn Transport> = match (transport, cfg.mode) {
            (Some(t), _) => t,
            (None, FetchMode::Replay) => Arc::new(crate::clients::FailingTransport::default()),
            (None, _) => Arc::new(LiveTransport::new(c.fixtures.requests_per_sec)),
        };
        let client = Client::new(FixtureStore::new(dir), cfg.mode, transport);
        if service_analyses.iter().any(|a| cfg.enabled(a)) {
            let idx: Vec<usize> = match c.service_sample {
                Some(k) => reservoir_sample(0..items.len(), k, c.seeds.sample),
                None => (0..items.len()).collect(),
            };
            service_sample_size = Some(idx.len() as u64);
            let sample_global = GroupCount::new(idx.len() as u64, idx.iter().filter(|&&i| items[i].passed).count() as u64);
            log::info!("services: {} records in the service sample", idx.len());

            if cfg.enabled("face_gender_age") {
                let faces = collect_ordered(exec.map(&idx, |&i| client.fetch_face_attributes(&items[i].rec.uid)))?;
                let mut t = Tally::new();
                for (&i, f) in idx.iter().zip(&faces) {
                    if f.len() != 1 {
                        continue;
                    }
                    let gender = f[0].gender.as_deref().unwrap_or("unknown");
                    let age = match f[0].age {
                        Some((lo, hi)) => age_decade_bucket(lo, hi)?,
                        None => "unknown".into(),
                    };
                    t.add(gender, &age, items[i].passed);
                }
                tables.push(group_stats_table("face_gender_age", &t, sample_global, opts("face_gender_age"), |_, _| true));
            }

            let sample_domains: Vec<Option<DomainInfo>> = exec.map(&idx, |&i| extractor.extract(&items[i].rec.url).ok());

            if cfg.enabled("categories") {
                let unique: Vec<String> = sample_domains
                    .iter()
                    .flatten()
                    .map(|d| d.registered.clone())
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                let fetched = collect_ordered(exec.map(&unique, |d| client.fetch_domain_categories(d)))?;
                let by_domain: BTreeMap<&str, BTreeSet<String>> = unique
                    .iter()
                    .map(String::as_str)
                    .zip(fetched.into_iter().map(|raw| map_categories(raw.iter().map(String::as_str), &inputs.categories)))
                    .collect();
                let mut t = Tally::new();
                let (mut trials, mut nsfw, mut nsfw_passed) = (0u64, 0u64, 0u64);
                for (&i, d) in idx.iter().zip(&sample_domains) {
                    let Some(cats) = d.as_ref().and_then(|d| by_domain.get(d.registered.as_str())) else {
                        continue;
                    };
                    if cats.is_empty() {
                        continue;
                    }
                    trials += 1;
                    if cats.contains(NSFW_CATEGORY) {
                        nsfw += 1;
                        nsfw_passed += items[i].passed as u64;
                    }
                    for cat in cats {
                        t.add("category", cat, items[i].passed);
                    }
                }
                tables.push(group_stats_table("categories", &t, sample_global, opts("categories"), |_, _| true));
                if trials > 0 {
                    let conf = c.interval.confidence;
                    extrapolations.insert("nsfw_sites".to_string(), extrapolation(nsfw, trials, c.pool_size, conf)?);
                    extrapolations.insert(
                        "nsfw_sites_passed".to_string(),
                        extrapolation(nsfw_passed, trials, c.pool_size, conf)?,
                    );
                }
            }

            if cfg.enabled("years") {
                let stamps = collect_ordered(exec.map(&idx, |&i| client.fetch_wayback_first(&items[i].rec.url)))?;
                let mut t = Tally::new();
                for (&i, ts) in idx.iter().zip(&stamps) {
                    if let Some(ts) = ts {
                        let year = earliest_index_year(ts)?;
                        t.add("year", &year.to_string(), items[i].passed);
                    }
                }
                tables.push(group_stats_table("years", &t, sample_global, opts("years"), |_, _| true));
                let pts = rate_points(&t, "year", cfg.min_support("years"), |y, _| y.parse().ok());
                trends.insert("year".into(), trend("earliest capture year", "pass rate", pts));
            }

            if cfg.enabled("ip_country") {
                let db = IpRangeDb::load(c.ip_db.as_ref().expect("validated"))?;
                let hosts: Vec<String> = sample_domains
                    .iter()
                    .flatten()
                    .map(|d| d.host.clone())
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                let ips = collect_ordered(exec.map(&hosts, |h| client.resolve_ipv4(h)))?;
                let country: BTreeMap<&str, Option<&str>> = hosts
                    .iter()
                    .map(String::as_str)
                    .zip(ips.iter().map(|ip| ip.and_then(|ip| ip_country(&db, ip))))
                    .collect();
                let mut t = Tally::new();
                for (&i, d) in idx.iter().zip(&sample_domains) {
                    if let Some(Some(cc)) = d.as_ref().and_then(|d| country.get(d.host.as_str())) {
                        t.add(region_dimension(&inputs.regions, Some(cc)), cc, items[i].passed);
                    }
                }
                tables.push(group_stats_table("ip_country", &t, sample_global, opts("ip_country"), |_, _| true));
            }
        }
        network.coverage = client.coverage().into_iter().map(|(s, c)| (s.name().to_string(), c)).collect();
        network.fixture_hash = Some(client.store().digest()?);
    }

    // Face-crop kNN.
    if cfg.enabled("face_knn_race") {
        let paths = c.reference_db.as_ref().expect("validated");
        let db = ReferenceDb::load(&paths.embeddings, &paths.labels)?;
        let index = build_index(&db)?;
        let face = face.ok_or_else(|| Error::Config(vec!["face_knn_race needs face-crop embeddings".into()]))?;
        let kcfg = KnnConfig {
            k: c.knn.k,
            p: c.knn.p,
            attribute: Attribute::Race,
        };
        let (mut single, mut multi) = (0u64, 0u64);
        let mut queries: Vec<(usize, &[f32])> = Vec::new();
        for (i, it) in items.iter().enumerate() {
            match it.rec.face_boxes.as_deref() {
                Some([b]) => {
                    single += 1;
                    if let Some(row) = b.embedding {
                        queries.push((i, face.row(row)?));
                    }
                }
                Some(bs) if bs.len() > 1 => multi += 1,
                _ => {}
            }
        }
        let vecs: Vec<&[f32]> = queries.iter().map(|q| q.1).collect();
        let scores = knn_annotate_batch(&vecs, &index, &kcfg, exec)?;
        let annotated = scores.len() as u64;
        let pairs: Vec<(usize, crate::face_knn::GroupScore)> = queries.iter().map(|q| q.0).zip(scores).collect();
        let kept = if c.knn.unanimous_only {
            unanimity_filter(pairs).kept
        } else {
            pairs
        };
        let mut t = Tally::new();
        for (i, s) in &kept {
            t.add("race", &s.argmax, items[*i].passed);
        }
        tables.push(group_stats_table("face_knn_race", &t, global, opts("face_knn_race"), |_, _| true));
        knn_summary = Some(KnnSummary {
            attribute: Attribute::Race.name().into(),
            k: kcfg.k,
            p: kcfg.p,
            unanimous_only: c.knn.unanimous_only,
            reference_size: db.len(),
            single_face_records: single,
            multi_face_skipped: multi,
            annotated,
            kept: kept.len() as u64,
        });
    }

    // Enabled analyses that produced nothing still get a header-only table.
    for a in &cfg.analyses {
        if !tables.iter().any(|t| &t.name == a) {
            tables.push(Table::new(a.as_str(), &GROUP_COLUMNS, Some(cfg.min_support(a))));
        }
    }

    let mut seeds = BTreeMap::new();
    seeds.insert("sample".to_string(), c.seeds.sample);
    seeds.insert("holdout".to_string(), c.seeds.holdout);
    let manifest = Manifest {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        data_versions: data_versions(),
        config_hash: cfg.hash(),
        config: cfg.hashed_config(),
        seeds,
        analyses: cfg.analyses.clone(),
        min_support: cfg.min_support.clone(),
        ingest: IngestSummary {
            shards: ing.shards,
            lines: ing.tally.lines,
            records: records.len() as u64,
            skipped: ing.tally.skipped.clone(),
            service_sample: service_sample_size,
        },
        filter: FilterSummary {
            spec: Some(cfg.filter),
            resolved_threshold: threshold,
            scored: global.raw,
            unscoreable: filtered.unscoreable,
            passed: global.passed,
            pass_rate: global.pass_rate(),
            discrepancies: filtered.discrepancies,
        },
        network,
        tables: BTreeMap::new(),
        trends,
        extrapolations,
        knn: knn_summary,
    };
    Ok(AuditReport::new(manifest, tables))
}
