//! Synthetic demo corpus: record shards, face-crop embeddings, a labelled
//! reference set, an IP range table, an occupation table, replay fixtures
//! for every service lookup the demo config performs, and the config itself.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::config::{AuditConfig, FixtureConfig, KnnSettings, ReferencePaths, Seeds};
use crate::clients::{FetchMode, FixtureStore, RequestKey};
use crate::error::{Error, Result};
use crate::face_knn::{ReferenceDb, ReferenceEntry};
use crate::ingest::{reservoir_sample, EmbeddingMatrix, FaceBox, SampleRecord};
use crate::report::ANALYSES;
use crate::source_annot::DomainExtractor;

pub const DEMO_RECORDS: usize = 10_000;
pub const DEMO_SHARDS: usize = 4;
pub const DEMO_SERVICE_SAMPLE: usize = 2_500;
const FACE_DIMS: usize = 16;
const RACES: [&str; 5] = ["Asian", "Black", "Latino", "Middle Eastern", "White"];

/// Websites: (host, raw categories, whether the site is stock-photo-like, ip country).
const SITES: &[(&str, &[&str], &str)] = &[
    ("www.shutterstock.com", &["Stock Photos"], "US"),
    ("image.shutterstock.com", &["Stock Photos"], "US"),
    ("www.istockphoto.com", &["Stock Photos", "Photography"], "US"),
    ("media.gettyimages.com", &["Stock Photos"], "US"),
    ("www.dreamstime.com", &["Stock Photos"], "US"),
    ("i.etsystatic.com", &["Ecommerce"], "US"),
    ("images-na.ssl-images-amazon.com", &["Ecommerce", "Content Servers"], "US"),
    ("cdn.shopify.com", &["Ecommerce", "Content Servers"], "CA"),
    ("i.pinimg.com", &["Social Networks", "Photo Sharing"], "US"),
    ("blog.example.wordpress.com", &["Personal Blogs"], "US"),
    ("static.nytimes.com", &["News & Media"], "US"),
    ("www.theguardian.com", &["News & Media"], "GB"),
    ("ichef.bbci.co.uk", &["News & Media"], "GB"),
    ("cdn.cnn.com", &["News & Media"], "US"),
    ("img.lemonde.fr", &["News & Media"], "FR"),
    ("www.spiegel.de", &["News & Media"], "DE"),
    ("img.example.co.uk", &["Fine Art", "Arts"], "GB"),
    ("shop.example.de", &["Ecommerce"], "DE"),
    ("www.boutique.fr", &["Fashion"], "FR"),
    ("img.tienda.es", &["Ecommerce"], "ES"),
    ("foto.example.it", &["Photography"], "IT"),
    ("cdn.example.com.au", &["Travel"], "AU"),
    ("static.example.co.jp", &["Ecommerce"], "JP"),
    ("img.example.cn", &["Technology"], "CN"),
    ("shop.example.in", &["Ecommerce"], "IN"),
    ("img.example.com.br", &["Ecommerce"], "BR"),
    ("static.example.ru", &["Technology"], "RU"),
    ("img.example.vn", &["Ecommerce"], "VN"),
    ("cdn.example.co.kr", &["Video Streaming"], "KR"),
    ("img.example.com.tr", &["Ecommerce"], "TR"),
    ("gallery.example.pl", &["Arts"], "PL"),
    ("img.example.id", &["Travel"], "ID"),
    ("adult.example.com", &["Pornography", "Adult Themes"], "NL"),
    ("tube.example.net", &["Nudity"], "US"),
    ("forum.example.org", &["Forums"], "US"),
    ("cdn.example-uncategorised.net", &[], "US"),
    ("files.example.io", &["Content Servers"], "DE"),
    ("recipes.example.com", &["Food & Drink"], "US"),
    ("radio.example.fm", &["Radio"], "US"),
    ("edu.example.edu", &["Education"], "US"),
];

const LANGS: &[(&str, u32)] = &[
    ("en", 50),
    ("es", 8),
    ("de", 7),
    ("fr", 7),
    ("nl", 4),
    ("pt", 4),
    ("ja", 4),
    ("zh", 4),
    ("ru", 3),
    ("ko", 3),
    ("vi", 3),
    ("tr", 3),
];

const IDENTITY_WORDS: &[&str] = &[
    "woman", "women", "man", "men", "female", "male", "asian", "african american", "latina", "latino",
    "european", "caucasian", "christian", "muslim", "jewish", "gay", "lesbian", "bisexual", "transgender",
    "non-binary", "black", "white",
];

const GENDER_WORDS: &[&str] = &["woman", "man", "her", "his", "she", "he"];

const FILLER: &[&str] = &[
    "portrait", "dress", "queen", "career", "wedding", "smiling", "office", "beach", "stock", "photo", "vintage",
    "summer", "kitchen", "garden", "fashion", "sale", "logo", "shirt", "happy", "holding", "street", "night",
    "the", "a", "and", "with", "in", "of",
];

/// (title, salary, prestige)
const OCCUPATIONS: &[(&str, f64, f64)] = &[
    ("nurse", 77_600.0, 62.0),
    ("teacher", 61_690.0, 64.0),
    ("chef", 56_520.0, 41.0),
    ("lawyer", 135_740.0, 75.0),
    ("doctor", 229_300.0, 86.0),
    ("engineer", 100_640.0, 71.0),
    ("farmer", 75_760.0, 40.0),
    ("firefighter", 51_680.0, 53.0),
    ("photographer", 38_950.0, 45.0),
    ("pilot", 134_630.0, 70.0),
    ("cashier", 28_240.0, 22.0),
    ("janitor", 31_990.0, 16.0),
    ("architect", 82_840.0, 72.0),
    ("dentist", 163_220.0, 74.0),
    ("plumber", 60_090.0, 41.0),
];

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::io(format!("write {}", path.display()), e)
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, xs: &'a [T]) -> &'a T {
    &xs[rng.random_range(0..xs.len())]
}

fn weighted<'a>(rng: &mut ChaCha8Rng, xs: &'a [(&'a str, u32)]) -> &'a str {
    let total: u32 = xs.iter().map(|x| x.1).sum();
    let mut r = rng.random_range(0..total);
    for (v, w) in xs {
        if r < *w {
            return v;
        }
        r -= w;
    }
    xs[xs.len() - 1].0
}

/// Roughly normal noise from a sum of uniforms.
fn noise(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    let s: f64 = (0..6).map(|_| rng.random::<f64>()).sum::<f64>() - 3.0;
    s * sd / 0.7071
}

fn race_center(race: usize) -> Vec<f32> {
    (0..FACE_DIMS)
        .map(|d| if d % RACES.len() == race { 3.0 } else { 0.0 } + (d as f32 * 0.1))
        .collect()
}

fn face_vector(rng: &mut ChaCha8Rng, race: usize, spread: f64) -> Vec<f32> {
    race_center(race)
        .into_iter()
        .map(|c| c + noise(rng, spread) as f32)
        .collect()
}

struct Generated {
    records: Vec<SampleRecord>,
    faces: Vec<Vec<f32>>,
    /// Per record: (gender, (age low, age high)) for single-face records.
    face_attrs: Vec<Option<(&'static str, (u32, u32))>>,
}

fn generate(rng: &mut ChaCha8Rng) -> Generated {
    let mut records = Vec::with_capacity(DEMO_RECORDS);
    let mut faces = Vec::new();
    let mut face_attrs = Vec::with_capacity(DEMO_RECORDS);
    for i in 0..DEMO_RECORDS {
        let site = pick(rng, SITES);
        let (host, cats, _) = *site;
        let mut words: Vec<String> = Vec::new();
        let mut score = 0.22 + noise(rng, 0.06);
        for _ in 0..rng.random_range(2..7) {
            words.push(pick(rng, FILLER).to_string());
        }
        if rng.random_bool(0.35) {
            let w = *pick(rng, IDENTITY_WORDS);
            score += match w {
                "gay" | "lesbian" | "bisexual" | "transgender" | "non-binary" => -0.04,
                "woman" | "women" | "female" => 0.02,
                _ => 0.0,
            };
            words.push(w.to_string());
        }
        if rng.random_bool(0.15) {
            words.push(pick(rng, IDENTITY_WORDS).to_string());
        }
        if rng.random_bool(0.25) {
            words.push(pick(rng, GENDER_WORDS).to_string());
        }
        if rng.random_bool(0.12) {
            let (title, salary, _) = *pick(rng, OCCUPATIONS);
            score -= (salary - 100_000.0) / 4_000_000.0;
            words.push(title.to_string());
        }
        if rng.random_bool(0.02) {
            words.push("humane".into());
        }
        let n = words.len();
        for j in 0..n {
            let k = rng.random_range(j..n);
            words.swap(j, k);
        }
        if words.iter().any(|w| w == "queen") && words.iter().any(|w| w == "woman" || w == "her" || w == "she") {
            score += 0.03;
        }
        if cats.contains(&"Stock Photos") {
            score += 0.08;
        }
        let lang = weighted(rng, LANGS);
        if lang != "en" {
            score -= 0.03;
        }
        let mut text = words.join(" ");
        if rng.random_bool(0.3) {
            text = text.to_uppercase();
        }

        let mut face_boxes = None;
        let mut attr = None;
        let roll: f64 = rng.random();
        if roll < 0.22 {
            let race = rng.random_range(0..RACES.len());
            faces.push(face_vector(rng, race, 0.6));
            let gender = if rng.random_bool(0.5) { "Female" } else { "Male" };
            let low = rng.random_range(0..7u32) * 10 + rng.random_range(0..4u32);
            let age = (low, low + rng.random_range(3..9u32));
            score += if gender == "Female" && age.0 >= 40 { -0.03 } else { 0.01 };
            attr = Some((gender, age));
            face_boxes = Some(vec![FaceBox {
                x: 10.0,
                y: 12.0,
                w: 64.0,
                h: 80.0,
                embedding: Some(faces.len() - 1),
            }]);
        } else if roll < 0.27 {
            let mut bs = Vec::new();
            for _ in 0..2 {
                let race = rng.random_range(0..RACES.len());
                faces.push(face_vector(rng, race, 0.6));
                bs.push(FaceBox {
                    x: 5.0,
                    y: 5.0,
                    w: 40.0,
                    h: 50.0,
                    embedding: Some(faces.len() - 1),
                });
            }
            face_boxes = Some(bs);
        }
        face_attrs.push(attr);

        let score = (score * 1e6).round() / 1e6;
        records.push(SampleRecord {
            uid: format!("demo-{i:06}"),
            url: format!("https://{host}/img/{i:06}.jpg"),
            text,
            clip_score: Some(score.clamp(-1.0, 1.0)),
            embedding_image: None,
            embedding_text: None,
            face_boxes,
            language: Some(lang.to_string()),
        });
    }
    Generated {
        records,
        faces,
        face_attrs,
    }
}

fn ip_of(country: &str) -> Option<u32> {
    let pos = ["US", "CA", "GB", "FR", "DE", "ES", "IT", "AU", "JP", "CN", "IN", "BR", "RU", "VN", "KR", "TR", "PL", "ID", "NL"]
        .iter()
        .position(|c| *c == country)?;
    Some(((pos as u32 + 1) << 24) | 0x0001_0000)
}

fn write_ip_db(path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("\"0\",\"16777215\",\"-\",\"-\"\n");
    for c in ["US", "CA", "GB", "FR", "DE", "ES", "IT", "AU", "JP", "CN", "IN", "BR", "RU", "VN", "KR", "TR", "PL", "ID", "NL"] {
        let base = ip_of(c).expect("listed") & 0xFF00_0000;
        out.push_str(&format!("\"{}\",\"{}\",\"{c}\",\"-\"\n", base, base | 0x00FF_FFFF));
    }
    std::fs::write(path, out).map_err(io(path))
}

/// Write the demo corpus under `dir` and return the path of its config file.
pub fn write_demo(dir: &Path, seed: u64) -> Result<PathBuf> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::fs::create_dir_all(dir.join("shards")).map_err(io(dir))?;
    let fixtures = dir.join("fixtures");
    std::fs::create_dir_all(&fixtures).map_err(io(&fixtures))?;

    let g = generate(&mut rng);
    let per = DEMO_RECORDS.div_ceil(DEMO_SHARDS);
    for (s, chunk) in g.records.chunks(per).enumerate() {
        let path = dir.join("shards").join(format!("part-{s:04}.jsonl"));
        let mut f = std::io::BufWriter::new(std::fs::File::create(&path).map_err(io(&path))?);
        for r in chunk {
            serde_json::to_writer(&mut f, r).map_err(|e| io(&path)(e.into()))?;
            f.write_all(b"\n").map_err(io(&path))?;
        }
        // One malformed line per shard exercises the skip accounting.
        writeln!(f, "{{\"uid\":\"broken-{s}\",\"url\":\"not a url\",\"text\":\"x\"}}").map_err(io(&path))?;
        f.flush().map_err(io(&path))?;
    }

    let faces = EmbeddingMatrix::from_rows(&g.faces)?;
    faces.write_to(&dir.join("faces.paem"))?;

    let mut ref_rows = Vec::new();
    let mut entries = Vec::new();
    for (race, name) in RACES.iter().enumerate() {
        for j in 0..40 {
            ref_rows.push(face_vector(&mut rng, race, 0.4));
            entries.push(ReferenceEntry {
                person_id: format!("{}-{j:02}", name.to_ascii_lowercase().replace(' ', "_")),
                row: ref_rows.len() - 1,
                gender: if j % 2 == 0 { "Female".into() } else { "Male".into() },
                race: name.to_string(),
            });
        }
    }
    ReferenceDb::new(entries, EmbeddingMatrix::from_rows(&ref_rows)?)?
        .save(&dir.join("reference.paem"), &dir.join("reference.csv"))?;

    write_ip_db(&dir.join("ip2location-lite.csv"))?;

    let occ_path = dir.join("occupations.csv");
    let mut occ = String::from("title,salary,prestige\n");
    for (t, s, p) in OCCUPATIONS {
        occ.push_str(&format!("{t},{s},{p}\n"));
    }
    std::fs::write(&occ_path, occ).map_err(io(&occ_path))?;

    // Fixtures for exactly the records the pipeline will sample.
    let store = FixtureStore::new(&fixtures);
    let sample = reservoir_sample(0..g.records.len(), DEMO_SERVICE_SAMPLE, seed);
    let extractor = DomainExtractor::bundled();
    let mut domains = std::collections::BTreeSet::new();
    let mut hosts = std::collections::BTreeSet::new();
    for &i in &sample {
        let r = &g.records[i];
        let faces_json = match (&r.face_boxes, g.face_attrs[i]) {
            (Some(bs), Some((gender, (lo, hi)))) if bs.len() == 1 => json!({"FaceDetails": [{
                "BoundingBox": {"Width": 0.2, "Height": 0.25, "Left": 0.1, "Top": 0.12},
                "AgeRange": {"Low": lo, "High": hi},
                "Gender": {"Value": gender, "Confidence": 99.0}
            }]}),
            (Some(bs), _) => json!({"FaceDetails": bs.iter().map(|_| json!({
                "BoundingBox": {"Width": 0.1, "Height": 0.1, "Left": 0.05, "Top": 0.05},
                "AgeRange": {"Low": 25, "High": 33},
                "Gender": {"Value": "Male", "Confidence": 90.0}
            })).collect::<Vec<_>>()}),
            (None, _) => json!({"FaceDetails": []}),
        };
        store.put(&RequestKey::faces(&r.uid), faces_json.to_string().as_bytes(), 200, 0)?;

        let wayback = if rng.random_bool(0.45) {
            let year = 2024 - (rng.random::<f64>().powi(2) * 16.0) as u32;
            let ts = format!("{year}{:02}{:02}000000", rng.random_range(1..13), rng.random_range(1..29));
            json!({"url": r.url, "archived_snapshots": {"closest": {
                "status": "200", "available": true, "timestamp": ts,
                "url": format!("http://web.archive.org/web/{ts}/{}", r.url)
            }}})
        } else {
            json!({"url": r.url, "archived_snapshots": {}})
        };
        store.put(&RequestKey::wayback(&r.url), wayback.to_string().as_bytes(), 200, 0)?;

        let d = extractor.extract(&r.url)?;
        domains.insert(d.registered);
        hosts.insert(d.host);
    }
    for d in &domains {
        let cats: &[&str] = SITES
            .iter()
            .find(|s| extractor.extract(&format!("https://{}/", s.0)).map(|x| &x.registered == d).unwrap_or(false))
            .map(|s| s.1)
            .unwrap_or(&[]);
        let result = if cats.is_empty() {
            json!({"domain": d, "content_categories": null})
        } else {
            json!({"domain": d, "content_categories": cats.iter().enumerate()
                .map(|(i, c)| json!({"id": 100 + i, "name": c})).collect::<Vec<_>>()})
        };
        let body = json!({"success": true, "errors": [], "messages": [], "result": result});
        store.put(&RequestKey::categories(d), body.to_string().as_bytes(), 200, 0)?;
    }
    for h in &hosts {
        let country = SITES.iter().find(|s| s.0 == h).map(|s| s.2).unwrap_or("US");
        let ips: Vec<String> = ip_of(country)
            .map(|ip| std::net::Ipv4Addr::from(ip).to_string())
            .into_iter()
            .collect();
        store.put(&RequestKey::dns(h), json!({"host": h, "ipv4": ips}).to_string().as_bytes(), 200, 0)?;
    }

    let cfg = AuditConfig {
        shards: vec!["shards/*.jsonl".into()],
        embeddings: vec!["faces.paem".into()],
        top_frac: Some(0.30),
        analyses: Some(ANALYSES.iter().map(|s| s.to_string()).collect()),
        reference_db: Some(ReferencePaths {
            embeddings: "reference.paem".into(),
            labels: "reference.csv".into(),
        }),
        ip_db: Some("ip2location-lite.csv".into()),
        occupations: Some("occupations.csv".into()),
        fixtures: FixtureConfig {
            dir: Some("fixtures".into()),
            mode: Some(FetchMode::Replay),
            requests_per_sec: 1.0,
            resolver_origin: Some("synthetic".into()),
        },
        min_support: [
            ("intersections", 10),
            ("gender_word_gap", 20),
            ("languages", 100),
            ("language_trend", 20),
            ("categories", 20),
            ("websites", 100),
            ("cctld", 100),
            ("news_sites", 20),
            ("years", 20),
            ("ip_country", 50),
            ("occupations", 20),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect(),
        seeds: Seeds { sample: seed, holdout: seed },
        service_sample: Some(DEMO_SERVICE_SAMPLE),
        knn: KnnSettings::default(),
        top_k: 20,
        ..Default::default()
    };
    let path = dir.join("audit.json");
    let text = serde_json::to_string_pretty(&cfg).expect("config serialises");
    std::fs::write(&path, text + "\n").map_err(io(&path))?;
    Ok(path)
}
