use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use poolaudit_core::face_knn::{build_index, knn_annotate_batch, KnnConfig, ReferenceDb, ReferenceEntry};
use poolaudit_core::filter::{resolve_threshold_with, FilterSpec};
use poolaudit_core::ingest::EmbeddingMatrix;
use poolaudit_core::stats::Tally;
use poolaudit_core::text_annot::PatternSet;
use poolaudit_core::Exec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn executors() -> Vec<(&'static str, Exec)> {
    vec![("sequential", Exec::sequential()), ("parallel", Exec::default())]
}

fn threshold(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let scores: Vec<f64> = (0..2_000_000).map(|_| rng.random::<f64>()).collect();
    let spec = FilterSpec::top_fraction(0.3);
    let mut g = c.benchmark_group("top_fraction_2m");
    for (name, exec) in executors() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| resolve_threshold_with(&scores, &spec, &exec).unwrap())
        });
    }
    g.finish();
}

fn keywords(c: &mut Criterion) {
    let words = ["woman", "men", "asian", "portrait", "christian", "photo", "gay", "latina", "stock", "of"];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let texts: Vec<(String, bool)> = (0..50_000)
        .map(|_| {
            let t: Vec<&str> = (0..8).map(|_| words[rng.random_range(0..words.len())]).collect();
            (t.join(" "), rng.random_bool(0.3))
        })
        .collect();
    let set = PatternSet::identity();
    let mut g = c.benchmark_group("identity_tally_50k");
    g.sample_size(20);
    for (name, exec) in executors() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                exec.fold_reduce(
                    &texts,
                    Tally::new,
                    |mut t, (text, passed)| {
                        for l in set.matches(text) {
                            t.add("identity", &l, *passed);
                        }
                        t
                    },
                    Tally::merge,
                )
            })
        });
    }
    g.finish();
}

fn knn(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dims = 64;
    let rows: Vec<Vec<f32>> = (0..1000).map(|_| (0..dims).map(|_| rng.random::<f32>()).collect()).collect();
    let entries = (0..rows.len())
        .map(|i| ReferenceEntry {
            person_id: format!("p{i:04}"),
            row: i,
            gender: ["Female", "Male"][i % 2].into(),
            race: ["A", "B", "C", "D"][i % 4].into(),
        })
        .collect();
    let db = ReferenceDb::new(entries, EmbeddingMatrix::from_rows(&rows).unwrap()).unwrap();
    let index = build_index(&db).unwrap();
    let queries: Vec<Vec<f32>> = (0..2000).map(|_| (0..dims).map(|_| rng.random::<f32>()).collect()).collect();
    let refs: Vec<&[f32]> = queries.iter().map(Vec::as_slice).collect();
    let cfg = KnnConfig::race();
    let mut g = c.benchmark_group("knn_2k_queries");
    g.sample_size(10);
    for (name, exec) in executors() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| knn_annotate_batch(&refs, &index, &cfg, &exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, threshold, keywords, knn);
criterion_main!(benches);
