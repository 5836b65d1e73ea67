use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dtcbf::io::ProblemFile;
use dtcbf::verifier::{verify, Mode, VerifierConfig};

fn case_study() -> dtcbf::ProblemSpec {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../cli/examples/wang2023.json");
    let text = std::fs::read_to_string(path).expect("case-study file");
    let mut p = ProblemFile::from_json(&text).unwrap().to_problem().unwrap();
    p.pi = None;
    p
}

fn unknown_policy(c: &mut Criterion) {
    let problem = case_study();
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut counts = vec![1, cores.max(2), 4];
    counts.sort_unstable();
    counts.dedup();

    let mut group = c.benchmark_group("unknown-policy case study");
    group.sample_size(10);
    for workers in counts {
        let config = VerifierConfig {
            mode: Mode::Unknown,
            workers,
            ..VerifierConfig::default()
        };
        group.bench_with_input(
            BenchmarkId::new("workers", workers),
            &config,
            |b, config| b.iter(|| black_box(verify(&problem, config).unwrap().stats.iterations)),
        );
    }
    group.finish();
}

criterion_group!(benches, unknown_policy);
criterion_main!(benches);
