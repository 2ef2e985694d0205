use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rnav_core::harness::{batch_sequential, load_scenario, Policy};

fn batches(c: &mut Criterion) {
    let mut group = c.benchmark_group("batch_100_seeds");
    group.sample_size(10);
    let seeds: Vec<u64> = (1..=100).collect();
    let policy = Policy::default();
    for name in ["exp1", "exp2"] {
        let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
            .join("../../scenarios")
            .join(format!("{name}.json"));
        let scenario = load_scenario(&path).expect("scenario loads");
        group.bench_with_input(BenchmarkId::new("sequential", name), &scenario, |b, s| {
            b.iter(|| batch_sequential(s, &seeds, &policy))
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", name), &scenario, |b, s| {
            b.iter(|| rnav_core::harness::batch_parallel(s, &seeds, &policy))
        });
    }
    group.finish();
}

criterion_group!(benches, batches);
criterion_main!(benches);
