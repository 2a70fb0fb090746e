use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use relred::analysis::{census, census_sampled, DEFAULT_SEED};
use relred::Exec;
use std::hint::black_box;

const STRATEGIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn exact_census(c: &mut Criterion) {
    let mut g = c.benchmark_group("census");
    g.sample_size(10);
    for (d, n) in [(2, 3), (2, 4)] {
        for (name, exec) in STRATEGIES {
            g.bench_with_input(BenchmarkId::new(name, format!("d{d}n{n}")), &(d, n), |b, &(d, n)| {
                b.iter(|| census(black_box(d), black_box(n), exec).unwrap())
            });
        }
    }
    g.finish();
}

fn sampled_census(c: &mut Criterion) {
    let mut g = c.benchmark_group("census_sampled");
    g.sample_size(10);
    for (d, n) in [(2, 5), (3, 3)] {
        for (name, exec) in STRATEGIES {
            g.bench_with_input(BenchmarkId::new(name, format!("d{d}n{n}")), &(d, n), |b, &(d, n)| {
                b.iter(|| census_sampled(black_box(d), black_box(n), 2000, DEFAULT_SEED, exec).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, exact_census, sampled_census);
criterion_main!(benches);
