//! Sequential against rayon-parallel execution on the same workloads.
//! Build with `--no-default-features` to time the fallback alone.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use bicx::bicomplex::all_cohomology;
use bicx::decomp::{decompose, tensor_table};
use bicx::par::Exec;
use bicx::random::{random_known_sum, rng, scramble};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn cohomology_tables(c: &mut Criterion) {
    let mut r = rng(1);
    let sum = random_known_sum(&mut r, 40, 4).bicomplex;
    let b = scramble(&mut r, &sum);
    let mut group = c.benchmark_group("all_cohomology");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |bench, &exec| {
            bench.iter(|| all_cohomology(black_box(&b), exec).unwrap())
        });
    }
    group.finish();
}

fn tensor_products(c: &mut Criterion) {
    let mut group = c.benchmark_group("tensor_table_max_2");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |bench, &exec| {
            bench.iter(|| tensor_table(black_box(2), exec).unwrap())
        });
    }
    group.finish();
}

fn decomposition_batch(c: &mut Criterion) {
    let inputs: Vec<_> = (0..24)
        .map(|seed| {
            let mut r = rng(seed);
            let sum = random_known_sum(&mut r, 24, 3).bicomplex;
            scramble(&mut r, &sum)
        })
        .collect();
    let mut group = c.benchmark_group("decompose_batch_24");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |bench, &exec| {
            bench.iter(|| exec.map(inputs.iter().collect(), |b| decompose(b).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, cohomology_tables, tensor_products, decomposition_batch);
criterion_main!(benches);
