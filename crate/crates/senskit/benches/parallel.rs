//! Compares the data-parallel batch evaluator against the sequential
//! fallback on the synthetic-lab programs that dominate training time.
//!
//! Build with default features to pit rayon against the sequential path;
//! with `--no-default-features` both arms run sequentially, which is
//! useful for measuring the dispatch overhead of the parallel wrapper.

use criterion::{criterion_group, criterion_main, Criterion, Throughput};

use senskit::nnlab::{build_mlp, gen_synthetic, init_weights, DataSpec};
use senskit::{ExprGraph, Program};

struct Fixture {
    rows: Vec<Vec<f64>>,
    metrics: Program,
    grad: Program,
    ps_fractional: Program,
}

fn fixture() -> Fixture {
    let data = gen_synthetic(&DataSpec {
        n_train_per_class: 128,
        n_test_per_class: 0,
        ..DataSpec::default()
    });
    let compiled = build_mlp(ExprGraph::new())
        .expect("model graph builds")
        .compile()
        .expect("model programs compile");
    let weights = init_weights(42);
    let rows: Vec<Vec<f64>> = data
        .train
        .images
        .iter()
        .zip(&data.train.labels)
        .map(|(pixels, &label)| compiled.binding_row(&weights, pixels, label))
        .collect();
    Fixture {
        rows,
        metrics: compiled.metrics,
        grad: compiled.grad,
        ps_fractional: compiled.ps_fractional,
    }
}

fn bench_batch(c: &mut Criterion) {
    let fx = fixture();
    for (name, program) in [
        ("metrics", &fx.metrics),
        ("gradient", &fx.grad),
        ("fractional_ps", &fx.ps_fractional),
    ] {
        let mut group = c.benchmark_group(format!("batch_{name}"));
        group.throughput(Throughput::Elements(fx.rows.len() as u64));
        group.bench_function("parallel", |b| {
            b.iter(|| program.evaluate_batch(&fx.rows).expect("bindings are valid"))
        });
        group.bench_function("sequential", |b| {
            b.iter(|| program.evaluate_batch_sequential(&fx.rows).expect("bindings are valid"))
        });
        group.finish();
    }
}

criterion_group!(benches, bench_batch);
criterion_main!(benches);
