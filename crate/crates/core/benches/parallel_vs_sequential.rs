use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use sftwave::engine::Strategy;
use sftwave::kernels::GaussOrder;
use sftwave::signal::{make_test_signal, TestSignal};
use sftwave::sliding_sum::{sliding_sum_with, SlidingSumVariant};
use sftwave::smoothers::{BetaChoice, TransformSpec};
use sftwave::Workers;

fn sliding_sums(c: &mut Criterion) {
    let f: Vec<f64> = make_test_signal(TestSignal::SeededNoise, 1 << 18, 3).unwrap().samples().to_vec();
    let mut group = c.benchmark_group("sliding_sum");
    for variant in [SlidingSumVariant::Flat, SlidingSumVariant::Blocked8] {
        for (label, workers) in [("sequential", Workers::SEQUENTIAL), ("parallel", Workers::ALL)] {
            group.bench_with_input(BenchmarkId::new(variant.to_string(), label), &workers, |b, w| {
                b.iter(|| sliding_sum_with(black_box(&f), 1537, variant, *w).unwrap())
            });
        }
    }
    group.finish();
}

fn smoothing(c: &mut Criterion) {
    let sig = make_test_signal(TestSignal::SeededNoise, 102_400, 3).unwrap();
    let mut group = c.benchmark_group("gauss_p6");
    group.sample_size(20);
    for strategy in [Strategy::KernelIntegral, Strategy::SlidingSum] {
        let spec = TransformSpec::gaussian(GaussOrder::Smooth, 256.0, None, 6, BetaChoice::Base, 0)
            .unwrap()
            .with_strategy(strategy);
        for (label, workers) in [("sequential", Workers::SEQUENTIAL), ("parallel", Workers::ALL)] {
            group.bench_with_input(BenchmarkId::new(strategy.to_string(), label), &workers, |b, w| {
                b.iter(|| spec.apply_with(black_box(&sig), *w).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, sliding_sums, smoothing);
criterion_main!(benches);
