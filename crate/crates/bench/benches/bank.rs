use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use hopfbank::shift::ssb_shift;
use hopfbank::signal::{generate_sine, mix_noise};
use hopfbank::{BandwidthRequest, BankConfig, DetectorBank, Features, SolverMethod};

const SR: f64 = 48_000.0;

fn input() -> Vec<f64> {
    let tone = generate_sine(440.0, 0.25, SR, 1.0, 0.0).unwrap();
    mix_noise(&tone, 0.0, 1).unwrap().samples
}

/// 12 detectors per octave from 55 Hz.
fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| 55.0 * 2f64.powf(k as f64 / 12.0)).collect()
}

fn bank_throughput(c: &mut Criterion) {
    let x = input();
    let mut group = c.benchmark_group("bank");
    group.sample_size(10);
    for method in [SolverMethod::RungeKutta4, SolverMethod::CentralDifference] {
        for n in [1usize, 12, 88] {
            let cfg =
                BankConfig::new(SR, method).with_detectors(&grid(n), BandwidthRequest::Minimum);
            group.throughput(Throughput::Elements((x.len() * n) as u64));
            group.bench_with_input(BenchmarkId::new(method.to_string(), n), &cfg, |b, cfg| {
                b.iter_batched(
                    || DetectorBank::build(cfg.clone()).unwrap(),
                    |mut bank| bank.process(&x).unwrap(),
                    criterion::BatchSize::LargeInput,
                )
            });
        }
    }
    group.finish();
}

fn features(c: &mut Criterion) {
    let x = input();
    let freqs = grid(88);
    let mut group = c.benchmark_group("features");
    group.sample_size(10);
    group.throughput(Throughput::Elements((x.len() * freqs.len()) as u64));
    let variants = [
        ("plain", Features::default()),
        (
            "shift",
            Features {
                frequency_shift: true,
                ..Features::default()
            },
        ),
        (
            "normalize",
            Features {
                amplitude_normalize: true,
                ..Features::default()
            },
        ),
    ];
    for (name, f) in variants {
        let cfg = BankConfig::new(SR, SolverMethod::RungeKutta4)
            .with_detectors(&freqs, BandwidthRequest::Minimum)
            .with_features(f);
        group.bench_function(name, |b| {
            b.iter_batched(
                || DetectorBank::build(cfg.clone()).unwrap(),
                |mut bank| bank.process(&x).unwrap(),
                criterion::BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

fn shifter(c: &mut Criterion) {
    let x = input();
    let mut group = c.benchmark_group("ssb_shift");
    group.throughput(Throughput::Elements(x.len() as u64));
    group.bench_function("255 taps", |b| b.iter(|| ssb_shift(&x, 3150.0, SR)));
    group.finish();
}

criterion_group!(benches, bank_throughput, features, shifter);
criterion_main!(benches);
