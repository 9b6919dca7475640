use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use stts_bench::{small_experiment, speller_fixture, warm_posterior};
use stts_core::algorithms::{top_two_select, TopTwoConfig};
use stts_core::harness::{run_experiment_with, Algorithm};
use stts_core::p300::{train_swlda, Label, SwldaParams};
use stts_core::stopping::{gaussian_mixture_stop, StoppingConfig};
use stts_core::RngStream;

fn posterior(c: &mut Criterion) {
    let mut g = c.benchmark_group("posterior");
    for j in [10usize, 100] {
        let post = warm_posterior(j, 0.5, 3 * j);
        g.bench_with_input(BenchmarkId::new("update", j), &post, |b, post| {
            b.iter_batched(
                || post.clone(),
                |mut p| {
                    p.update(black_box(1), black_box(0.7)).unwrap();
                    p
                },
                criterion::BatchSize::SmallInput,
            )
        });
        let mut rng = RngStream::from_seed(1);
        g.bench_with_input(BenchmarkId::new("sample_argmax", j), &post, |b, post| {
            b.iter(|| post.sample_argmax(&mut rng))
        });
        let cfg = TopTwoConfig::default();
        g.bench_with_input(BenchmarkId::new("top_two_select", j), &post, |b, post| {
            b.iter(|| top_two_select(post, &cfg, &mut rng))
        });
        let stop = StoppingConfig::default();
        g.bench_with_input(BenchmarkId::new("stop_check", j), &post, |b, post| {
            b.iter(|| {
                let (m, v) = post.all_moments();
                gaussian_mixture_stop(&m, &v, black_box(100), &stop)
            })
        });
    }
    g.finish();
}

fn speller(c: &mut Criterion) {
    let (sim, model) = speller_fixture(3);
    let mut rng = RngStream::from_seed(4);
    let mut buf = vec![0.0; sim.config().n_features()];
    let mut g = c.benchmark_group("speller");
    g.bench_function("epoch", |b| {
        b.iter(|| sim.generate_into(Label::Target, &mut rng, &mut buf))
    });
    g.bench_function("epoch_and_score", |b| {
        b.iter(|| {
            sim.generate_into(Label::NonTarget, &mut rng, &mut buf);
            model.score_values(&buf).unwrap()
        })
    });
    let data = sim.generate_calibration(300, 1500, &mut rng).unwrap();
    g.sample_size(10);
    g.bench_function("train_swlda_1800", |b| {
        b.iter(|| train_swlda(&data, &SwldaParams::default(), &mut RngStream::from_seed(5)).unwrap())
    });
    g.finish();
}

fn experiment(c: &mut Criterion) {
    let mut g = c.benchmark_group("experiment");
    g.sample_size(10);
    for alg in [Algorithm::Stts, Algorithm::Vtts, Algorithm::Random] {
        let cfg = small_experiment(alg, 10);
        g.bench_function(alg.name(), |b| b.iter(|| run_experiment_with(&cfg, false).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, posterior, speller, experiment);
criterion_main!(benches);
