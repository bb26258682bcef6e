//! Default worker pool vs. a single worker on the data-parallel hot paths.
//! Built with `--no-default-features` both variants run the sequential code.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rics::config::Config;
use rics::onn::{init_model, loss_and_grad};
use rics::rng::{self, Domain};
use rics::synth::make_dataset;
use rics::throughput::{standard_schemes, uniform_confusion, Inference, ThroughputExperiment};

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let all = rayon::ThreadPoolBuilder::new().build().unwrap();
    vec![("sequential", one), ("parallel", all)]
}

fn bench(c: &mut Criterion) {
    let config = Config::default();
    let setup = config.capture_setup().unwrap();
    let data = make_dataset(8, &setup, rng::derive(1, Domain::TrainSet)).unwrap();
    let batch: Vec<(&[f64], usize)> = data.iter().map(|(img, class)| (img.pixels(), class.index())).collect();
    let model = init_model(4, &mut rng::substream(1, Domain::ModelInit, 4)).unwrap();
    let experiment = ThroughputExperiment {
        scenario: config.scenario().unwrap(),
        n_elements: config.surface.n_elements.clone(),
        n_absorb: config.surface.n_absorb,
        frame: config.frame_params(),
        frames: 500,
        capture: None,
    };
    let schemes = standard_schemes(
        Inference::Emulated(Box::new(uniform_confusion(0.85).unwrap())),
        Inference::Emulated(Box::new(uniform_confusion(0.9).unwrap())),
    );

    let mut group = c.benchmark_group("hot_paths");
    group.sample_size(10);
    for (label, pool) in pools() {
        group.bench_function(BenchmarkId::new("make_dataset_8x8", label), |b| {
            b.iter(|| pool.install(|| make_dataset(8, &setup, rng::derive(2, Domain::TrainSet)).unwrap()))
        });
        group.bench_function(BenchmarkId::new("loss_and_grad_4layer_batch64", label), |b| {
            b.iter(|| pool.install(|| loss_and_grad(&model, &batch).unwrap()))
        });
        group.bench_function(BenchmarkId::new("throughput_sweep_500_frames", label), |b| {
            b.iter(|| pool.install(|| experiment.run(&schemes, 3).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
