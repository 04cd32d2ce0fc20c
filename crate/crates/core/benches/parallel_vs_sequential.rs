use std::hint::black_box;

use cad_core::datagen::{generate_session, SynthConfig};
use cad_core::exec::Execution;
use cad_core::features::{extract_stream, Waveform};
use cad_core::models::{Arch, Model, ModelConfig};
use cad_core::training::{accumulate_gradients, Chunk, LossConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn waveform() -> Waveform {
    let cfg = SynthConfig {
        session_minutes: 0.25,
        ..SynthConfig::default()
    };
    generate_session(&cfg, 0, 0).unwrap().waveform
}

fn features(c: &mut Criterion) {
    let wave = waveform();
    let mut g = c.benchmark_group("features_15s");
    g.sample_size(10);
    for stream in ["mel", "prosody"] {
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(stream, name), &exec, |b, &exec| {
                b.iter(|| extract_stream(black_box(&wave), stream, exec).unwrap())
            });
        }
    }
    g.finish();
}

fn batch_gradient(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let chunks: Vec<Chunk> = (0..8)
        .map(|i| Chunk {
            features: Array2::from_shape_simple_fn((500, 43), || rng.random_range(-1.0..1.0)),
            labels: (0..500).map(|t| (t / 50 + i) % 4).collect(),
            session: format!("s{i}"),
            offset: 0,
        })
        .collect();
    let keyed: Vec<(u64, &Chunk)> = chunks.iter().enumerate().map(|(i, c)| (i as u64, c)).collect();
    let loss = LossConfig::new(0.999, 2.0, vec![1000; 4]).unwrap();
    let mut g = c.benchmark_group("batch_gradient_8x500");
    g.sample_size(10);
    for arch in [Arch::Bigru, Arch::Dtcnn] {
        let model = Model::new(ModelConfig::new(arch, 43, 32, 1, 4), 1).unwrap();
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(arch.as_str(), name), &exec, |b, &exec| {
                b.iter(|| accumulate_gradients(&model, black_box(&keyed), &loss, exec).unwrap())
            });
        }
    }
    g.finish();
}

fn chunked_eval(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Array2::from_shape_simple_fn((12_000, 43), || rng.random_range(-1.0..1.0));
    let model = Model::new(ModelConfig::new(Arch::Bigru, 43, 32, 1, 9), 2).unwrap();
    let mut g = c.benchmark_group("eval_2min_bigru");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| model.posteriors_chunked(black_box(&x), 3000, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, features, batch_gradient, chunked_eval);
criterion_main!(benches);
