//! Throughput of the data-parallel inner loops, sequential baseline vs the
//! crate's execution layer.
//!
//! The `seq` series always iterates sequentially; the `par` series goes
//! through `roomsec::exec`, which runs on rayon when the default
//! `parallel` feature is enabled and degrades to the same sequential loop
//! without it. Run `cargo bench` and `cargo bench --no-default-features`
//! to compare the two builds; IDs embed the active mode.

use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use roomsec::exec;
use roomsec::features::mel_spectrogram;
use roomsec::nn::{ConditioningMode, Model, ModelConfig, Tensor};
use roomsec::pipeline::{augment_epoch, synth_dataset};
use roomsec::rir::{generate_rir_bank, simulate_rir, BankConfig, RoomSpec, SimConfig};
use roomsec::signal::AudioClip;
use roomsec::util::derived_rng;

use rand::Rng;

fn bench_rir_batch(c: &mut Criterion) {
    let room = RoomSpec::from_t60("bench", [6.0, 5.0, 3.0], 0.4).unwrap();
    let cfg = SimConfig::default();
    let placements: Vec<([f64; 3], [f64; 3])> = (0..8)
        .map(|i| {
            let mut rng = derived_rng(900, &[i]);
            let p = |rng: &mut rand_chacha::ChaCha8Rng| {
                [
                    rng.random_range(0.5..5.5),
                    rng.random_range(0.5..4.5),
                    rng.random_range(0.5..2.5),
                ]
            };
            (p(&mut rng), p(&mut rng))
        })
        .collect();

    let mut group = c.benchmark_group("rir_batch_8");
    group.sample_size(10).measurement_time(Duration::from_secs(20));
    group.bench_function("seq", |b| {
        b.iter(|| {
            exec::seq_map(&placements, |&(src, mic)| {
                simulate_rir(&room, src, mic, &cfg).unwrap().clip().energy()
            })
        })
    });
    group.bench_function(exec::mode(), |b| {
        b.iter(|| {
            exec::par_map(&placements, |&(src, mic)| {
                simulate_rir(&room, src, mic, &cfg).unwrap().clip().energy()
            })
        })
    });
    group.finish();
}

fn bench_mel_batch(c: &mut Criterion) {
    let clips: Vec<AudioClip> = (0..32)
        .map(|i| {
            let f = 200.0 + 80.0 * i as f64;
            AudioClip::new(
                (0..16_000)
                    .map(|t| (2.0 * std::f64::consts::PI * f * t as f64 / 16_000.0).sin())
                    .collect(),
                16_000,
            )
            .unwrap()
        })
        .collect();

    let mut group = c.benchmark_group("mel_batch_32");
    group.sample_size(20);
    group.bench_function("seq", |b| {
        b.iter(|| exec::seq_map(&clips, |clip| mel_spectrogram(clip).unwrap().values()[0]))
    });
    group.bench_function(exec::mode(), |b| {
        b.iter(|| exec::par_map(&clips, |clip| mel_spectrogram(clip).unwrap().values()[0]))
    });
    group.finish();
}

fn bench_forward_batch(c: &mut Criterion) {
    // Conv/dense layers parallelize internally over the batch dimension,
    // so this measures the in-op execution layer.
    let cfg = ModelConfig::desk_scale(10, ConditioningMode::Conditioned);
    let model = Model::<f32>::new(cfg.clone(), 4);
    let n = 16;
    let len = n * cfg.input_bands * cfg.input_frames;
    let mut rng = derived_rng(901, &[]);
    let x = Tensor::<f32>::from_vec(
        &[n, 1, cfg.input_bands, cfg.input_frames],
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect(),
    );
    let r = Tensor::<f32>::from_vec(
        &[n, 1, cfg.input_bands, cfg.input_frames],
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect(),
    );

    let mut group = c.benchmark_group("conditioned_forward_16");
    group.sample_size(20);
    group.bench_function(BenchmarkId::from_parameter(exec::mode()), |b| {
        b.iter(|| model.forward_infer(black_box(&x), Some(black_box(&r))).unwrap())
    });
    group.finish();
}

fn bench_augment_epoch(c: &mut Criterion) {
    let dataset = synth_dataset(4, 10, 8, 77).unwrap();
    let items: Vec<(usize, &AudioClip)> = dataset
        .train_pool
        .iter()
        .map(|&i| (dataset.clips[i].0, &dataset.clips[i].1))
        .collect();
    let rooms = vec![RoomSpec::from_t60("aug_bench", [5.0, 4.0, 2.7], 0.3).unwrap()];
    let bank = generate_rir_bank(&rooms, 8, 5, &BankConfig::default()).unwrap();

    let mut group = c.benchmark_group("augment_epoch_32");
    group.sample_size(10).measurement_time(Duration::from_secs(15));
    group.bench_function(BenchmarkId::from_parameter(exec::mode()), |b| {
        let mut epoch = 0u64;
        b.iter(|| {
            epoch += 1;
            augment_epoch(&items, &bank, 0.5, epoch).unwrap()
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_rir_batch,
    bench_mel_batch,
    bench_forward_batch,
    bench_augment_epoch
);
criterion_main!(benches);
