use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ledstripe_core::defense::{destripe, detect_stripes};
use ledstripe_core::harness::{fixture_dataset, fixture_image, Preset};
use ledstripe_core::optimizer::{fitness, Bounds, CmaEs, FitnessConfig};
use ledstripe_core::oracle::{calibrate_threshold, surrogate_embed, SurrogateOracle};
use ledstripe_core::sensor::render_stripe_field;
use ledstripe_core::trigger::inject_trigger;
use ledstripe_core::{ChannelWaveform, Orientation, SensorConfig, TriggerSpec};

fn waveform(c: &mut Criterion) {
    let ch = ChannelWaveform::new(344.89, 0.3865, 0.0, 100.0, 10.0).unwrap();
    c.bench_function("integrate", |b| {
        b.iter(|| ch.integrate(black_box(0.0123), black_box(1.0 / 200.0)))
    });
    let w = Preset::PaperColor.params().to_waveform(0.0).unwrap();
    let sensor = SensorConfig::default();
    c.bench_function("render_stripe_field/96", |b| {
        b.iter(|| render_stripe_field(black_box(&w), &sensor, 0.0).unwrap())
    });
}

fn image(c: &mut Criterion) {
    let img = fixture_image(1, 0, 0);
    let spec = TriggerSpec::new(
        Preset::PaperMono.params().to_waveform(0.0).unwrap(),
        SensorConfig::default(),
        0.0,
    );
    let striped = inject_trigger(&img, &spec).unwrap();
    c.bench_function("inject_trigger", |b| {
        b.iter(|| inject_trigger(black_box(&img), &spec).unwrap())
    });
    c.bench_function("surrogate_embed", |b| {
        b.iter(|| surrogate_embed(black_box(&img)).unwrap())
    });
    c.bench_function("detect_stripes", |b| {
        b.iter(|| detect_stripes(black_box(&striped), Orientation::ColumnWise).unwrap())
    });
    c.bench_function("destripe", |b| {
        b.iter(|| destripe(black_box(&striped), Orientation::ColumnWise))
    });
}

fn search(c: &mut Criterion) {
    let data = fixture_dataset(3, 8).unwrap();
    let threshold = calibrate_threshold(
        &SurrogateOracle::new(0.0),
        &data.images,
        &data.impostor,
        0.1,
    )
    .unwrap();
    let oracle = SurrogateOracle::new(threshold);
    let cfg = FitnessConfig::new(data.images.clone(), data.impostor.clone());
    let omega = Preset::PaperMono.params();
    c.bench_function("fitness/28_pairs", |b| {
        b.iter(|| fitness(black_box(&omega), &cfg, &oracle).unwrap())
    });

    c.bench_function("cma_generation/6d", |b| {
        let mut es = CmaEs::centered(Bounds::unit(6), 1).unwrap();
        b.iter(|| {
            let cands = es.ask();
            let values: Vec<f64> = cands
                .iter()
                .map(|c| {
                    -c.repaired
                        .iter()
                        .map(|x| (x - 0.3) * (x - 0.3))
                        .sum::<f64>()
                })
                .collect();
            es.tell(&cands, &values).unwrap();
        })
    });
}

criterion_group!(benches, waveform, image, search);
criterion_main!(benches);
