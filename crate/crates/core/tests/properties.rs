//! Property tests over randomized inputs.

use ledstripe_core::defense::{destripe, detect_stripes};
use ledstripe_core::harness::{fixture_dataset, fixture_image, run_protocol, ProtocolConfig};
use ledstripe_core::optimizer::{fitness_of_waveform, Bounds, CmaEs, FitnessConfig};
use ledstripe_core::oracle::{
    calibrate_threshold_from_scores, surrogate_embed, FaceOracle, SurrogateOracle,
};
use ledstripe_core::sensor::{render_raw_field, render_stripe_field};
use ledstripe_core::trigger::inject_trigger;
use ledstripe_core::waveform::perceived_color;
use ledstripe_core::{
    ChannelWaveform, ImageBuffer, LedWaveform, Orientation, SensorConfig, TriggerSpec,
};
use proptest::prelude::*;

fn channel() -> impl Strategy<Value = ChannelWaveform> {
    (
        100.0..1000.0f64,
        0.0..=1.0f64,
        -0.02..0.02f64,
        1.0..200.0f64,
        0.0..100.0f64,
    )
        .prop_map(|(f, tau, ph, peak, amb)| ChannelWaveform::new(f, tau, ph, peak, amb).unwrap())
}

fn small_image() -> impl Strategy<Value = ImageBuffer> {
    (any::<u64>(), 16usize..40, 16usize..40).prop_map(|(seed, w, h)| {
        let mut s = seed | 1;
        ImageBuffer::from_fn(w, h, |_, _| {
            let mut next = || {
                s ^= s << 13;
                s ^= s >> 7;
                s ^= s << 17;
                (s % 256) as u8
            };
            [next(), next(), next()]
        })
    })
}

fn scanline_luma_std(img: &ImageBuffer) -> f64 {
    let w = img.width();
    let cols: Vec<f64> = (0..w)
        .map(|x| {
            (0..img.height())
                .map(|y| ledstripe_core::image::luminance(img.get(x, y)))
                .sum::<f64>()
        })
        .map(|s| s / img.height() as f64)
        .collect();
    let m = cols.iter().sum::<f64>() / w as f64;
    (cols.iter().map(|c| (c - m).powi(2)).sum::<f64>() / w as f64).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn intensity_is_periodic(ch in channel(), t in -1.0..1.0f64) {
        prop_assert_eq!(ch.intensity_at(t), ch.intensity_at(t + ch.period_s()));
    }

    #[test]
    fn integral_is_additive(ch in channel(), t0 in -0.1..0.1f64, a in 0.0..0.02f64, b in 0.0..0.02f64) {
        let whole = ch.integrate(t0, a + b);
        let parts = ch.integrate(t0, a) + ch.integrate(t0 + a, b);
        let scale = (ch.peak_intensity + ch.ambient_intensity) * (a + b);
        prop_assert!((whole - parts).abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE), "{whole} vs {parts}");
    }

    #[test]
    fn integral_grows_with_duty(ch in channel(), t0 in -0.1..0.1f64, te in 0.0..0.02f64, d in 0.0..1.0f64) {
        let lo = ChannelWaveform { duty_cycle: ch.duty_cycle * d, ..ch };
        let (a, b) = (lo.integrate(t0, te), ch.integrate(t0, te));
        prop_assert!(a <= b + 1e-12 * b.abs().max(1.0), "{} > {}", a, b);
    }

    #[test]
    fn perceived_color_ignores_frequency_and_phase(
        tau in 0.0..=1.0f64,
        f1 in 100.0..1000.0f64,
        f2 in 100.0..1000.0f64,
        rg in 0.0..1.0f64,
        rb in 0.0..1.0f64,
    ) {
        // boundary truncation moves each average by at most (1 - tau) t_l / window
        let window = 5.0;
        let a = perceived_color(&LedWaveform::monochromatic(f1, tau, 100.0, 0.0).unwrap(), window).unwrap();
        let b = perceived_color(&LedWaveform::color_red_periods([f2, f1, f2], tau, rg, rb, 100.0, 0.0).unwrap(), window).unwrap();
        for c in 0..3 {
            let reference = a[c].max(b[c]);
            if reference > 0.0 {
                prop_assert!((a[c] - b[c]).abs() / reference < 0.005);
            } else {
                prop_assert_eq!(a[c], b[c]);
            }
        }
    }

    #[test]
    fn field_gains_are_normalized(f in 100.0..1000.0f64, tau in 0.01..=1.0f64, phase in 0.0..0.01f64) {
        let w = LedWaveform::monochromatic(f, tau, 100.0, 0.0).unwrap();
        let sensor = SensorConfig::default();
        // short pulses can fall entirely between the frame's exposure windows
        let lit = render_raw_field(&w, &sensor, phase).gains.iter().flatten().any(|&g| g > 0.0);
        let rendered = render_stripe_field(&w, &sensor, phase);
        prop_assert_eq!(lit, rendered.is_ok());
        prop_assume!(lit);
        let field = rendered.unwrap();
        prop_assert!(field.gains.iter().flatten().all(|g| (0.0..=1.0).contains(g)));
        prop_assert!(field.gains.iter().flatten().any(|&g| g == 1.0));
    }

    #[test]
    fn contrast_falls_with_ambient(f in 100.0..1000.0f64, tau in 0.0..1.0f64, phase in 0.0..0.01f64) {
        let sensor = SensorConfig::default().with_scanlines(200);
        let w = LedWaveform::monochromatic(f, tau.max(0.01), 100.0, 0.0).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..=14 {
            let lit = w.with_ambient_ratio(k as f64 * 0.1).unwrap();
            // without ambient light a short pulse can miss every exposure window
            if k == 0 && render_raw_field(&lit, &sensor, phase).gains.iter().flatten().all(|&g| g == 0.0) {
                continue;
            }
            let field = render_stripe_field(&lit, &sensor, phase).unwrap();
            prop_assert!(field.contrast() <= last + 1e-12);
            last = field.contrast();
        }
    }

    #[test]
    fn orientations_are_transposes(seed in any::<u64>(), n in 16usize..48, f in 100.0..1000.0f64, tau in 0.05..0.95f64) {
        let img = ImageBuffer::from_fn(n, n, |x, y| {
            let v = (x as u64 * 31 + y as u64 * 17 + seed % 97) % 200 + 20;
            [v as u8, (v / 2) as u8, (255 - v) as u8]
        });
        let w = LedWaveform::monochromatic(f, tau, 100.0, 0.0).unwrap();
        let col = inject_trigger(&img, &TriggerSpec::new(w, SensorConfig::default(), 0.0)).unwrap();
        let row = inject_trigger(
            &img.transpose(),
            &TriggerSpec::new(w, SensorConfig::default().with_orientation(Orientation::RowWise), 0.0),
        )
        .unwrap();
        prop_assert_eq!(row, col.transpose());
    }

    #[test]
    fn injection_keeps_mean_luminance(img in small_image(), f in 100.0..1000.0f64, tau in 0.05..=1.0f64, amb in 0.0..1.4f64) {
        let w = LedWaveform::monochromatic(f, tau, 100.0, 0.0).unwrap().with_ambient_ratio(amb).unwrap();
        let out = inject_trigger(&img, &TriggerSpec::new(w, SensorConfig::default(), 0.0)).unwrap();
        let clipped = out.pixels().iter().flatten().any(|&v| v == 0 || v == 255);
        let bound = if clipped { f64::INFINITY } else { 1.0 };
        prop_assert!((out.mean_luminance() - img.mean_luminance()).abs() <= bound);
    }

    #[test]
    fn full_duty_injection_is_identity(img in small_image(), f in 100.0..1000.0f64, phase in -0.01..0.01f64, times in 1usize..4) {
        let spec = TriggerSpec::new(LedWaveform::monochromatic(f, 1.0, 100.0, 0.0).unwrap(), SensorConfig::default(), phase);
        let mut out = img.clone();
        for _ in 0..times {
            out = inject_trigger(&out, &spec).unwrap();
        }
        prop_assert_eq!(out, img);
    }

    #[test]
    fn injection_is_deterministic(img in small_image(), f in 100.0..1000.0f64, tau in 0.0..=1.0f64, phase in 0.0..0.01f64) {
        let spec = TriggerSpec::new(LedWaveform::monochromatic(f, tau, 100.0, 0.0).unwrap(), SensorConfig::default(), phase);
        prop_assert_eq!(inject_trigger(&img, &spec).unwrap(), inject_trigger(&img, &spec).unwrap());
    }

    #[test]
    fn calibration_is_monotone(scores in prop::collection::vec(-1.0..1.0f64, 1..300), a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let t_lo = calibrate_threshold_from_scores(&scores, lo).unwrap();
        let t_hi = calibrate_threshold_from_scores(&scores, hi).unwrap();
        prop_assert!(t_lo >= t_hi);
    }

    #[test]
    fn detection_ignores_brightness(seed in any::<u64>(), f in 100.0..1000.0f64, tau in 0.05..0.95f64) {
        // values up to 127 double without rounding, so the profile scales exactly
        let base = ImageBuffer::from_fn(64, 32, |x, y| {
            let v = ((x as u64 * 7 + y as u64 * 3 + seed % 13) % 80 + 20) as u8;
            [v, v, v]
        });
        let w = LedWaveform::monochromatic(f, tau, 100.0, 0.0).unwrap();
        let img = inject_trigger(&base, &TriggerSpec::new(w, SensorConfig::default(), 0.0)).unwrap();
        let halved = ImageBuffer::from_fn(64, 32, |x, y| img.get(x, y).map(|v| v.min(127)));
        let doubled = ImageBuffer::from_fn(64, 32, |x, y| halved.get(x, y).map(|v| v * 2));
        let a = detect_stripes(&halved, Orientation::ColumnWise).unwrap();
        let b = detect_stripes(&doubled, Orientation::ColumnWise).unwrap();
        prop_assert_eq!(a.dominant_bin, b.dominant_bin);
        prop_assert!((a.peak_energy_db - b.peak_energy_db).abs() < 1e-9);
    }

    #[test]
    fn destripe_is_idempotent(img in small_image()) {
        let once = destripe(&img, Orientation::ColumnWise);
        let twice = destripe(&once, Orientation::ColumnWise);
        for (p, q) in once.pixels().iter().zip(twice.pixels()) {
            for c in 0..3 {
                prop_assert!((p[c] as i32 - q[c] as i32).abs() <= 1);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scanline_contrast_falls_with_ambient(level in 40u8..200, f in 100.0..1000.0f64, tau in 0.05..0.95f64) {
        // a flat card, so the scanline profile carries nothing but the stripe
        let img = ImageBuffer::filled(96, 32, [level, level, level]);
        let w = LedWaveform::monochromatic(f, tau, 100.0, 0.0).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..=7 {
            let spec = TriggerSpec::new(w.with_ambient_ratio(k as f64 * 0.2).unwrap(), SensorConfig::default(), 0.0);
            let std = scanline_luma_std(&inject_trigger(&img, &spec).unwrap());
            prop_assert!(std <= last, "ratio {}: {std} > {last}", k as f64 * 0.2);
            last = std;
        }
    }

    #[test]
    fn destripe_is_idempotent_on_cards(id in 0usize..50, striped in any::<bool>(), f in 100.0..1000.0f64, tau in 0.05..0.95f64) {
        let mut img = fixture_image(21, id, 0);
        if striped {
            let w = LedWaveform::monochromatic(f, tau, 100.0, 0.0).unwrap();
            img = inject_trigger(&img, &TriggerSpec::new(w, SensorConfig::default(), 0.0)).unwrap();
        }
        let once = destripe(&img, Orientation::ColumnWise);
        let twice = destripe(&once, Orientation::ColumnWise);
        for (p, q) in once.pixels().iter().zip(twice.pixels()) {
            for c in 0..3 {
                prop_assert!((p[c] as i32 - q[c] as i32).abs() <= 1);
            }
        }
    }

    #[test]
    fn destripe_commutes_with_translation(f in 150.0..1000.0f64, tau in 0.1..0.9f64, shift in 1usize..8) {
        let sensor = SensorConfig::default();
        let w = LedWaveform::monochromatic(f, tau, 100.0, 0.0).unwrap();
        // the card spans several stripe periods so the field is periodic within it
        let width = ((3.0 / f / sensor.scanline_interval_s).ceil() as usize).max(128);
        let gray = ImageBuffer::filled(width, 40, [128, 128, 128]);
        let a = inject_trigger(&gray, &TriggerSpec::new(w, sensor, 0.0)).unwrap();
        let b = inject_trigger(&gray, &TriggerSpec::new(w, sensor, shift as f64 * sensor.scanline_interval_s)).unwrap();
        let (da, db) = (destripe(&a, Orientation::ColumnWise), destripe(&b, Orientation::ColumnWise));
        // b's column x shows the stripe a has at column x + shift
        let margin = 16;
        for x in margin..width - margin - shift {
            for y in 0..40 {
                let (p, q) = (da.get(x + shift, y), db.get(x, y));
                prop_assert!((p[1] as i32 - q[1] as i32).abs() <= 2, "column {x}: {p:?} vs {q:?}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn embedding_ignores_full_duty_phase(id in 0usize..20, phase in -0.01..0.01f64) {
        let img = fixture_image(3, id, 0);
        let w = LedWaveform::monochromatic(344.89, 1.0, 100.0, 0.0).unwrap();
        let out = inject_trigger(&img, &TriggerSpec::new(w, SensorConfig::default(), phase)).unwrap();
        prop_assert_eq!(surrogate_embed(&out).unwrap(), surrogate_embed(&img).unwrap());
    }

    #[test]
    fn verification_is_symmetric(a in 0usize..20, b in 0usize..20) {
        let oracle = SurrogateOracle::new(0.9);
        let (ia, ib) = (fixture_image(5, a, 0), fixture_image(5, b, 1));
        let (pa, pb) = (oracle.probe(&ia).unwrap(), oracle.probe(&ib).unwrap());
        prop_assert_eq!(oracle.verify(&pa, &pb).unwrap(), oracle.verify(&pb, &pa).unwrap());
    }

    #[test]
    fn fitness_ignores_pair_order(rot in 0usize..10, f in 100.0..1000.0f64, tau in 0.0..1.0f64) {
        let data = fixture_dataset(11, 5).unwrap();
        let oracle = SurrogateOracle::new(0.8);
        let w = LedWaveform::monochromatic(f, tau, 100.0, 0.0).unwrap();
        let mut pairs = data.impostor.clone();
        let base = fitness_of_waveform(&w, &FitnessConfig::new(data.images.clone(), pairs.clone()), &oracle).unwrap();
        let n = pairs.len();
        pairs.rotate_left(rot % n);
        pairs.reverse();
        let permuted = fitness_of_waveform(&w, &FitnessConfig::new(data.images.clone(), pairs), &oracle).unwrap();
        prop_assert_eq!(base.count, permuted.count);
    }

    #[test]
    fn more_attempts_never_lose(f in 100.0..1000.0f64, tau in 0.0..1.0f64, threshold in 0.7..0.95f64) {
        let data = fixture_dataset(13, 5).unwrap();
        let oracle = SurrogateOracle::new(threshold);
        let w = LedWaveform::monochromatic(f, tau, 100.0, 0.0).unwrap();
        let mut cfg = FitnessConfig::new(data.images.clone(), data.impostor.clone());
        cfg.attempts = 1;
        let one = fitness_of_waveform(&w, &cfg, &oracle).unwrap();
        cfg.attempts = 3;
        let three = fitness_of_waveform(&w, &cfg, &oracle).unwrap();
        prop_assert!(three.count >= one.count);

        let proto = ProtocolConfig::new(w, SensorConfig::default());
        let r1 = run_protocol(&data, &proto.clone().with_attempts(1), &oracle, None).unwrap();
        let r3 = run_protocol(&data, &proto.with_attempts(3), &oracle, None).unwrap();
        prop_assert!(r3.attack_success_rate.unwrap() >= r1.attack_success_rate.unwrap());
    }

    #[test]
    fn covariance_stays_positive_definite(seed in any::<u64>(), dim in 2usize..7, tilt in 0.1..10.0f64) {
        let mut es = CmaEs::centered(Bounds::unit(dim), seed).unwrap();
        let target: Vec<f64> = (0..dim).map(|i| (i as f64 + 0.5) / dim as f64).collect();
        for _ in 0..500 {
            let cands = es.ask();
            let values: Vec<f64> = cands
                .iter()
                .map(|c| {
                    -c.repaired
                        .iter()
                        .zip(&target)
                        .enumerate()
                        .map(|(i, (x, t))| tilt.powi(i as i32) * (x - t).powi(2))
                        .sum::<f64>()
                })
                .collect();
            es.tell(&cands, &values).unwrap();
            let c = es.covariance().clone();
            for i in 0..dim {
                for j in 0..dim {
                    prop_assert!((c[(i, j)] - c[(j, i)]).abs() <= 1e-12 * c[(i, i)].abs().max(1.0));
                }
            }
            let min_eig = c.symmetric_eigen().eigenvalues.min();
            prop_assert!(min_eig > 1e-14, "min eigenvalue {min_eig}");
        }
    }
}
