//! Independent reference computations shared by the integration tests.
//! None of them call into the code paths they are used to check.

#![allow(dead_code)]

use ledstripe_core::ChannelWaveform;

/// Adaptive Simpson quadrature of `intensity_at` over `[t0, t0 + te]`.
///
/// The interval is first cut into pieces no longer than a quarter of the
/// shorter ON/OFF segment so every segment is sampled, then each piece is
/// refined until the Simpson estimates of its halves agree with the whole.
/// Pieces containing an edge keep splitting until they are negligibly small.
pub fn quadrature(ch: &ChannelWaveform, t0: f64, te: f64) -> f64 {
    let f = |t: f64| ch.intensity_at(t);
    let t_on = ch.on_duration_s();
    let shortest = t_on.min(ch.period_s() - t_on);
    let piece = if shortest > 0.0 {
        shortest / 4.0
    } else {
        ch.period_s() / 4.0
    };
    let pieces = (te / piece).ceil().max(1.0) as usize;
    let tol = 1e-15 * (ch.peak_intensity + ch.ambient_intensity).max(1e-300) * te;
    let h = te / pieces as f64;
    (0..pieces)
        .map(|i| {
            let a = t0 + i as f64 * h;
            let b = if i + 1 == pieces { t0 + te } else { a + h };
            let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
            simpson_refine(&f, a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, 60)
        })
        .sum()
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_refine(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || m <= a || m >= b {
        return left + right + delta / 15.0;
    }
    simpson_refine(f, a, m, fa, flm, fm, left, tol, depth - 1)
        + simpson_refine(f, m, b, fm, frm, fb, right, tol, depth - 1)
}

/// Lengths of the maximal runs of scanlines sitting on the field's top and
/// bottom plateaus, ignoring runs that touch either end of the field.
pub fn plateau_runs(gains: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let hi = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = gains.iter().copied().fold(f64::INFINITY, f64::min);
    let eps = 1e-9 * (hi - lo).max(f64::MIN_POSITIVE);
    let runs = |on: &dyn Fn(f64) -> bool| {
        let mut out = Vec::new();
        let mut start = None;
        for (i, &g) in gains.iter().enumerate() {
            match (on(g), start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    if s > 0 {
                        out.push(i - s);
                    }
                    start = None;
                }
                _ => {}
            }
        }
        out
    };
    (runs(&|g| g >= hi - eps), runs(&|g| g <= lo + eps))
}

/// Lowest threshold whose accept fraction `#{score >= t} / n` stays within
/// `far`, found by trying every score and every next-representable value
/// above a score as a cut point.
pub fn exhaustive_threshold(scores: &[f64], far: f64) -> f64 {
    let n = scores.len() as f64;
    let allowed = (far * n + 1e-9).floor();
    let mut best = f64::INFINITY;
    for &s in scores {
        for t in [s, s.next_up()] {
            let accepts = scores.iter().filter(|&&x| x >= t).count() as f64;
            if accepts <= allowed && t < best {
                best = t;
            }
        }
    }
    best
}

/// Naive O(N^2) one-sided DFT power of a real profile, `|X_k|^2 / N^2`,
/// doubled for bins with a mirror image.
pub fn naive_power(profile: &[f64]) -> Vec<f64> {
    let n = profile.len();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, &v) in profile.iter().enumerate() {
                let ang = -std::f64::consts::TAU * (k * j % n) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            let p = (re * re + im * im) / (n * n) as f64;
            if k == 0 || 2 * k == n {
                p
            } else {
                2.0 * p
            }
        })
        .collect()
}
