//! Stripe detection and spectral-notch destriping.
//!
//! Both work on scanline-mean profiles: the mean of every scanline (column
//! for column-wise sensors, row for row-wise), which turns a stripe pattern
//! into a one-dimensional periodic signal.

use std::fmt;
use std::io::Write;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{run_protocol, Dataset, EvalReport, ProtocolConfig};
use crate::image::{luminance, ImageBuffer};
use crate::oracle::FaceOracle;
use crate::sensor::Orientation;
use crate::trigger::quantize;

/// Shortest scanline axis accepted by [`detect_stripes`].
pub const MIN_SCANLINES: usize = 16;
/// Reported peak energy when there is no non-DC energy at all.
pub const ENERGY_FLOOR_DB: f64 = -120.0;
/// A bin is attenuated when its energy exceeds this multiple of the reference.
pub const NOTCH_FACTOR: f64 = 5.0;
/// Bins at or above this multiple of the notch threshold are removed entirely.
pub const NOTCH_RAMP: f64 = 2.0;
/// Upper bound on notch passes in [`destripe`].
pub const MAX_PASSES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripeSpectrum {
    pub orientation: Orientation,
    /// Dominant non-DC frequency, in `(0, 0.5]`.
    pub dominant_freq_cycles_per_scanline: f64,
    /// Dominant bin energy relative to total non-DC energy.
    pub peak_energy_db: f64,
    /// Index of the dominant bin.
    pub dominant_bin: usize,
    /// One-sided power of the mean-removed luminance profile, `|X_k|^2 / N^2`
    /// for `k = 0..=N/2` (entry 0 is zero).
    pub bin_power: Vec<f64>,
}

impl StripeSpectrum {
    /// Absolute power of bin `k` in dB.
    pub fn bin_power_db(&self, k: usize) -> f64 {
        power_db(self.bin_power[k])
    }
}

fn power_db(p: f64) -> f64 {
    if p > 0.0 {
        (10.0 * p.log10()).max(ENERGY_FLOOR_DB)
    } else {
        ENERGY_FLOOR_DB
    }
}

/// Mean value of each scanline under `f`.
fn scanline_profile(
    img: &ImageBuffer,
    orientation: Orientation,
    f: impl Fn([u8; 3]) -> f64,
) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    match orientation {
        Orientation::ColumnWise => (0..w)
            .map(|x| (0..h).map(|y| f(img.get(x, y))).sum::<f64>() / h as f64)
            .collect(),
        Orientation::RowWise => (0..h)
            .map(|y| (0..w).map(|x| f(img.get(x, y))).sum::<f64>() / w as f64)
            .collect(),
    }
}

fn other(o: Orientation) -> Orientation {
    match o {
        Orientation::ColumnWise => Orientation::RowWise,
        Orientation::RowWise => Orientation::ColumnWise,
    }
}

fn spectrum(profile: &[f64]) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = profile.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new()
        .plan_fft_forward(buf.len())
        .process(&mut buf);
    buf
}

/// One-sided energy per bin, `k = 0..=N/2`, normalized by `N^2`. Mirrored
/// bins are folded in so the total equals the profile's mean square.
fn one_sided_energy(spec: &[Complex<f64>]) -> Vec<f64> {
    let n = spec.len();
    let norm = (n * n) as f64;
    (0..=n / 2)
        .map(|k| {
            let e = spec[k].norm_sqr() / norm;
            if k == 0 || 2 * k == n {
                e
            } else {
                2.0 * e
            }
        })
        .collect()
}

pub fn detect_stripes(img: &ImageBuffer, orientation: Orientation) -> Result<StripeSpectrum> {
    let n = orientation.scanlines(img.width(), img.height());
    if n < MIN_SCANLINES {
        return Err(Error::invalid(format!(
            "stripe detection needs at least {MIN_SCANLINES} scanlines, got {n}"
        )));
    }
    let mut profile = scanline_profile(img, orientation, luminance);
    let mean = profile.iter().sum::<f64>() / n as f64;
    profile.iter_mut().for_each(|v| *v -= mean);
    let mut bin_power = one_sided_energy(&spectrum(&profile));
    bin_power[0] = 0.0;

    let total: f64 = bin_power.iter().sum();
    let mut dominant = 1;
    for k in 2..bin_power.len() {
        if bin_power[k] > bin_power[dominant] {
            dominant = k;
        }
    }
    let scale = mean.abs().max(1.0);
    let peak_energy_db = if total <= 1e-24 * scale * scale {
        ENERGY_FLOOR_DB
    } else {
        (10.0 * (bin_power[dominant] / total).log10()).max(ENERGY_FLOOR_DB)
    };
    Ok(StripeSpectrum {
        orientation,
        dominant_freq_cycles_per_scanline: dominant as f64 / n as f64,
        peak_energy_db,
        dominant_bin: dominant,
        bin_power,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Removes periodic scanline-axis structure channel by channel.
///
/// Each non-DC bin of the scanline-mean profile is compared with a reference
/// energy taken from the cross-scanline profile: the larger of its median
/// non-DC energy and its largest energy within one bin of the same
/// normalized frequency. Scene structure such as a face or a texture shows up
/// on both axes, a stripe only on the scanline axis. A bin above
/// [`NOTCH_FACTOR`] times the reference is attenuated, linearly in energy,
/// from the threshold down to zero at [`NOTCH_RAMP`] times the threshold;
/// stronger bins are removed outright. The attenuated components are
/// subtracted from every scanline.
///
/// Clipping to 8 bits can leave residue that a further pass would remove, so
/// passes repeat (at most [`MAX_PASSES`]) and the result is the first image
/// that one more pass moves by at most one gray level.
pub fn destripe(img: &ImageBuffer, orientation: Orientation) -> ImageBuffer {
    let mut current = img.clone();
    for _ in 0..MAX_PASSES {
        let next = notch_pass(&current, orientation);
        if max_abs_diff(&current, &next) <= 1 {
            return current;
        }
        current = next;
    }
    current
}

fn max_abs_diff(a: &ImageBuffer, b: &ImageBuffer) -> i32 {
    a.pixels()
        .iter()
        .zip(b.pixels())
        .flat_map(|(p, q)| (0..3).map(move |c| (p[c] as i32 - q[c] as i32).abs()))
        .max()
        .unwrap_or(0)
}

fn notch_pass(img: &ImageBuffer, orientation: Orientation) -> ImageBuffer {
    let n = orientation.scanlines(img.width(), img.height());
    let n_cross = other(orientation).scanlines(img.width(), img.height());
    if n < 4 {
        return img.clone();
    }
    let mut out_f: Vec<[f64; 3]> = img
        .pixels()
        .iter()
        .map(|p| [p[0] as f64, p[1] as f64, p[2] as f64])
        .collect();

    for c in 0..3 {
        let profile = scanline_profile(img, orientation, |p| p[c] as f64);
        let spec = spectrum(&profile);
        let energy = one_sided_energy(&spec);
        let cross = one_sided_energy(&spectrum(&scanline_profile(img, other(orientation), |p| {
            p[c] as f64
        })));
        let floor = median(cross[1..].to_vec());

        let mut removed = vec![Complex::new(0.0, 0.0); n];
        let mut any = false;
        for k in 1..=n / 2 {
            let k_cross = ((k as f64) * n_cross as f64 / n as f64).round() as usize;
            let near = cross.get(k_cross.saturating_sub(1).max(1)..(k_cross + 2).min(cross.len()));
            let cross_e = near.unwrap_or_default().iter().copied().fold(0.0, f64::max);
            let threshold = NOTCH_FACTOR * floor.max(cross_e);
            if energy[k] > threshold && energy[k] > 1e-18 {
                let full = NOTCH_RAMP * threshold;
                let kept = if energy[k] >= full {
                    0.0
                } else {
                    threshold * (full - energy[k]) / (full - threshold)
                };
                let keep = (kept / energy[k]).sqrt();
                removed[k] = spec[k] * (1.0 - keep);
                if k != n - k {
                    removed[n - k] = spec[n - k] * (1.0 - keep);
                }
                any = true;
            }
        }
        if !any {
            continue;
        }
        FftPlanner::new().plan_fft_inverse(n).process(&mut removed);
        let stripe: Vec<f64> = removed.iter().map(|z| z.re / n as f64).collect();
        let w = img.width();
        for (idx, px) in out_f.iter_mut().enumerate() {
            let s = match orientation {
                Orientation::ColumnWise => idx % w,
                Orientation::RowWise => idx / w,
            };
            px[c] -= stripe[s];
        }
    }

    let pixels = out_f
        .iter()
        .map(|v| [quantize(v[0]), quantize(v[1]), quantize(v[2])])
        .collect();
    ImageBuffer::new(img.width(), img.height(), pixels).expect("same dimensions")
}

/// Peak signal-to-noise ratio in dB over all channels. Identical images give
/// infinity.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch {
            expected_w: a.width(),
            expected_h: a.height(),
            got_w: b.width(),
            got_h: b.height(),
        });
    }
    let se: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .flat_map(|(p, q)| (0..3).map(move |c| (p[c] as f64 - q[c] as f64).powi(2)))
        .sum();
    let mse = se / (3 * a.pixels().len()) as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

/// Success rates with and without destriping of the injected images.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefenseReport {
    pub victim_success_before: f64,
    pub victim_success_after: f64,
    pub attack_success_before: f64,
    pub attack_success_after: f64,
}

impl DefenseReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["metric", "before", "after"])?;
        out.write_record([
            "victim_success_rate".to_string(),
            self.victim_success_before.to_string(),
            self.victim_success_after.to_string(),
        ])?;
        out.write_record([
            "attack_success_rate".to_string(),
            self.attack_success_before.to_string(),
            self.attack_success_after.to_string(),
        ])?;
        out.flush().map_err(|e| Error::io("defense.csv", e))?;
        Ok(())
    }
}

impl fmt::Display for DefenseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<22} {:>8} {:>8}", "metric", "before", "after")?;
        writeln!(
            f,
            "{:<22} {:>7.2}% {:>7.2}%",
            "victim success rate",
            100.0 * self.victim_success_before,
            100.0 * self.victim_success_after
        )?;
        write!(
            f,
            "{:<22} {:>7.2}% {:>7.2}%",
            "attack success rate",
            100.0 * self.attack_success_before,
            100.0 * self.attack_success_after
        )
    }
}

/// Image transform used for the "after" arm of [`evaluate_defense`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Destriper {
    /// [`destripe`] along the sensor's scanline axis.
    Spectral,
    /// Leaves images untouched.
    Disabled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefenseEvaluation {
    pub report: DefenseReport,
    pub before: EvalReport,
    pub after: EvalReport,
}

/// Runs the protocol on raw injected images and again on destriped injected
/// images. Clean reference images are never filtered.
pub fn evaluate_defense<O: FaceOracle>(
    data: &Dataset,
    cfg: &ProtocolConfig,
    oracle: &O,
    destriper: Destriper,
) -> Result<DefenseEvaluation> {
    if data.genuine.is_empty() {
        return Err(Error::EmptyInput("genuine pairs"));
    }
    if data.impostor.is_empty() {
        return Err(Error::EmptyInput("impostor pairs"));
    }
    let before = run_protocol(data, cfg, oracle, None)?;
    let after = match destriper {
        Destriper::Disabled => before.clone(),
        Destriper::Spectral => {
            let orientation = cfg.sensor.orientation;
            let filter = move |img: &ImageBuffer| destripe(img, orientation);
            run_protocol(data, cfg, oracle, Some(&filter))?
        }
    };
    let rate = |r: Option<f64>| r.expect("pairs present");
    Ok(DefenseEvaluation {
        report: DefenseReport {
            victim_success_before: rate(before.victim_success_rate),
            victim_success_after: rate(after.victim_success_rate),
            attack_success_before: rate(before.attack_success_rate),
            attack_success_after: rate(after.attack_success_rate),
        },
        before,
        after,
    })
}
