//! Stripe trigger injection into face images.
//!
//! Illumination multiplies reflectance, so the trigger is applied as a
//! per-scanline gain followed by an image-level auto-ISO step that restores
//! the input's mean luminance. The additive trigger is then simply
//! `output - input`.

use crate::error::{Error, Result};
use crate::image::{ImageBuffer, Mask, LUMA};
use crate::sensor::{normalize_auto_iso, render_raw_field, Orientation, SensorConfig, StripeField};
use crate::waveform::LedWaveform;

/// Allowed face scale factors.
pub const FACE_SCALE_RANGE: (f64, f64) = (0.8, 1.2);

#[derive(Debug, Clone)]
pub struct TriggerSpec {
    pub waveform: LedWaveform,
    pub sensor: SensorConfig,
    pub global_phase_s: f64,
    /// Foreground region; pixels outside it are left untouched.
    pub mask: Option<Mask>,
}

impl TriggerSpec {
    pub fn new(waveform: LedWaveform, sensor: SensorConfig, global_phase_s: f64) -> Self {
        TriggerSpec {
            waveform,
            sensor,
            global_phase_s,
            mask: None,
        }
    }

    pub fn with_phase(&self, global_phase_s: f64) -> Self {
        TriggerSpec {
            global_phase_s,
            ..self.clone()
        }
    }

    pub fn with_mask(mut self, mask: Mask) -> Self {
        self.mask = Some(mask);
        self
    }
}

/// Stripe field sized for `img`. A completely dark capture yields all-zero gains.
pub fn field_for_image(img: &ImageBuffer, spec: &TriggerSpec) -> Result<StripeField> {
    spec.sensor.validate()?;
    let n = spec.sensor.orientation.scanlines(img.width(), img.height());
    let raw = render_raw_field(
        &spec.waveform,
        &spec.sensor.with_scanlines(n),
        spec.global_phase_s,
    );
    match normalize_auto_iso(&raw) {
        Ok(field) => Ok(field),
        Err(Error::DegenerateIllumination) => Ok(StripeField {
            gains: vec![[0.0; 3]; n],
        }),
        Err(e) => Err(e),
    }
}

pub fn inject_trigger(img: &ImageBuffer, spec: &TriggerSpec) -> Result<ImageBuffer> {
    if let Some(mask) = &spec.mask {
        if mask.width() != img.width() || mask.height() != img.height() {
            return Err(Error::DimensionMismatch {
                expected_w: img.width(),
                expected_h: img.height(),
                got_w: mask.width(),
                got_h: mask.height(),
            });
        }
    }
    let field = field_for_image(img, spec)?;
    Ok(apply_field(
        img,
        &field,
        spec.sensor.orientation,
        spec.mask.as_ref(),
    ))
}

/// Multiplies each pixel by its scanline gain, restores mean luminance over
/// the affected region, then rounds half away from zero into 8 bits.
pub fn apply_field(
    img: &ImageBuffer,
    field: &StripeField,
    orientation: Orientation,
    mask: Option<&Mask>,
) -> ImageBuffer {
    let w = img.width();
    let inside = |x: usize, y: usize| mask.is_none_or(|m| m.get(x, y));

    let mut gained = vec![[0.0f64; 3]; w * img.height()];
    let mut lum_in = 0.0;
    let mut lum_gained = 0.0;
    for (idx, px) in img.pixels().iter().enumerate() {
        let (x, y) = (idx % w, idx / w);
        if !inside(x, y) {
            continue;
        }
        let g = match orientation {
            Orientation::ColumnWise => field.gains[x],
            Orientation::RowWise => field.gains[y],
        };
        let v = [
            px[0] as f64 * g[0],
            px[1] as f64 * g[1],
            px[2] as f64 * g[2],
        ];
        lum_in += LUMA[0] * px[0] as f64 + LUMA[1] * px[1] as f64 + LUMA[2] * px[2] as f64;
        lum_gained += LUMA[0] * v[0] + LUMA[1] * v[1] + LUMA[2] * v[2];
        gained[idx] = v;
    }
    let scale = if lum_gained > 0.0 {
        lum_in / lum_gained
    } else {
        1.0
    };

    let mut out = img.clone();
    for (idx, px) in out.pixels_mut().iter_mut().enumerate() {
        if !inside(idx % w, idx / w) {
            continue;
        }
        let v = gained[idx];
        *px = [
            quantize(v[0] * scale),
            quantize(v[1] * scale),
            quantize(v[2] * scale),
        ];
    }
    out
}

pub(crate) fn quantize(v: f64) -> u8 {
    v.clamp(0.0, 255.0).round() as u8
}

/// `n` global phases evenly spaced over one red-channel period.
pub fn attempt_phases(n: usize, red_period_s: f64) -> Vec<f64> {
    (0..n).map(|k| k as f64 * red_period_s / n as f64).collect()
}

/// Bilinear zoom about the image center, cropped or edge-padded back to the
/// original size.
pub fn scale_face(img: &ImageBuffer, factor: f64) -> Result<ImageBuffer> {
    let (lo, hi) = FACE_SCALE_RANGE;
    if !(lo..=hi).contains(&factor) {
        return Err(Error::invalid(format!(
            "face scale {factor} outside [{lo}, {hi}]"
        )));
    }
    let (w, h) = (img.width(), img.height());
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    Ok(ImageBuffer::from_fn(w, h, |x, y| {
        let sx = (cx + (x as f64 - cx) / factor).clamp(0.0, w as f64 - 1.0);
        let sy = (cy + (y as f64 - cy) / factor).clamp(0.0, h as f64 - 1.0);
        bilinear(img, sx, sy)
    }))
}

fn bilinear(img: &ImageBuffer, sx: f64, sy: f64) -> [u8; 3] {
    let x0 = sx.floor() as usize;
    let y0 = sy.floor() as usize;
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let fx = sx - x0 as f64;
    let fy = sy - y0 as f64;
    let (p00, p10, p01, p11) = (
        img.get(x0, y0),
        img.get(x1, y0),
        img.get(x0, y1),
        img.get(x1, y1),
    );
    let mut out = [0u8; 3];
    for c in 0..3 {
        let top = p00[c] as f64 * (1.0 - fx) + p10[c] as f64 * fx;
        let bottom = p01[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
        out[c] = quantize(top * (1.0 - fy) + bottom * fy);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn card() -> ImageBuffer {
        ImageBuffer::from_fn(40, 30, |x, y| {
            [
                (60 + x * 3) as u8,
                (80 + y * 2) as u8,
                ((x * y) % 200 + 20) as u8,
            ]
        })
    }

    fn spec(tau: f64) -> TriggerSpec {
        TriggerSpec::new(
            LedWaveform::monochromatic(344.89, tau, 100.0, 0.0).unwrap(),
            SensorConfig::default(),
            0.0,
        )
    }

    #[test]
    fn full_duty_is_identity() {
        let img = card();
        let out = inject_trigger(&img, &spec(1.0)).unwrap();
        assert_eq!(out, img);
        assert_eq!(inject_trigger(&out, &spec(1.0)).unwrap(), img);
    }

    #[test]
    fn zero_light_is_black() {
        let out = inject_trigger(&card(), &spec(0.0)).unwrap();
        assert!(out.pixels().iter().all(|p| *p == [0, 0, 0]));
    }

    #[test]
    fn column_ratio_constant_down_each_column() {
        let img = ImageBuffer::filled(120, 20, [100, 150, 200]);
        let sp = spec(0.3865);
        let field = field_for_image(&img, &sp).unwrap();
        // pre-quantization: column gain times a global scale, so every row of a
        // flat image sees identical values within a column
        let out = inject_trigger(&img, &sp).unwrap();
        for x in 0..120 {
            let top = out.get(x, 0);
            for y in 1..20 {
                assert_eq!(out.get(x, y), top);
            }
        }
        assert!(field.contrast() > 0.1);
    }

    #[test]
    fn mask_leaves_background_untouched() {
        let img = ImageBuffer::from_fn(64, 64, |x, _| {
            if x < 32 {
                [50, 60, 70]
            } else {
                [180, 170, 160]
            }
        });
        let mask = Mask::from_fn(64, 64, |x, _| x >= 32);
        let out = inject_trigger(&img, &spec(0.3865).with_mask(mask)).unwrap();
        for y in 0..64 {
            for x in 0..32 {
                assert_eq!(out.get(x, y), img.get(x, y));
            }
        }
        assert!((32..64).any(|x| out.get(x, 0) != img.get(x, 0)));
    }

    #[test]
    fn mask_dimension_mismatch() {
        let mask = Mask::from_fn(10, 10, |_, _| true);
        assert!(matches!(
            inject_trigger(&card(), &spec(0.5).with_mask(mask)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn attempt_phase_spacing() {
        assert_eq!(attempt_phases(1, 0.003), vec![0.0]);
        let p = attempt_phases(3, 0.003);
        assert_eq!(p.len(), 3);
        for (got, want) in p.iter().zip([0.0, 0.001, 0.002]) {
            assert!((got - want).abs() < 1e-18);
        }
    }

    #[test]
    fn unit_scale_is_identity() {
        let img = card();
        assert_eq!(scale_face(&img, 1.0).unwrap(), img);
    }

    #[test]
    fn scale_keeps_dimensions_and_rejects_out_of_range() {
        let img = card();
        let big = scale_face(&img, 1.2).unwrap();
        assert_eq!((big.width(), big.height()), (img.width(), img.height()));
        assert!(scale_face(&img, 0.7).is_err());
        assert!(scale_face(&img, 1.25).is_err());
    }
}
