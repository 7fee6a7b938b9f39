//! Time-domain model of an ON-OFF keyed LED, one square wave per color channel.
//!
//! Each channel alternates between `peak + ambient` (ON) and `ambient` (OFF).
//! The ON segment of a cycle is the half-open interval `(0, t_on]` measured
//! from the channel phase, so `t mod t_l == 0` is OFF.
//!
//! Everything here is a pure function of its inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensor::SensorConfig;

/// LED peak intensity used by the simulation protocol (linear, unitless).
pub const DEFAULT_PEAK_INTENSITY: f64 = 100.0;

/// A perception window must span at least this many periods of the slowest channel.
pub const MIN_PERCEPTION_PERIODS: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelWaveform {
    pub frequency_hz: f64,
    pub duty_cycle: f64,
    /// Channel phase offset in seconds, interpreted modulo the period.
    pub phase_s: f64,
    pub peak_intensity: f64,
    pub ambient_intensity: f64,
}

impl ChannelWaveform {
    pub fn new(
        frequency_hz: f64,
        duty_cycle: f64,
        phase_s: f64,
        peak_intensity: f64,
        ambient_intensity: f64,
    ) -> Result<Self> {
        let ch = ChannelWaveform {
            frequency_hz,
            duty_cycle,
            phase_s,
            peak_intensity,
            ambient_intensity,
        };
        ch.validate()?;
        Ok(ch)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frequency_hz.is_finite() && self.frequency_hz > 0.0) {
            return Err(Error::invalid(format!(
                "frequency must be positive, got {}",
                self.frequency_hz
            )));
        }
        if !(0.0..=1.0).contains(&self.duty_cycle) {
            return Err(Error::invalid(format!(
                "duty cycle must lie in [0, 1], got {}",
                self.duty_cycle
            )));
        }
        if !self.phase_s.is_finite() {
            return Err(Error::invalid("phase must be finite"));
        }
        if !(self.peak_intensity >= 0.0 && self.ambient_intensity >= 0.0)
            || !self.peak_intensity.is_finite()
            || !self.ambient_intensity.is_finite()
        {
            return Err(Error::invalid("intensities must be finite and nonnegative"));
        }
        Ok(())
    }

    /// Flicker period `t_l`.
    pub fn period_s(&self) -> f64 {
        1.0 / self.frequency_hz
    }

    /// ON duration within one period.
    pub fn on_duration_s(&self) -> f64 {
        self.duty_cycle * self.period_s()
    }

    /// Phase reduced into `[0, t_l)`.
    pub fn reduced_phase_s(&self) -> f64 {
        self.phase_s.rem_euclid(self.period_s())
    }

    /// Instantaneous illumination at time `t`.
    ///
    /// A duty cycle of 1 is ON everywhere, including cycle boundaries.
    pub fn intensity_at(&self, t: f64) -> f64 {
        if self.duty_cycle >= 1.0 {
            return self.peak_intensity + self.ambient_intensity;
        }
        let period = self.period_s();
        let u = (t - self.phase_s).rem_euclid(period);
        if u > 0.0 && u <= self.on_duration_s() {
            self.peak_intensity + self.ambient_intensity
        } else {
            self.ambient_intensity
        }
    }

    /// Light accumulated over `[t_start, t_start + t_exposure]`.
    ///
    /// Whole cycles contribute `t_on` of ON time each; the two fractional
    /// boundary segments are handled through the cumulative ON-time function.
    pub fn integrate(&self, t_start: f64, t_exposure: f64) -> f64 {
        let on = self.on_time(t_start, t_exposure);
        self.ambient_intensity * t_exposure + self.peak_intensity * on
    }

    /// ON time contained in `[t_start, t_start + t_exposure]`.
    pub fn on_time(&self, t_start: f64, t_exposure: f64) -> f64 {
        let t_on = self.on_duration_s();
        if self.duty_cycle >= 1.0 {
            return t_exposure;
        }
        if self.duty_cycle <= 0.0 {
            return 0.0;
        }
        let period = self.period_s();
        let u0 = (t_start - self.phase_s).rem_euclid(period);
        let u1 = u0 + t_exposure;
        let cycles = (u1 / period).floor();
        let rem = u1 - cycles * period;
        let head = u0.min(t_on);
        let tail = cycles * t_on + rem.min(t_on);
        (tail - head).clamp(0.0, t_exposure)
    }
}

/// Stripe parameterization family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveformKind {
    Monochromatic,
    Color,
}

/// Three-channel LED drive. Channel order is red, green, blue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedWaveform {
    pub red: ChannelWaveform,
    pub green: ChannelWaveform,
    pub blue: ChannelWaveform,
    pub kind: WaveformKind,
}

impl LedWaveform {
    /// Same frequency, duty cycle, and phase on all three channels.
    pub fn monochromatic(
        frequency_hz: f64,
        duty_cycle: f64,
        peak_intensity: f64,
        ambient_intensity: f64,
    ) -> Result<Self> {
        let ch = ChannelWaveform::new(
            frequency_hz,
            duty_cycle,
            0.0,
            peak_intensity,
            ambient_intensity,
        )?;
        Ok(LedWaveform {
            red: ch,
            green: ch,
            blue: ch,
            kind: WaveformKind::Monochromatic,
        })
    }

    /// Per-channel frequencies sharing one duty cycle. Phases of green and blue
    /// are given in seconds relative to red, which sits at phase zero.
    pub fn color(
        frequencies_hz: [f64; 3],
        duty_cycle: f64,
        phase_rg_s: f64,
        phase_rb_s: f64,
        peak_intensity: f64,
        ambient_intensity: f64,
    ) -> Result<Self> {
        let [fr, fg, fb] = frequencies_hz;
        Ok(LedWaveform {
            red: ChannelWaveform::new(fr, duty_cycle, 0.0, peak_intensity, ambient_intensity)?,
            green: ChannelWaveform::new(
                fg,
                duty_cycle,
                phase_rg_s,
                peak_intensity,
                ambient_intensity,
            )?,
            blue: ChannelWaveform::new(
                fb,
                duty_cycle,
                phase_rb_s,
                peak_intensity,
                ambient_intensity,
            )?,
            kind: WaveformKind::Color,
        })
    }

    /// Like [`LedWaveform::color`], with phases expressed as fractions of the red period.
    pub fn color_red_periods(
        frequencies_hz: [f64; 3],
        duty_cycle: f64,
        phase_rg_periods: f64,
        phase_rb_periods: f64,
        peak_intensity: f64,
        ambient_intensity: f64,
    ) -> Result<Self> {
        let t_r = 1.0 / frequencies_hz[0];
        Self::color(
            frequencies_hz,
            duty_cycle,
            phase_rg_periods * t_r,
            phase_rb_periods * t_r,
            peak_intensity,
            ambient_intensity,
        )
    }

    pub fn channels(&self) -> [&ChannelWaveform; 3] {
        [&self.red, &self.green, &self.blue]
    }

    fn channels_mut(&mut self) -> [&mut ChannelWaveform; 3] {
        [&mut self.red, &mut self.green, &mut self.blue]
    }

    pub fn validate(&self) -> Result<()> {
        for ch in self.channels() {
            ch.validate()?;
        }
        let shared_duty = self.red.duty_cycle == self.green.duty_cycle
            && self.red.duty_cycle == self.blue.duty_cycle;
        match self.kind {
            WaveformKind::Monochromatic => {
                if !(shared_duty
                    && self.red.frequency_hz == self.green.frequency_hz
                    && self.red.frequency_hz == self.blue.frequency_hz
                    && self.red.phase_s == self.green.phase_s
                    && self.red.phase_s == self.blue.phase_s)
                {
                    return Err(Error::invalid(
                        "monochromatic waveform must share frequency, duty cycle, and phase",
                    ));
                }
            }
            WaveformKind::Color => {
                if !shared_duty {
                    return Err(Error::invalid(
                        "color waveform channels must share the duty cycle",
                    ));
                }
                if self.red.phase_s != 0.0 {
                    return Err(Error::invalid(
                        "color waveform red channel is the phase reference",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Red channel period, the reference for phase fractions and attempt offsets.
    pub fn red_period_s(&self) -> f64 {
        self.red.period_s()
    }

    pub fn max_period_s(&self) -> f64 {
        self.channels()
            .iter()
            .map(|c| c.period_s())
            .fold(0.0, f64::max)
    }

    pub fn with_duty_cycle(mut self, duty_cycle: f64) -> Result<Self> {
        for ch in self.channels_mut() {
            ch.duty_cycle = duty_cycle;
        }
        self.validate()?;
        Ok(self)
    }

    /// Sets every channel to `frequency_hz`, keeping color phases at the same
    /// fraction of the red period.
    pub fn with_frequency(mut self, frequency_hz: f64) -> Result<Self> {
        let t_r_old = self.red_period_s();
        let t_r_new = 1.0 / frequency_hz;
        for ch in self.channels_mut() {
            ch.phase_s = ch.phase_s / t_r_old * t_r_new;
            ch.frequency_hz = frequency_hz;
        }
        self.validate()?;
        Ok(self)
    }

    /// Ambient light as a multiple of each channel's peak intensity.
    pub fn with_ambient_ratio(mut self, ratio: f64) -> Result<Self> {
        if !(ratio.is_finite() && ratio >= 0.0) {
            return Err(Error::invalid(format!(
                "ambient ratio must be nonnegative, got {ratio}"
            )));
        }
        for ch in self.channels_mut() {
            ch.ambient_intensity = ratio * ch.peak_intensity;
        }
        Ok(self)
    }

    /// Sets the green and blue phase offsets as fractions of the red period.
    /// A monochromatic waveform is promoted to a color one.
    pub fn with_phase_fractions(mut self, rg: f64, rb: f64) -> Result<Self> {
        let t_r = self.red_period_s();
        self.red.phase_s = 0.0;
        self.green.phase_s = rg * t_r;
        self.blue.phase_s = rb * t_r;
        self.kind = WaveformKind::Color;
        self.validate()?;
        Ok(self)
    }
}

/// Bright and dark stripe widths in scanlines for one channel.
pub fn predicted_stripe_widths(ch: &ChannelWaveform, sensor: &SensorConfig) -> (f64, f64) {
    let period = ch.period_s();
    let t_on = ch.on_duration_s();
    let r = sensor.exposure_s.rem_euclid(period);
    let bright = (r - t_on).abs() / sensor.scanline_interval_s;
    let dark = (r - (period - t_on)).abs() / sensor.scanline_interval_s;
    (bright, dark)
}

/// Time-averaged intensity per channel over a perception window starting at t = 0.
pub fn perceived_color(w: &LedWaveform, window_s: f64) -> Result<[f64; 3]> {
    let required = MIN_PERCEPTION_PERIODS * w.max_period_s();
    if !(window_s >= required) {
        return Err(Error::PerceptionWindow {
            window_s,
            required_s: required,
        });
    }
    let avg = |ch: &ChannelWaveform| ch.integrate(0.0, window_s) / window_s;
    Ok([avg(&w.red), avg(&w.green), avg(&w.blue)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ch(f: f64, tau: f64, phase: f64) -> ChannelWaveform {
        ChannelWaveform::new(f, tau, phase, 100.0, 0.0).unwrap()
    }

    #[test]
    fn intensity_on_and_off_halves() {
        let c = ch(100.0, 0.5, 0.0);
        assert_eq!(c.intensity_at(0.001), 100.0);
        assert_eq!(c.intensity_at(0.009), 0.0);
    }

    #[test]
    fn intensity_boundary_is_off() {
        let c = ch(100.0, 0.5, 0.0);
        assert_eq!(c.intensity_at(0.0), 0.0);
        let full = ch(100.0, 1.0, 0.0);
        for t in [0.0, 0.0037, 0.01, -0.02] {
            assert_eq!(full.intensity_at(t), 100.0);
        }
    }

    #[test]
    fn constant_duty_cycles_integrate_exactly() {
        let on = ChannelWaveform::new(321.0, 1.0, 0.0012, 100.0, 7.0).unwrap();
        assert_eq!(on.integrate(0.3, 0.005), 107.0 * 0.005);
        let off = ChannelWaveform::new(321.0, 0.0, 0.0012, 100.0, 7.0).unwrap();
        assert_eq!(off.integrate(0.3, 0.005), 7.0 * 0.005);
    }

    #[test]
    fn whole_cycles_integrate_to_k_times_cycle_light() {
        let c = ChannelWaveform::new(250.0, 0.3, 0.0007, 100.0, 5.0).unwrap();
        let k = 7.0;
        let got = c.integrate(0.0123, k * c.period_s());
        let want = k * (100.0 * c.on_duration_s() + 5.0 * c.period_s());
        assert!((got - want).abs() / want < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn zero_bright_width_when_remainder_equals_on_time() {
        // t_e = 1/200, t_l = 1/150 => t_e mod t_l = t_e; pick tau so t_on = t_e
        let sensor = SensorConfig::default();
        let f = 150.0;
        let tau = sensor.exposure_s * f;
        let c = ch(f, tau, 0.0);
        let (b, _) = predicted_stripe_widths(&c, &sensor);
        assert!(b.abs() < 1e-9);
    }

    #[test]
    fn perceived_color_rejects_short_window() {
        let w = LedWaveform::monochromatic(100.0, 0.5, 100.0, 0.0).unwrap();
        assert!(matches!(
            perceived_color(&w, 0.5),
            Err(Error::PerceptionWindow { .. })
        ));
        assert!(perceived_color(&w, 1.0).is_ok());
    }

    #[test]
    fn perceived_color_full_duty_is_exact() {
        let w = LedWaveform::monochromatic(300.0, 1.0, 100.0, 3.0).unwrap();
        assert_eq!(perceived_color(&w, 1.0).unwrap(), [103.0; 3]);
    }

    #[test]
    fn color_invariants_enforced() {
        let mut w =
            LedWaveform::color([400.0, 300.0, 200.0], 0.3, 0.001, 0.002, 100.0, 0.0).unwrap();
        assert!(w.validate().is_ok());
        w.green.duty_cycle = 0.4;
        assert!(w.validate().is_err());
        let mut m = LedWaveform::monochromatic(300.0, 0.3, 100.0, 0.0).unwrap();
        m.blue.frequency_hz = 301.0;
        assert!(m.validate().is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ChannelWaveform::new(0.0, 0.5, 0.0, 1.0, 0.0).is_err());
        assert!(ChannelWaveform::new(10.0, 1.5, 0.0, 1.0, 0.0).is_err());
        assert!(ChannelWaveform::new(10.0, 0.5, 0.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn red_period_phase_fractions_convert_to_seconds() {
        let w = LedWaveform::color_red_periods(
            [445.95, 232.30, 219.90],
            0.2136,
            0.2257,
            0.7353,
            100.0,
            0.0,
        )
        .unwrap();
        assert!((w.green.phase_s - 0.2257 / 445.95).abs() < 1e-15);
        assert!((w.blue.phase_s - 0.7353 / 445.95).abs() < 1e-15);
    }
}
