use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::waveform::{LedWaveform, DEFAULT_PEAK_INTENSITY};

/// Lowest LED frequency considered flicker free.
pub const DEFAULT_MIN_FREQUENCY_HZ: f64 = 100.0;
/// Upper end of the frequency search. At 1 kHz a stripe period still spans
/// 75 scanlines of the default sensor.
pub const DEFAULT_MAX_FREQUENCY_HZ: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    /// `[f, duty]`
    #[serde(alias = "mono")]
    Mono2,
    /// `[f_r, f_g, f_b, duty, phase_rg, phase_rb]`, phases as fractions of the red period.
    #[serde(alias = "color")]
    Color6,
}

impl ParamKind {
    pub fn dim(&self) -> usize {
        match self {
            ParamKind::Mono2 => 2,
            ParamKind::Color6 => 6,
        }
    }

    fn frequency_slots(&self) -> std::ops::Range<usize> {
        match self {
            ParamKind::Mono2 => 0..1,
            ParamKind::Color6 => 0..3,
        }
    }

    fn duty_slot(&self) -> usize {
        match self {
            ParamKind::Mono2 => 1,
            ParamKind::Color6 => 3,
        }
    }
}

impl std::str::FromStr for ParamKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mono" | "mono2" | "monochromatic" => Ok(ParamKind::Mono2),
            "color" | "color6" => Ok(ParamKind::Color6),
            other => Err(Error::invalid(format!(
                "unknown parameterization `{other}`"
            ))),
        }
    }
}

/// LED drive parameters under search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub kind: ParamKind,
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn mono(frequency_hz: f64, duty_cycle: f64) -> Self {
        ParamVector {
            kind: ParamKind::Mono2,
            values: vec![frequency_hz, duty_cycle],
        }
    }

    pub fn color(frequencies_hz: [f64; 3], duty_cycle: f64, phase_rg: f64, phase_rb: f64) -> Self {
        let [r, g, b] = frequencies_hz;
        ParamVector {
            kind: ParamKind::Color6,
            values: vec![r, g, b, duty_cycle, phase_rg, phase_rb],
        }
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.values[self.kind.frequency_slots()]
    }

    pub fn duty_cycle(&self) -> f64 {
        self.values[self.kind.duty_slot()]
    }

    /// Checks `f >= f_min`, duty in `[0, 1]`, and phase fractions in `[0, 1)`.
    pub fn validate(&self, min_frequency_hz: f64) -> Result<()> {
        if self.values.len() != self.kind.dim() {
            return Err(Error::invalid(format!(
                "{:?} needs {} values, got {}",
                self.kind,
                self.kind.dim(),
                self.values.len()
            )));
        }
        if let Some(f) = self
            .frequencies()
            .iter()
            .find(|&&f| !(f >= min_frequency_hz))
        {
            return Err(Error::invalid(format!(
                "frequency {f} Hz below the {min_frequency_hz} Hz limit"
            )));
        }
        let duty = self.duty_cycle();
        if !(0.0..=1.0).contains(&duty) {
            return Err(Error::invalid(format!("duty cycle {duty} outside [0, 1]")));
        }
        if self.kind == ParamKind::Color6 {
            for &p in &self.values[4..6] {
                if !(0.0..1.0).contains(&p) {
                    return Err(Error::invalid(format!("phase fraction {p} outside [0, 1)")));
                }
            }
        }
        Ok(())
    }

    /// Waveform with the default peak intensity and `ambient = ratio * peak`.
    pub fn to_waveform(&self, ambient_ratio: f64) -> Result<LedWaveform> {
        let peak = DEFAULT_PEAK_INTENSITY;
        let ambient = ambient_ratio * peak;
        match self.kind {
            ParamKind::Mono2 => {
                LedWaveform::monochromatic(self.values[0], self.values[1], peak, ambient)
            }
            ParamKind::Color6 => {
                let v = &self.values;
                LedWaveform::color_red_periods([v[0], v[1], v[2]], v[3], v[4], v[5], peak, ambient)
            }
        }
    }
}

/// Published optima: monochromatic `f = 344.89 Hz, duty = 0.3865`; color
/// `f = (445.95, 232.30, 219.90) Hz, duty = 0.2136`, phases `0.2257` and
/// `0.7353` red periods.
pub fn default_optimized_params(kind: ParamKind) -> ParamVector {
    match kind {
        ParamKind::Mono2 => ParamVector::mono(344.89, 0.3865),
        ParamKind::Color6 => ParamVector::color([445.95, 232.30, 219.90], 0.2136, 0.2257, 0.7353),
    }
}

/// Box over which the search runs, mapped onto the unit cube. Frequencies are
/// searched in log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub kind: ParamKind,
    pub min_frequency_hz: f64,
    pub max_frequency_hz: f64,
}

impl SearchSpace {
    pub fn new(kind: ParamKind) -> Self {
        SearchSpace {
            kind,
            min_frequency_hz: DEFAULT_MIN_FREQUENCY_HZ,
            max_frequency_hz: DEFAULT_MAX_FREQUENCY_HZ,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_frequency_hz > 0.0 && self.max_frequency_hz > self.min_frequency_hz) {
            return Err(Error::invalid(
                "frequency search range must be positive and nonempty",
            ));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    /// Maps a point of `[0, 1]^d` to parameters. Phase fractions wrap so that
    /// the upper edge of the box coincides with zero.
    pub fn from_unit(&self, u: &[f64]) -> ParamVector {
        let log_span = (self.max_frequency_hz / self.min_frequency_hz).ln();
        let freq = |x: f64| {
            (self.min_frequency_hz * (x.clamp(0.0, 1.0) * log_span).exp())
                .max(self.min_frequency_hz)
        };
        let values = match self.kind {
            ParamKind::Mono2 => vec![freq(u[0]), u[1].clamp(0.0, 1.0)],
            ParamKind::Color6 => vec![
                freq(u[0]),
                freq(u[1]),
                freq(u[2]),
                u[3].clamp(0.0, 1.0),
                u[4].rem_euclid(1.0),
                u[5].rem_euclid(1.0),
            ],
        };
        ParamVector {
            kind: self.kind,
            values,
        }
    }

    pub fn to_unit(&self, p: &ParamVector) -> Vec<f64> {
        let log_span = (self.max_frequency_hz / self.min_frequency_hz).ln();
        let unit_f = |f: f64| (f / self.min_frequency_hz).ln() / log_span;
        let v = &p.values;
        match p.kind {
            ParamKind::Mono2 => vec![unit_f(v[0]), v[1]],
            ParamKind::Color6 => vec![unit_f(v[0]), unit_f(v[1]), unit_f(v[2]), v[3], v[4], v[5]],
        }
    }
}
