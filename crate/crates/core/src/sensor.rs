//! Rolling-shutter capture of a flickering LED.
//!
//! Scanline `i` starts exposing at `global_phase + i * t_s` and integrates the
//! waveform for `t_e`. The resulting per-scanline exposure is max-normalized
//! (auto-ISO), so the brightest scanline maps to a gain of 1.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::waveform::LedWaveform;

/// Exposure time commonly used to avoid overexposure (1/200 s).
pub const DEFAULT_EXPOSURE_S: f64 = 1.0 / 200.0;
/// Scanline sampling interval of a current phone sensor (1/75000 s).
pub const DEFAULT_SCANLINE_INTERVAL_S: f64 = 1.0 / 75000.0;
/// Scanline count matching the 96-pixel width of an aligned face crop.
pub const DEFAULT_NUM_SCANLINES: usize = 96;

/// Which image axis the sensor reads out one scanline at a time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Scanline index is the image column: vertical stripes.
    #[default]
    #[serde(alias = "column")]
    ColumnWise,
    /// Scanline index is the image row: horizontal stripes.
    #[serde(alias = "row")]
    RowWise,
}

impl Orientation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Orientation::ColumnWise => "column",
            Orientation::RowWise => "row",
        }
    }

    /// Number of scanlines for an image of the given size.
    pub fn scanlines(&self, width: usize, height: usize) -> usize {
        match self {
            Orientation::ColumnWise => width,
            Orientation::RowWise => height,
        }
    }
}

impl std::str::FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "column" | "column_wise" | "col" => Ok(Orientation::ColumnWise),
            "row" | "row_wise" => Ok(Orientation::RowWise),
            other => Err(Error::invalid(format!("unknown orientation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    pub exposure_s: f64,
    pub scanline_interval_s: f64,
    pub num_scanlines: usize,
    pub orientation: Orientation,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            exposure_s: DEFAULT_EXPOSURE_S,
            scanline_interval_s: DEFAULT_SCANLINE_INTERVAL_S,
            num_scanlines: DEFAULT_NUM_SCANLINES,
            orientation: Orientation::ColumnWise,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.exposure_s.is_finite() && self.exposure_s > 0.0) {
            return Err(Error::invalid("exposure time must be positive"));
        }
        if !(self.scanline_interval_s.is_finite() && self.scanline_interval_s > 0.0) {
            return Err(Error::invalid("scanline interval must be positive"));
        }
        if self.num_scanlines == 0 {
            return Err(Error::invalid("sensor needs at least one scanline"));
        }
        Ok(())
    }

    pub fn with_scanlines(mut self, n: usize) -> Self {
        self.num_scanlines = n;
        self
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    /// Exposure start of scanline `i`.
    pub fn scanline_start_s(&self, i: usize, global_phase_s: f64) -> f64 {
        global_phase_s + i as f64 * self.scanline_interval_s
    }
}

/// Per-scanline RGB exposure gains.
#[derive(Debug, Clone, PartialEq)]
pub struct StripeField {
    pub gains: Vec<[f64; 3]>,
}

impl StripeField {
    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.gains.iter().map(|g| g[c]).collect()
    }

    /// Largest minus smallest gain over every scanline and channel.
    pub fn contrast(&self) -> f64 {
        let (lo, hi) = self
            .gains
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &g| {
                (lo.min(g), hi.max(g))
            });
        hi - lo
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["scanline", "r", "g", "b"])?;
        for (i, g) in self.gains.iter().enumerate() {
            out.write_record([
                i.to_string(),
                g[0].to_string(),
                g[1].to_string(),
                g[2].to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut gains = Vec::new();
        for (expected, row) in rdr.records().enumerate() {
            let row = row?;
            let parse = |k: usize| -> Result<f64> {
                row.get(k)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::Config(format!("bad stripe field row {expected}")))
            };
            if parse(0)? as usize != expected {
                return Err(Error::Config(format!(
                    "stripe field rows out of order at {expected}"
                )));
            }
            gains.push([parse(1)?, parse(2)?, parse(3)?]);
        }
        Ok(StripeField { gains })
    }
}

/// Accumulated light per scanline and channel, before auto-ISO.
pub fn render_raw_field(
    w: &LedWaveform,
    sensor: &SensorConfig,
    global_phase_s: f64,
) -> StripeField {
    let gains = (0..sensor.num_scanlines)
        .map(|i| {
            let t0 = sensor.scanline_start_s(i, global_phase_s);
            let [r, g, b] = w.channels();
            [
                r.integrate(t0, sensor.exposure_s),
                g.integrate(t0, sensor.exposure_s),
                b.integrate(t0, sensor.exposure_s),
            ]
        })
        .collect();
    StripeField { gains }
}

/// Normalized stripe field as captured with auto-ISO.
pub fn render_stripe_field(
    w: &LedWaveform,
    sensor: &SensorConfig,
    global_phase_s: f64,
) -> Result<StripeField> {
    sensor.validate()?;
    normalize_auto_iso(&render_raw_field(w, sensor, global_phase_s))
}

/// Scales the field so its largest entry is exactly 1.
pub fn normalize_auto_iso(raw: &StripeField) -> Result<StripeField> {
    let max = raw.gains.iter().flatten().fold(0.0_f64, |m, &v| m.max(v));
    if !(max > 0.0) || !max.is_finite() {
        return Err(Error::DegenerateIllumination);
    }
    let gains = raw
        .gains
        .iter()
        .map(|g| [g[0] / max, g[1] / max, g[2] / max])
        .collect();
    Ok(StripeField { gains })
}
