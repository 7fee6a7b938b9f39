use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::sweep::{SweepAxis, SweepValue};
use crate::error::{Error, Result};
use crate::optimizer::{
    default_optimized_params, ParamKind, ParamVector, SearchSpace, DEFAULT_ATTEMPTS,
    DEFAULT_MAX_FREQUENCY_HZ, DEFAULT_MIN_FREQUENCY_HZ,
};
use crate::oracle::OracleBinding;
use crate::sensor::SensorConfig;
use crate::waveform::{LedWaveform, DEFAULT_PEAK_INTENSITY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "paper-mono")]
    PaperMono,
    #[serde(rename = "paper-color")]
    PaperColor,
}

impl Preset {
    pub fn kind(&self) -> ParamKind {
        match self {
            Preset::PaperMono => ParamKind::Mono2,
            Preset::PaperColor => ParamKind::Color6,
        }
    }

    pub fn params(&self) -> ParamVector {
        default_optimized_params(self.kind())
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-mono" => Ok(Preset::PaperMono),
            "paper-color" => Ok(Preset::PaperColor),
            other => Err(Error::Config(format!("unknown preset `{other}`"))),
        }
    }
}

/// A phase offset given either in seconds or in red-channel periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseSpec {
    Seconds(f64),
    Periods(f64),
}

impl PhaseSpec {
    pub fn seconds(&self, red_period_s: f64) -> f64 {
        match *self {
            PhaseSpec::Seconds(s) => s,
            PhaseSpec::Periods(p) => p * red_period_s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveformShape {
    #[serde(alias = "mono")]
    Monochromatic,
    Color,
}

/// Explicit waveform in a run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformConfig {
    pub kind: WaveformShape,
    /// Monochromatic frequency.
    #[serde(default)]
    pub frequency_hz: Option<f64>,
    /// Color frequencies, red first.
    #[serde(default)]
    pub frequencies_hz: Option<[f64; 3]>,
    pub duty_cycle: f64,
    #[serde(default)]
    pub phase_rg: Option<PhaseSpec>,
    #[serde(default)]
    pub phase_rb: Option<PhaseSpec>,
    #[serde(default = "default_peak")]
    pub peak_intensity: f64,
}

fn default_peak() -> f64 {
    DEFAULT_PEAK_INTENSITY
}

impl WaveformConfig {
    pub fn build(&self, ambient_ratio: f64) -> Result<LedWaveform> {
        let ambient = ambient_ratio * self.peak_intensity;
        match self.kind {
            WaveformShape::Monochromatic => {
                if self.frequencies_hz.is_some()
                    || self.phase_rg.is_some()
                    || self.phase_rb.is_some()
                {
                    return Err(Error::Config(
                        "monochromatic waveform takes frequency_hz only, no per-channel values"
                            .into(),
                    ));
                }
                let f = self.frequency_hz.ok_or_else(|| {
                    Error::Config("monochromatic waveform needs frequency_hz".into())
                })?;
                LedWaveform::monochromatic(f, self.duty_cycle, self.peak_intensity, ambient)
            }
            WaveformShape::Color => {
                if self.frequency_hz.is_some() {
                    return Err(Error::Config(
                        "color waveform takes frequencies_hz, not frequency_hz".into(),
                    ));
                }
                let f = self
                    .frequencies_hz
                    .ok_or_else(|| Error::Config("color waveform needs frequencies_hz".into()))?;
                let t_r = 1.0 / f[0];
                let rg = self.phase_rg.map_or(0.0, |p| p.seconds(t_r));
                let rb = self.phase_rb.map_or(0.0, |p| p.seconds(t_r));
                LedWaveform::color(f, self.duty_cycle, rg, rb, self.peak_intensity, ambient)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    pub kind: ParamKind,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_min_f")]
    pub min_frequency_hz: f64,
    #[serde(default = "default_max_f")]
    pub max_frequency_hz: f64,
    /// Use at most this many impostor pairs in the objective.
    #[serde(default)]
    pub max_pairs: Option<usize>,
}

fn default_budget() -> usize {
    600
}

fn default_min_f() -> f64 {
    DEFAULT_MIN_FREQUENCY_HZ
}

fn default_max_f() -> f64 {
    DEFAULT_MAX_FREQUENCY_HZ
}

impl OptimizeConfig {
    pub fn new(kind: ParamKind) -> Self {
        OptimizeConfig {
            kind,
            budget: default_budget(),
            min_frequency_hz: DEFAULT_MIN_FREQUENCY_HZ,
            max_frequency_hz: DEFAULT_MAX_FREQUENCY_HZ,
            max_pairs: None,
        }
    }

    pub fn space(&self) -> SearchSpace {
        SearchSpace {
            kind: self.kind,
            min_frequency_hz: self.min_frequency_hz,
            max_frequency_hz: self.max_frequency_hz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    /// Defaults to the axis's standard grid.
    #[serde(default)]
    pub values: Option<Vec<SweepValue>>,
}

impl SweepConfig {
    pub fn values(&self) -> Vec<SweepValue> {
        self.values
            .clone()
            .unwrap_or_else(|| self.axis.default_values())
    }
}

/// Everything a CLI run needs, loadable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// `pairs.csv` file or a directory with one subdirectory per identity.
    #[serde(default)]
    pub pairs: Option<PathBuf>,
    #[serde(default = "default_attempts")]
    pub attempts: usize,
    #[serde(default = "one")]
    pub repeats: usize,
    #[serde(default = "one")]
    pub workers: usize,
    /// Ambient intensity as a fraction of the LED peak.
    #[serde(default)]
    pub ambient_ratio: f64,
    #[serde(default)]
    pub preset: Option<Preset>,
    #[serde(default)]
    pub sensor: SensorConfig,
    #[serde(default)]
    pub oracle: OracleBinding,
    #[serde(default)]
    pub waveform: Option<WaveformConfig>,
    #[serde(default)]
    pub optimize: Option<OptimizeConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_attempts() -> usize {
    DEFAULT_ATTEMPTS
}

fn one() -> usize {
    1
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out: default_out(),
            pairs: None,
            attempts: DEFAULT_ATTEMPTS,
            repeats: 1,
            workers: 1,
            ambient_ratio: 0.0,
            preset: None,
            sensor: SensorConfig::default(),
            oracle: OracleBinding::default(),
            waveform: None,
            optimize: None,
            sweep: None,
        }
    }
}

/// Where the trigger of a run comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum TriggerSource<'a> {
    Waveform(&'a WaveformConfig),
    Preset(Preset),
    Optimize(&'a OptimizeConfig),
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate_fields()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        // relative paths in a config file are relative to that file
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(p) = &cfg.pairs {
            if p.is_relative() {
                cfg.pairs = Some(base.join(p));
            }
        }
        if cfg.out.is_relative() {
            cfg.out = base.join(&cfg.out);
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn validate_fields(&self) -> Result<()> {
        if self.attempts == 0 {
            return Err(Error::Config("attempts must be at least 1".into()));
        }
        if self.repeats == 0 || self.workers == 0 {
            return Err(Error::Config(
                "repeats and workers must be at least 1".into(),
            ));
        }
        if !(self.ambient_ratio >= 0.0 && self.ambient_ratio.is_finite()) {
            return Err(Error::Config("ambient_ratio must be nonnegative".into()));
        }
        self.sensor.validate()?;
        self.oracle.validate()
    }

    /// Exactly one of `waveform`, `preset` and `optimize` must be set.
    pub fn trigger_source(&self) -> Result<TriggerSource<'_>> {
        self.validate_fields()?;
        match (&self.waveform, self.preset, &self.optimize) {
            (Some(w), None, None) => Ok(TriggerSource::Waveform(w)),
            (None, Some(p), None) => Ok(TriggerSource::Preset(p)),
            (None, None, Some(o)) => Ok(TriggerSource::Optimize(o)),
            (None, None, None) => Err(Error::Config(
                "no trigger: set one of `waveform`, `preset` or `optimize`".into(),
            )),
            _ => Err(Error::Config(
                "`waveform`, `preset` and `optimize` are mutually exclusive".into(),
            )),
        }
    }

    /// Resolves the trigger waveform. Optimization runs need the parameters
    /// they produced.
    pub fn resolve_waveform(&self, optimized: Option<&ParamVector>) -> Result<LedWaveform> {
        match self.trigger_source()? {
            TriggerSource::Waveform(w) => w.build(self.ambient_ratio),
            TriggerSource::Preset(p) => p.params().to_waveform(self.ambient_ratio),
            TriggerSource::Optimize(o) => {
                let p = optimized.ok_or_else(|| {
                    Error::Config("optimized parameters are not available yet".into())
                })?;
                if p.kind != o.kind {
                    return Err(Error::Config(
                        "optimized parameters have the wrong kind".into(),
                    ));
                }
                p.to_waveform(self.ambient_ratio)
            }
        }
    }

    /// Replaces the trigger source with a preset.
    pub fn set_preset(&mut self, preset: Preset) {
        self.preset = Some(preset);
        self.waveform = None;
        self.optimize = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::OracleKind;
    use crate::sensor::Orientation;

    const COLOR: &str = r#"
        seed = 7
        out = "runs/a"
        attempts = 1
        [sensor]
        orientation = "row"
        [oracle]
        kind = "surrogate"
        threshold = 0.97
        [waveform]
        kind = "color"
        frequencies_hz = [445.95, 232.30, 219.90]
        duty_cycle = 0.2136
        phase_rg = { periods = 0.2257 }
        phase_rb = { seconds = 0.001 }
        [sweep]
        axis = "phase_shift_grid"
        values = [[0.0, 0.5], [0.25, 0.75]]
    "#;

    #[test]
    fn parses_color_waveform_with_mixed_phase_units() {
        let cfg = RunConfig::from_toml_str(COLOR).unwrap();
        assert_eq!(cfg.sensor.orientation, Orientation::RowWise);
        assert_eq!(cfg.sensor.exposure_s, 1.0 / 200.0);
        assert_eq!(cfg.oracle.threshold, Some(0.97));
        let w = cfg.resolve_waveform(None).unwrap();
        assert!((w.green.phase_s - 0.2257 / 445.95).abs() < 1e-15);
        assert_eq!(w.blue.phase_s, 0.001);
        assert_eq!(cfg.sweep.unwrap().values().len(), 2);
    }

    #[test]
    fn exactly_one_trigger_source() {
        let mut cfg = RunConfig::from_toml_str(COLOR).unwrap();
        cfg.preset = Some(Preset::PaperMono);
        assert!(matches!(cfg.trigger_source(), Err(Error::Config(_))));
        cfg.set_preset(Preset::PaperMono);
        assert_eq!(
            cfg.trigger_source().unwrap(),
            TriggerSource::Preset(Preset::PaperMono)
        );
        let empty = RunConfig::default();
        assert!(empty.trigger_source().is_err());
    }

    #[test]
    fn optimize_section_and_external_oracle() {
        let cfg = RunConfig::from_toml_str(
            r#"
            [oracle]
            kind = "external:python3 verify.py --fast"
            [optimize]
            kind = "color6"
            budget = 90
            "#,
        )
        .unwrap();
        assert_eq!(
            cfg.oracle.kind,
            OracleKind::External {
                command: "python3 verify.py --fast".into()
            }
        );
        match cfg.trigger_source().unwrap() {
            TriggerSource::Optimize(o) => assert_eq!(o.budget, 90),
            other => panic!("{other:?}"),
        }
        assert!(cfg.resolve_waveform(None).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::from_toml_str(COLOR).unwrap();
        cfg.optimize = None;
        let back = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml_str("sed = 1").is_err());
        assert!(RunConfig::from_toml_str("attempts = 0").is_err());
    }
}
