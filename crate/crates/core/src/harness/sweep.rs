use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::pairs::Dataset;
use super::protocol::{run_protocol, EvalReport, ProtocolConfig};
use crate::error::{Error, Result};
use crate::oracle::FaceOracle;
use crate::sensor::Orientation;
use crate::trigger::FACE_SCALE_RANGE;

/// Largest ambient-to-peak ratio accepted by the intensity sweep.
pub const MAX_INTENSITY_RATIO: f64 = 1.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Frequency,
    DutyCycle,
    IntensityRatio,
    FaceScale,
    /// Victim global phase as a fraction of the red period; attackers stay at 0.
    PhaseDifference,
    /// `(phase_rg, phase_rb)` in red periods.
    PhaseShiftGrid,
    Orientation,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 7] = [
        SweepAxis::Frequency,
        SweepAxis::DutyCycle,
        SweepAxis::IntensityRatio,
        SweepAxis::FaceScale,
        SweepAxis::PhaseDifference,
        SweepAxis::PhaseShiftGrid,
        SweepAxis::Orientation,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::Frequency => "frequency",
            SweepAxis::DutyCycle => "duty_cycle",
            SweepAxis::IntensityRatio => "intensity_ratio",
            SweepAxis::FaceScale => "face_scale",
            SweepAxis::PhaseDifference => "phase_difference",
            SweepAxis::PhaseShiftGrid => "phase_shift_grid",
            SweepAxis::Orientation => "orientation",
        }
    }

    pub fn default_values(&self) -> Vec<SweepValue> {
        let scalars = |v: &[f64]| v.iter().map(|&x| SweepValue::Scalar(x)).collect();
        match self {
            SweepAxis::Frequency => scalars(&[50.0, 60.0, 110.0, 220.0, 330.0]),
            SweepAxis::DutyCycle => {
                scalars(&[0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95])
            }
            SweepAxis::IntensityRatio => scalars(&[0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4]),
            SweepAxis::FaceScale => scalars(&[0.8, 0.9, 1.0, 1.1, 1.2]),
            SweepAxis::PhaseDifference => {
                scalars(&[0.0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875])
            }
            SweepAxis::PhaseShiftGrid => {
                let steps = [0.0, 0.2, 0.4, 0.6, 0.8];
                steps
                    .iter()
                    .flat_map(|&a| steps.iter().map(move |&b| SweepValue::Pair([a, b])))
                    .collect()
            }
            SweepAxis::Orientation => vec![
                SweepValue::Orientation(Orientation::ColumnWise),
                SweepValue::Orientation(Orientation::RowWise),
            ],
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepAxis::ALL
            .into_iter()
            .find(|a| a.as_str() == s || a.as_str().replace('_', "-") == s)
            .ok_or_else(|| Error::invalid(format!("unknown sweep axis `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Scalar(f64),
    Pair([f64; 2]),
    Orientation(Orientation),
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Scalar(v) => write!(f, "{v}"),
            SweepValue::Pair([a, b]) => write!(f, "{a};{b}"),
            SweepValue::Orientation(o) => f.write_str(o.as_str()),
        }
    }
}

fn mismatch(axis: SweepAxis, value: &SweepValue) -> Error {
    Error::invalid(format!(
        "value `{value}` does not fit sweep axis {}",
        axis.as_str()
    ))
}

/// `base` with only the swept parameter changed.
pub fn apply_sweep_value(
    base: &ProtocolConfig,
    axis: SweepAxis,
    value: &SweepValue,
) -> Result<ProtocolConfig> {
    let mut cfg = base.clone();
    match (axis, *value) {
        (SweepAxis::Frequency, SweepValue::Scalar(f)) => {
            cfg.waveform = cfg.waveform.with_frequency(f)?
        }
        (SweepAxis::DutyCycle, SweepValue::Scalar(t)) => {
            cfg.waveform = cfg.waveform.with_duty_cycle(t)?
        }
        (SweepAxis::IntensityRatio, SweepValue::Scalar(r)) => {
            if !(0.0..=MAX_INTENSITY_RATIO).contains(&r) {
                return Err(Error::invalid(format!(
                    "intensity ratio {r} outside [0, {MAX_INTENSITY_RATIO}]"
                )));
            }
            cfg.waveform = cfg.waveform.with_ambient_ratio(r)?;
        }
        (SweepAxis::FaceScale, SweepValue::Scalar(s)) => {
            let (lo, hi) = FACE_SCALE_RANGE;
            if !(lo..=hi).contains(&s) {
                return Err(Error::invalid(format!(
                    "face scale {s} outside [{lo}, {hi}]"
                )));
            }
            cfg.attacker_scale = Some(s);
        }
        (SweepAxis::PhaseDifference, SweepValue::Scalar(p)) => {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!(
                    "phase difference {p} outside one period"
                )));
            }
            cfg.victim_phase_s = p * cfg.waveform.red_period_s();
        }
        (SweepAxis::PhaseShiftGrid, SweepValue::Pair([rg, rb])) => {
            cfg.waveform = cfg.waveform.with_phase_fractions(rg, rb)?;
        }
        (SweepAxis::Orientation, SweepValue::Orientation(o)) => cfg.sensor.orientation = o,
        _ => return Err(mismatch(axis, value)),
    }
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: SweepValue,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_CSV_HEADER: [&str; 7] = [
    "axis",
    "value",
    "face_detection_rate",
    "victim_success_rate",
    "attack_success_rate",
    "mean_similarity",
    "std_similarity",
];

impl SweepTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        let mut out = csv::Writer::from_writer(w);
        out.write_record(SWEEP_CSV_HEADER)?;
        for row in &self.rows {
            let sim = row.report.impostor_similarity();
            out.write_record([
                self.axis.as_str().to_string(),
                row.value.to_string(),
                row.report.face_detection_rate.to_string(),
                opt(row.report.victim_success_rate),
                opt(row.report.attack_success_rate),
                opt(sim.map(|s| s.0)),
                opt(sim.map(|s| s.1)),
            ])?;
        }
        out.flush().map_err(|e| Error::io("sweep csv", e))?;
        Ok(())
    }
}

/// One protocol run per value, varying only `axis`. With more than one
/// worker the points are spread over threads, each building its own oracle;
/// rows always come back in value order.
pub fn run_sweep<O, F>(
    data: &Dataset,
    base: &ProtocolConfig,
    axis: SweepAxis,
    values: &[SweepValue],
    workers: usize,
    make_oracle: F,
) -> Result<SweepTable>
where
    O: FaceOracle,
    F: Fn() -> Result<O> + Sync,
{
    if values.is_empty() {
        return Err(Error::EmptyInput("sweep values"));
    }
    let configs = values
        .iter()
        .map(|v| apply_sweep_value(base, axis, v))
        .collect::<Result<Vec<_>>>()?;
    let workers = workers.clamp(1, values.len());

    let reports: Vec<Result<EvalReport>> = if workers == 1 {
        let oracle = make_oracle()?;
        configs
            .iter()
            .map(|c| run_protocol(data, c, &oracle, None))
            .collect()
    } else {
        let mut slots: Vec<Option<Result<EvalReport>>> = (0..values.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let configs = &configs;
                    let make_oracle = &make_oracle;
                    scope.spawn(move || -> Vec<(usize, Result<EvalReport>)> {
                        let oracle = match make_oracle() {
                            Ok(o) => o,
                            Err(e) => {
                                let msg = e.to_string();
                                return (w..configs.len())
                                    .step_by(workers)
                                    .map(|i| (i, Err(Error::Config(msg.clone()))))
                                    .collect();
                            }
                        };
                        (w..configs.len())
                            .step_by(workers)
                            .map(|i| (i, run_protocol(data, &configs[i], &oracle, None)))
                            .collect()
                    })
                })
                .collect();
            for h in handles {
                for (i, r) in h.join().expect("sweep worker panicked") {
                    slots[i] = Some(r);
                }
            }
        });
        slots
            .into_iter()
            .map(|s| s.expect("every sweep point evaluated"))
            .collect()
    };

    let rows = values
        .iter()
        .zip(reports)
        .map(|(v, r)| {
            Ok(SweepRow {
                value: *v,
                report: r?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { axis, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::fixture_dataset;
    use crate::oracle::SurrogateOracle;
    use crate::sensor::SensorConfig;
    use crate::waveform::LedWaveform;

    fn base() -> ProtocolConfig {
        ProtocolConfig::new(
            LedWaveform::monochromatic(344.89, 0.3865, 100.0, 0.0).unwrap(),
            SensorConfig::default(),
        )
    }

    #[test]
    fn axis_names_round_trip() {
        for a in SweepAxis::ALL {
            assert_eq!(a.as_str().parse::<SweepAxis>().unwrap(), a);
        }
        assert_eq!(
            "phase-difference".parse::<SweepAxis>().unwrap(),
            SweepAxis::PhaseDifference
        );
    }

    #[test]
    fn value_type_must_match_axis() {
        let b = base();
        assert!(
            apply_sweep_value(&b, SweepAxis::Frequency, &SweepValue::Pair([0.1, 0.2])).is_err()
        );
        assert!(
            apply_sweep_value(&b, SweepAxis::IntensityRatio, &SweepValue::Scalar(1.5)).is_err()
        );
        assert!(apply_sweep_value(&b, SweepAxis::FaceScale, &SweepValue::Scalar(0.7)).is_err());
        let c = apply_sweep_value(
            &b,
            SweepAxis::PhaseShiftGrid,
            &SweepValue::Pair([0.25, 0.5]),
        )
        .unwrap();
        assert!((c.waveform.green.phase_s * 344.89 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn single_value_sweep_equals_protocol_run() {
        let data = fixture_dataset(8, 4).unwrap();
        let oracle = SurrogateOracle::new(0.95);
        let t = run_sweep(
            &data,
            &base(),
            SweepAxis::Frequency,
            &[SweepValue::Scalar(220.0)],
            1,
            || Ok(oracle),
        )
        .unwrap();
        let cfg =
            apply_sweep_value(&base(), SweepAxis::Frequency, &SweepValue::Scalar(220.0)).unwrap();
        assert_eq!(
            t.rows[0].report,
            run_protocol(&data, &cfg, &oracle, None).unwrap()
        );
    }

    #[test]
    fn threaded_matches_serial() {
        let data = fixture_dataset(8, 3).unwrap();
        let values = SweepAxis::Orientation.default_values();
        let make = || Ok(SurrogateOracle::new(0.95));
        let a = run_sweep(&data, &base(), SweepAxis::Orientation, &values, 1, make).unwrap();
        let b = run_sweep(&data, &base(), SweepAxis::Orientation, &values, 2, make).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap().lines().count(),
            1 + values.len()
        );
    }
}
