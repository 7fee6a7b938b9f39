//! Victim, attack and face-detection success rates for one trigger.

use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pairs::Dataset;
use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::optimizer::DEFAULT_ATTEMPTS;
use crate::oracle::{assess_quality, FaceOracle, OracleError};
use crate::sensor::SensorConfig;
use crate::trigger::{attempt_phases, inject_trigger, scale_face, TriggerSpec};
use crate::waveform::LedWaveform;

/// Marker for the recognition-only metric that has no meaning for verification.
pub const NON_VICTIM_NOTE: &str =
    "not applicable: non-victim accuracy is defined for recognition only";

/// Image transform applied to every injected image before it reaches the oracle.
pub type PostFilter<'a> = &'a (dyn Fn(&ImageBuffer) -> ImageBuffer + Sync);

#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    pub waveform: LedWaveform,
    pub sensor: SensorConfig,
    pub attempts: usize,
    /// Global phase of every victim-side injection.
    pub victim_phase_s: f64,
    /// Scale factor applied to attacker faces before injection.
    pub attacker_scale: Option<f64>,
}

impl ProtocolConfig {
    pub fn new(waveform: LedWaveform, sensor: SensorConfig) -> Self {
        ProtocolConfig {
            waveform,
            sensor,
            attempts: DEFAULT_ATTEMPTS,
            victim_phase_s: 0.0,
            attacker_scale: None,
        }
    }

    pub fn with_attempts(mut self, attempts: usize) -> Self {
        self.attempts = attempts;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    Genuine,
    Impostor,
}

impl PairKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PairKind::Genuine => "genuine",
            PairKind::Impostor => "impostor",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub kind: PairKind,
    /// Position within the pairs of its kind.
    pub index: usize,
    pub image_a: String,
    pub image_b: String,
    pub success: bool,
    /// First attempt that was accepted.
    pub accepted_attempt: Option<usize>,
    /// Highest score over attempts.
    pub best_score: Option<f64>,
    /// Score with the attacker at global phase 0 (the only score for genuine pairs).
    pub aligned_score: Option<f64>,
    /// Quality verdict of each injected image of this pair, victim first.
    pub quality: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub face_detection_rate: f64,
    /// `None` without genuine pairs.
    pub victim_success_rate: Option<f64>,
    /// `None` without impostor pairs.
    pub attack_success_rate: Option<f64>,
    pub non_victim_note: String,
    pub per_pair: Vec<PairRecord>,
}

fn mean_std(v: &[f64]) -> Option<(f64, f64)> {
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    Some((m, var.sqrt()))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

impl EvalReport {
    /// Recomputes the rates from `per_pair`.
    pub fn from_records(per_pair: Vec<PairRecord>) -> Result<Self> {
        let quality: Vec<bool> = per_pair
            .iter()
            .flat_map(|r| r.quality.iter().copied())
            .collect();
        if quality.is_empty() {
            return Err(Error::EmptyInput("evaluation pairs"));
        }
        let rate = |kind: PairKind| {
            let v: Vec<bool> = per_pair
                .iter()
                .filter(|r| r.kind == kind)
                .map(|r| r.success)
                .collect();
            (!v.is_empty()).then(|| v.iter().filter(|&&s| s).count() as f64 / v.len() as f64)
        };
        Ok(EvalReport {
            face_detection_rate: quality.iter().filter(|&&q| q).count() as f64
                / quality.len() as f64,
            victim_success_rate: rate(PairKind::Genuine),
            attack_success_rate: rate(PairKind::Impostor),
            non_victim_note: NON_VICTIM_NOTE.to_string(),
            per_pair,
        })
    }

    /// Mean and population standard deviation of the aligned impostor scores.
    pub fn impostor_similarity(&self) -> Option<(f64, f64)> {
        let v: Option<Vec<f64>> = self
            .per_pair
            .iter()
            .filter(|r| r.kind == PairKind::Impostor)
            .map(|r| r.aligned_score)
            .collect();
        mean_std(&v?)
    }

    pub fn write_pairs_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "kind",
            "index",
            "image_a",
            "image_b",
            "success",
            "accepted_attempt",
            "best_score",
            "aligned_score",
            "quality_passed",
            "quality_checked",
        ])?;
        for r in &self.per_pair {
            out.write_record([
                r.kind.as_str().to_string(),
                r.index.to_string(),
                r.image_a.clone(),
                r.image_b.clone(),
                r.success.to_string(),
                r.accepted_attempt
                    .map_or_else(String::new, |a| a.to_string()),
                fmt_opt(r.best_score),
                fmt_opt(r.aligned_score),
                r.quality.iter().filter(|&&q| q).count().to_string(),
                r.quality.len().to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::io("pairs report", e))?;
        Ok(())
    }

    /// `metric,value` rows; absent rates are left empty.
    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["metric", "value"])?;
        out.write_record([
            "face_detection_rate".to_string(),
            self.face_detection_rate.to_string(),
        ])?;
        out.write_record([
            "victim_success_rate".to_string(),
            fmt_opt(self.victim_success_rate),
        ])?;
        out.write_record([
            "attack_success_rate".to_string(),
            fmt_opt(self.attack_success_rate),
        ])?;
        out.write_record([
            "non_victim_accuracy".to_string(),
            self.non_victim_note.clone(),
        ])?;
        out.flush().map_err(|e| Error::io("summary report", e))?;
        Ok(())
    }
}

struct Prepared<P> {
    probe: P,
    passes: bool,
}

struct Evaluator<'a, O: FaceOracle> {
    oracle: &'a O,
    data: &'a Dataset,
    base: TriggerSpec,
    cfg: &'a ProtocolConfig,
    filter: Option<PostFilter<'a>>,
    injected: HashMap<(usize, u64, bool), Prepared<O::Probe>>,
    clean: HashMap<usize, O::Probe>,
}

impl<O: FaceOracle> Evaluator<'_, O> {
    fn injected(
        &mut self,
        img: usize,
        phase_s: f64,
        scaled: bool,
    ) -> Result<&Prepared<O::Probe>, OracleError> {
        let key = (img, phase_s.to_bits(), scaled);
        if !self.injected.contains_key(&key) {
            let source = &self.data.images[img];
            let scaled_img;
            let source = match (scaled, self.cfg.attacker_scale) {
                (true, Some(f)) => {
                    scaled_img = scale_face(source, f)
                        .map_err(|e| OracleError::InvalidImage(e.to_string()))?;
                    &scaled_img
                }
                _ => source,
            };
            let mut out = inject_trigger(source, &self.base.with_phase(phase_s))
                .map_err(|e| OracleError::InvalidImage(e.to_string()))?;
            if let Some(f) = self.filter {
                out = f(&out);
            }
            let probe = self.oracle.probe(&out)?;
            let passes = assess_quality(self.oracle, &out, &probe)?.passes;
            self.injected.insert(key, Prepared { probe, passes });
        }
        Ok(&self.injected[&key])
    }

    fn clean(&mut self, img: usize) -> Result<(), OracleError> {
        if !self.clean.contains_key(&img) {
            let p = self.oracle.probe(&self.data.images[img])?;
            self.clean.insert(img, p);
        }
        Ok(())
    }

    fn genuine(&mut self, index: usize, (a, b): (usize, usize)) -> Result<PairRecord, OracleError> {
        let victim_phase = self.cfg.victim_phase_s;
        self.injected(a, victim_phase, false)?;
        self.clean(b)?;
        let va = &self.injected[&(a, victim_phase.to_bits(), false)];
        let d = self.oracle.verify(&va.probe, &self.clean[&b])?;
        Ok(PairRecord {
            kind: PairKind::Genuine,
            index,
            image_a: self.data.labels[a].clone(),
            image_b: self.data.labels[b].clone(),
            success: d.accepted,
            accepted_attempt: d.accepted.then_some(0),
            best_score: d.score,
            aligned_score: d.score,
            quality: vec![va.passes],
        })
    }

    fn impostor(
        &mut self,
        index: usize,
        (a, b): (usize, usize),
        phases: &[f64],
    ) -> Result<PairRecord, OracleError> {
        let victim_phase = self.cfg.victim_phase_s;
        self.injected(a, victim_phase, false)?;
        for &p in phases {
            self.injected(b, p, true)?;
        }
        let victim = &self.injected[&(a, victim_phase.to_bits(), false)];
        let mut quality = vec![victim.passes];
        let mut accepted_attempt = None;
        let mut best: Option<f64> = None;
        let mut aligned = None;
        for (k, &p) in phases.iter().enumerate() {
            let attacker = &self.injected[&(b, p.to_bits(), true)];
            quality.push(attacker.passes);
            let d = self.oracle.verify(&victim.probe, &attacker.probe)?;
            if d.accepted && accepted_attempt.is_none() {
                accepted_attempt = Some(k);
            }
            if let Some(s) = d.score {
                best = Some(best.map_or(s, |b: f64| b.max(s)));
            }
            if k == 0 {
                aligned = d.score;
            }
        }
        Ok(PairRecord {
            kind: PairKind::Impostor,
            index,
            image_a: self.data.labels[a].clone(),
            image_b: self.data.labels[b].clone(),
            success: accepted_attempt.is_some(),
            accepted_attempt,
            best_score: best,
            aligned_score: aligned,
            quality,
        })
    }
}

/// Runs the protocol: genuine pairs verify the injected victim image against
/// the clean second image; impostor pairs verify the injected victim against
/// the injected attacker at each attempt phase and succeed on the first
/// acceptance. Detection counts every injected image.
pub fn run_protocol<O: FaceOracle>(
    data: &Dataset,
    cfg: &ProtocolConfig,
    oracle: &O,
    filter: Option<PostFilter<'_>>,
) -> Result<EvalReport> {
    data.validate()?;
    if cfg.attempts == 0 {
        return Err(Error::invalid("attempts must be at least 1"));
    }
    cfg.waveform.validate()?;
    cfg.sensor.validate()?;
    let phases = attempt_phases(cfg.attempts, cfg.waveform.red_period_s());
    let mut ev = Evaluator {
        oracle,
        data,
        base: TriggerSpec::new(cfg.waveform, cfg.sensor, 0.0),
        cfg,
        filter,
        injected: HashMap::new(),
        clean: HashMap::new(),
    };
    let mut records = Vec::with_capacity(data.genuine.len() + data.impostor.len());
    for (i, &pair) in data.genuine.iter().enumerate() {
        records.push(
            ev.genuine(i, pair)
                .map_err(|source| Error::PairFailure { pair: i, source })?,
        );
    }
    let offset = data.genuine.len();
    for (i, &pair) in data.impostor.iter().enumerate() {
        let r = ev
            .impostor(i, pair, &phases)
            .map_err(|source| Error::PairFailure {
                pair: offset + i,
                source,
            })?;
        records.push(r);
    }
    EvalReport::from_records(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub repeats: usize,
}

type Metric = fn(&EvalReport) -> Option<f64>;

/// Mean and standard deviation of each rate over `repeats` bootstrap
/// resamples of the pair records. Repeat `r` draws from stream `r` of a
/// generator seeded with `seed`. A single repeat reports the rates as-is.
pub fn bootstrap_rates(report: &EvalReport, repeats: usize, seed: u64) -> Result<Vec<RateSummary>> {
    if repeats == 0 {
        return Err(Error::invalid("repeats must be at least 1"));
    }
    let mut samples: Vec<EvalReport> = Vec::with_capacity(repeats);
    if repeats == 1 {
        samples.push(report.clone());
    } else {
        for r in 0..repeats {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut records = Vec::with_capacity(report.per_pair.len());
            for kind in [PairKind::Genuine, PairKind::Impostor] {
                let pool: Vec<&PairRecord> =
                    report.per_pair.iter().filter(|p| p.kind == kind).collect();
                for _ in 0..pool.len() {
                    records.push(pool[rng.random_range(0..pool.len())].clone());
                }
            }
            samples.push(EvalReport::from_records(records)?);
        }
    }
    let metrics: [(&str, Metric); 3] = [
        ("face_detection_rate", |r| Some(r.face_detection_rate)),
        ("victim_success_rate", |r| r.victim_success_rate),
        ("attack_success_rate", |r| r.attack_success_rate),
    ];
    Ok(metrics
        .iter()
        .filter_map(|(name, get)| {
            let v: Option<Vec<f64>> = samples.iter().map(get).collect();
            let (mean, std) = mean_std(&v?)?;
            Some(RateSummary {
                metric: name.to_string(),
                mean,
                std,
                repeats,
            })
        })
        .collect())
}
