use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use ledstripe_core::harness::{Dataset, PairSet, ProtocolConfig, RunConfig, TriggerSource};
use ledstripe_core::optimizer::{BestRecord, ParamVector};
use ledstripe_core::oracle::{calibrate_threshold, AnyOracle, OracleBinding, OracleKind};
use ledstripe_core::LedWaveform;

use crate::Global;

pub const FIXTURE_DIR: &str = "fixtures";
pub const CALIBRATION_FILE: &str = "calibration.csv";
pub const OPTIMIZE_DIR: &str = "optimize";
pub const BEST_FILE: &str = "best.json";

/// Resolved run configuration plus the file layout under the output directory.
pub struct Context {
    pub cfg: RunConfig,
}

impl Context {
    pub fn new(g: &Global) -> Result<Self> {
        let mut cfg = match &g.config {
            Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => RunConfig::default(),
        };
        if let Some(s) = g.seed {
            cfg.seed = s;
        }
        if let Some(p) = g.preset {
            cfg.set_preset(p);
        }
        if let Some(k) = &g.oracle {
            cfg.oracle.kind = k.clone();
        }
        if g.threshold.is_some() {
            cfg.oracle.threshold = g.threshold;
        }
        if let Some(a) = g.attempts {
            cfg.attempts = a;
        }
        if let Some(r) = g.repeats {
            cfg.repeats = r;
        }
        if let Some(w) = g.workers {
            cfg.workers = w;
        }
        if let Some(a) = g.ambient {
            cfg.ambient_ratio = a;
        }
        if let Some(p) = &g.pairs {
            cfg.pairs = Some(p.clone());
        }
        if let Some(o) = &g.out {
            cfg.out = o.clone();
        }
        if cfg.attempts == 0 || cfg.repeats == 0 || cfg.workers == 0 {
            bail!("attempts, repeats and workers must be at least 1");
        }
        Ok(Context { cfg })
    }

    pub fn out(&self, rel: impl AsRef<Path>) -> Result<PathBuf> {
        let p = self.cfg.out.join(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
        Ok(p)
    }

    pub fn create(&self, rel: impl AsRef<Path>) -> Result<BufWriter<File>> {
        let p = self.out(rel)?;
        Ok(BufWriter::new(
            File::create(&p).with_context(|| format!("creating {}", p.display()))?,
        ))
    }

    fn pairs_source(&self) -> PathBuf {
        self.cfg
            .pairs
            .clone()
            .unwrap_or_else(|| self.cfg.out.join(FIXTURE_DIR).join("pairs.csv"))
    }

    /// Loads the pair set. Image labels are made relative to the pair set's
    /// directory so reports do not depend on where the run lives.
    pub fn dataset(&self) -> Result<Dataset> {
        let src = self.pairs_source();
        let (set, base) = if src.is_dir() {
            (PairSet::from_identity_dirs(&src)?, src.clone())
        } else if src.is_file() {
            (
                PairSet::read_csv(&src)?,
                src.parent().unwrap_or(Path::new(".")).to_path_buf(),
            )
        } else {
            bail!(
                "no pair set at {} (run `ledstripe fixtures` or pass --pairs)",
                src.display()
            );
        };
        let mut data = set.load()?;
        for label in &mut data.labels {
            if let Ok(rel) = Path::new(label.as_str()).strip_prefix(&base) {
                *label = rel.to_string_lossy().into_owned();
            }
        }
        log::info!(
            "{}: {} images, {} genuine, {} impostor pairs",
            src.display(),
            data.images.len(),
            data.genuine.len(),
            data.impostor.len()
        );
        Ok(data)
    }

    fn stored_threshold(&self) -> Result<Option<f64>> {
        let path = self.cfg.out.join(CALIBRATION_FILE);
        if !path.is_file() {
            return Ok(None);
        }
        let mut rdr = csv::Reader::from_path(&path)?;
        for row in rdr.records() {
            let row = row?;
            if &row[0] == "threshold" {
                return Ok(Some(
                    row[1]
                        .parse()
                        .with_context(|| format!("{}: bad threshold", path.display()))?,
                ));
            }
        }
        bail!("{}: no threshold row", path.display())
    }

    /// The configured oracle. A surrogate without an explicit threshold uses
    /// the stored calibration, calibrating on `data` when there is none.
    pub fn oracle(&self, data: &Dataset) -> Result<AnyOracle> {
        Ok(self.binding(data)?.build()?)
    }

    pub fn binding(&self, data: &Dataset) -> Result<OracleBinding> {
        let mut b = self.cfg.oracle.clone();
        if b.kind == OracleKind::Surrogate && b.threshold.is_none() {
            b.threshold = match self.stored_threshold()? {
                Some(t) => Some(t),
                None => {
                    log::warn!("no stored calibration; calibrating at far {}", b.far_target);
                    Some(self.calibrate(data, b.far_target)?)
                }
            };
        }
        Ok(b)
    }

    pub fn calibrate(&self, data: &Dataset, far: f64) -> Result<f64> {
        let mut b = self.cfg.oracle.clone();
        b.far_target = far;
        if b.kind == OracleKind::Surrogate {
            // decisions are not used, only scores
            b.threshold = Some(0.0);
        }
        let oracle = b.build()?;
        Ok(calibrate_threshold(
            &oracle,
            &data.images,
            &data.impostor,
            far,
        )?)
    }

    fn optimized(&self) -> Result<ParamVector> {
        let path = self.cfg.out.join(OPTIMIZE_DIR).join(BEST_FILE);
        let text = std::fs::read_to_string(&path).with_context(|| {
            format!(
                "reading {} (run `ledstripe optimize` first)",
                path.display()
            )
        })?;
        let best: BestRecord =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(best.params)
    }

    /// Trigger waveform of the run. Without an explicit trigger source the
    /// result of a previous `optimize` in the same output directory is used.
    pub fn waveform(&self) -> Result<LedWaveform> {
        let has_source =
            self.cfg.waveform.is_some() || self.cfg.preset.is_some() || self.cfg.optimize.is_some();
        if !has_source {
            return Ok(self.optimized()?.to_waveform(self.cfg.ambient_ratio)?);
        }
        let optimized = match self.cfg.trigger_source()? {
            TriggerSource::Optimize(_) => Some(self.optimized()?),
            _ => None,
        };
        Ok(self.cfg.resolve_waveform(optimized.as_ref())?)
    }

    pub fn protocol(&self) -> Result<ProtocolConfig> {
        Ok(ProtocolConfig::new(self.waveform()?, self.cfg.sensor).with_attempts(self.cfg.attempts))
    }
}
