//! Black-box verification and detection oracles.
//!
//! An oracle turns an image into a [`FaceOracle::Probe`] once, then answers
//! pairwise verification queries and face-detection queries on probes. The
//! built-in [`SurrogateOracle`] is a deterministic hand-crafted embedding; the
//! [`ExternalOracle`] drives a child process over a line protocol.

mod calibrate;
mod external;
mod quality;
mod surrogate;

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageBuffer;

pub use calibrate::{calibrate_threshold, calibrate_threshold_from_scores, impostor_scores};
pub use external::{ExternalOracle, DEFAULT_TIMEOUT};
pub use quality::{
    clipped_fraction, contrast_ok, heuristic_face_detected, quality_check, CLIP_FRACTION_LIMIT,
    EDGE_DENSITY_FLOOR, EDGE_MAGNITUDE, RESIDUAL_VARIANCE_FLOOR,
};
pub use surrogate::{
    cosine_similarity, gradient_histogram, surrogate_embed, Embedding, SurrogateOracle, BLOCK_GRID,
    EMBEDDING_DIM, GRADIENT_BINS, MIN_EMBED_SIZE,
};

/// Default false accept rate used for threshold calibration (0.1%).
pub const DEFAULT_FAR_TARGET: f64 = 0.001;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("failed to start oracle `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("oracle i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("oracle timed out after {after:?} on `{request}`")]
    Timeout { request: String, after: Duration },
    #[error("malformed oracle reply to `{request}`: `{reply}`")]
    Malformed { request: String, reply: String },
    #[error("oracle reported error on `{request}`: {message}")]
    Remote { request: String, message: String },
    #[error("oracle process exited while handling `{request}`")]
    Exited { request: String },
    #[error("cannot probe image: {0}")]
    InvalidImage(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyDecision {
    pub accepted: bool,
    /// Similarity, higher is more similar. External oracles may omit it.
    pub score: Option<f64>,
}

impl VerifyDecision {
    /// Ties accept.
    pub fn from_score(score: f64, threshold: f64) -> Self {
        VerifyDecision {
            accepted: score >= threshold,
            score: Some(score),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityReport {
    pub face_detected: bool,
    pub contrast_ok: bool,
    pub passes: bool,
}

impl QualityReport {
    pub fn new(face_detected: bool, contrast_ok: bool) -> Self {
        QualityReport {
            face_detected,
            contrast_ok,
            passes: face_detected && contrast_ok,
        }
    }
}

/// A verification oracle queried through prepared probes.
pub trait FaceOracle: Sync {
    type Probe: Send + Sync;

    fn probe(&self, img: &ImageBuffer) -> Result<Self::Probe, OracleError>;

    fn verify(&self, a: &Self::Probe, b: &Self::Probe) -> Result<VerifyDecision, OracleError>;

    fn detect_face(&self, img: &ImageBuffer, probe: &Self::Probe) -> Result<bool, OracleError>;

    /// Whether probes and queries may be issued from several threads at once.
    fn concurrent(&self) -> bool {
        true
    }
}

/// Verifies one image pair.
pub fn verify<O: FaceOracle>(
    oracle: &O,
    a: &ImageBuffer,
    b: &ImageBuffer,
) -> Result<VerifyDecision, OracleError> {
    let pa = oracle.probe(a)?;
    let pb = oracle.probe(b)?;
    oracle.verify(&pa, &pb)
}

/// Quality criterion: the oracle's face detector plus the local clipping check.
pub fn assess_quality<O: FaceOracle>(
    oracle: &O,
    img: &ImageBuffer,
    probe: &O::Probe,
) -> Result<QualityReport, OracleError> {
    Ok(QualityReport::new(
        oracle.detect_face(img, probe)?,
        contrast_ok(img),
    ))
}

/// Written as `surrogate` or `external:<command>` in configs and on the command line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum OracleKind {
    Surrogate,
    External { command: String },
}

impl std::str::FromStr for OracleKind {
    type Err = Error;

    /// `surrogate` or `external:<command>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "surrogate" {
            Ok(OracleKind::Surrogate)
        } else if let Some(cmd) = s.strip_prefix("external:") {
            if cmd.trim().is_empty() {
                return Err(Error::Config("external oracle needs a command".into()));
            }
            Ok(OracleKind::External {
                command: cmd.to_string(),
            })
        } else {
            Err(Error::Config(format!("unknown oracle `{s}`")))
        }
    }
}

impl std::fmt::Display for OracleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OracleKind::Surrogate => f.write_str("surrogate"),
            OracleKind::External { command } => write!(f, "external:{command}"),
        }
    }
}

impl TryFrom<String> for OracleKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<OracleKind> for String {
    fn from(k: OracleKind) -> String {
        k.to_string()
    }
}

/// Serializable description of which oracle to build and how it is calibrated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleBinding {
    pub kind: OracleKind,
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default = "default_far")]
    pub far_target: f64,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: f64,
}

fn default_far() -> f64 {
    DEFAULT_FAR_TARGET
}

fn default_timeout_s() -> f64 {
    DEFAULT_TIMEOUT.as_secs_f64()
}

impl Default for OracleBinding {
    fn default() -> Self {
        OracleBinding {
            kind: OracleKind::Surrogate,
            threshold: None,
            far_target: DEFAULT_FAR_TARGET,
            timeout_s: DEFAULT_TIMEOUT.as_secs_f64(),
        }
    }
}

impl OracleBinding {
    pub fn validate(&self) -> Result<()> {
        if !(self.far_target > 0.0 && self.far_target < 1.0) {
            return Err(Error::invalid(format!(
                "far_target must lie in (0, 1), got {}",
                self.far_target
            )));
        }
        if !(self.timeout_s > 0.0) {
            return Err(Error::invalid("oracle timeout must be positive"));
        }
        Ok(())
    }

    /// Builds the oracle. Surrogate bindings must carry a threshold.
    pub fn build(&self) -> Result<AnyOracle> {
        self.validate()?;
        match &self.kind {
            OracleKind::Surrogate => {
                let threshold = self.threshold.ok_or_else(|| {
                    Error::Config("surrogate oracle has no calibrated threshold".into())
                })?;
                Ok(AnyOracle::Surrogate(SurrogateOracle::new(threshold)))
            }
            OracleKind::External { command } => Ok(AnyOracle::External(ExternalOracle::spawn(
                command,
                Duration::from_secs_f64(self.timeout_s),
            )?)),
        }
    }
}

/// Runtime choice between the built-in and an external oracle.
pub enum AnyOracle {
    Surrogate(SurrogateOracle),
    External(ExternalOracle),
}

pub enum AnyProbe {
    Embedding(Embedding),
    File(PathBuf),
}

impl FaceOracle for AnyOracle {
    type Probe = AnyProbe;

    fn probe(&self, img: &ImageBuffer) -> Result<AnyProbe, OracleError> {
        match self {
            AnyOracle::Surrogate(o) => o.probe(img).map(AnyProbe::Embedding),
            AnyOracle::External(o) => o.probe(img).map(AnyProbe::File),
        }
    }

    fn verify(&self, a: &AnyProbe, b: &AnyProbe) -> Result<VerifyDecision, OracleError> {
        match (self, a, b) {
            (AnyOracle::Surrogate(o), AnyProbe::Embedding(a), AnyProbe::Embedding(b)) => {
                o.verify(a, b)
            }
            (AnyOracle::External(o), AnyProbe::File(a), AnyProbe::File(b)) => o.verify(a, b),
            _ => Err(OracleError::InvalidImage(
                "probe does not belong to this oracle".into(),
            )),
        }
    }

    fn detect_face(&self, img: &ImageBuffer, probe: &AnyProbe) -> Result<bool, OracleError> {
        match (self, probe) {
            (AnyOracle::Surrogate(o), AnyProbe::Embedding(p)) => o.detect_face(img, p),
            (AnyOracle::External(o), AnyProbe::File(p)) => o.detect_face(img, p),
            _ => Err(OracleError::InvalidImage(
                "probe does not belong to this oracle".into(),
            )),
        }
    }

    fn concurrent(&self) -> bool {
        match self {
            AnyOracle::Surrogate(o) => o.concurrent(),
            AnyOracle::External(o) => o.concurrent(),
        }
    }
}
