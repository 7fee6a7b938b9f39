//! Deterministic stand-in for a pretrained face verifier.
//!
//! The embedding is sensitive to exactly what shallow convolutional layers
//! respond to, color layout and edges:
//!
//! * a 4x4 block grid of per-channel mean (offset by mid-gray) and standard
//!   deviation, on values scaled to `[0, 1]` (96 values);
//! * an unsigned gradient orientation histogram of the luminance plane with
//!   8 bins per image quadrant, magnitude weighted (32 values).
//!
//! Each group is L2-normalized, the groups are concatenated, and the result is
//! L2-normalized again. [`EMBEDDING_DIM`] is 128.

use std::f64::consts::PI;

use super::quality::heuristic_face_detected;
use super::{FaceOracle, OracleError, VerifyDecision};
use crate::error::{Error, Result};
use crate::image::{ImageBuffer, LUMA};

pub const BLOCK_GRID: usize = 4;
pub const GRADIENT_BINS: usize = 8;
const QUADRANTS: usize = 4;
const BLOCK_DIM: usize = BLOCK_GRID * BLOCK_GRID * 3 * 2;
const GRADIENT_DIM: usize = QUADRANTS * GRADIENT_BINS;
pub const EMBEDDING_DIM: usize = BLOCK_DIM + GRADIENT_DIM;
pub const MIN_EMBED_SIZE: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn surrogate_embed(img: &ImageBuffer) -> Result<Embedding> {
    let (w, h) = (img.width(), img.height());
    if w < MIN_EMBED_SIZE || h < MIN_EMBED_SIZE {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: MIN_EMBED_SIZE,
        });
    }
    let mut blocks = block_statistics(img);
    let mut grads = gradient_histogram(img);
    l2_normalize(&mut blocks);
    l2_normalize(&mut grads);
    let mut v = blocks;
    v.extend_from_slice(&grads);
    l2_normalize(&mut v);
    Ok(Embedding(v))
}

fn block_statistics(img: &ImageBuffer) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let cells = BLOCK_GRID * BLOCK_GRID;
    let mut sum = vec![[0.0f64; 3]; cells];
    let mut sq = vec![[0.0f64; 3]; cells];
    let mut count = vec![0usize; cells];
    for y in 0..h {
        let by = y * BLOCK_GRID / h;
        for x in 0..w {
            let b = by * BLOCK_GRID + x * BLOCK_GRID / w;
            let px = img.get(x, y);
            for c in 0..3 {
                let v = px[c] as f64 / 255.0;
                sum[b][c] += v;
                sq[b][c] += v * v;
            }
            count[b] += 1;
        }
    }
    let mut out = Vec::with_capacity(BLOCK_DIM);
    for b in 0..cells {
        let n = count[b] as f64;
        for c in 0..3 {
            let mean = sum[b][c] / n;
            let var = (sq[b][c] / n - mean * mean).max(0.0);
            out.push(mean - 0.5);
            out.push(var.sqrt());
        }
    }
    out
}

/// Magnitude-weighted orientation histogram per quadrant, before normalization.
/// Orientation is unsigned, over `[0, pi)`, from central differences of luminance.
pub fn gradient_histogram(img: &ImageBuffer) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let lum: Vec<f64> = img
        .pixels()
        .iter()
        .map(|p| (LUMA[0] * p[0] as f64 + LUMA[1] * p[1] as f64 + LUMA[2] * p[2] as f64) / 255.0)
        .collect();
    let mut hist = vec![0.0; GRADIENT_DIM];
    if w < 3 || h < 3 {
        return hist;
    }
    for y in 1..h - 1 {
        let qy = usize::from(y >= h / 2);
        for x in 1..w - 1 {
            let gx = lum[y * w + x + 1] - lum[y * w + x - 1];
            let gy = lum[(y + 1) * w + x] - lum[(y - 1) * w + x];
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let theta = gy.atan2(gx).rem_euclid(PI);
            let bin = ((theta / PI * GRADIENT_BINS as f64) as usize).min(GRADIENT_BINS - 1);
            let q = qy * 2 + usize::from(x >= w / 2);
            hist[q * GRADIENT_BINS + bin] += mag;
        }
    }
    let interior = ((w - 2) * (h - 2)) as f64;
    for v in &mut hist {
        *v /= interior;
    }
    hist
}

fn l2_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v {
            *x /= norm;
        }
    }
}

pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> f64 {
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    let na = a.0.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.0.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

/// Cosine similarity of surrogate embeddings against a fixed threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateOracle {
    pub threshold: f64,
}

impl SurrogateOracle {
    pub fn new(threshold: f64) -> Self {
        SurrogateOracle { threshold }
    }

    pub fn similarity(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
        Ok(cosine_similarity(
            &surrogate_embed(a)?,
            &surrogate_embed(b)?,
        ))
    }
}

impl FaceOracle for SurrogateOracle {
    type Probe = Embedding;

    fn probe(&self, img: &ImageBuffer) -> Result<Embedding, OracleError> {
        surrogate_embed(img).map_err(|e| OracleError::InvalidImage(e.to_string()))
    }

    fn verify(&self, a: &Embedding, b: &Embedding) -> Result<VerifyDecision, OracleError> {
        Ok(VerifyDecision::from_score(
            cosine_similarity(a, b),
            self.threshold,
        ))
    }

    fn detect_face(&self, img: &ImageBuffer, _probe: &Embedding) -> Result<bool, OracleError> {
        Ok(heuristic_face_detected(img))
    }
}
