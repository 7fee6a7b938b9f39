use super::FaceOracle;
use crate::error::{Error, Result};
use crate::image::ImageBuffer;

/// Smallest threshold whose impostor accept fraction (`score >= threshold`)
/// stays within `far_target`.
///
/// With `k = floor(far_target * n)` accepts allowed, the answer is the next
/// representable value above the `(k+1)`-th largest score; when no accept is
/// allowed that lands strictly above the maximum. A target of 1 accepts
/// everything and returns the minimum score.
pub fn calibrate_threshold_from_scores(scores: &[f64], far_target: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("impostor pairs"));
    }
    if !(far_target > 0.0 && far_target <= 1.0) {
        return Err(Error::invalid(format!(
            "far_target must lie in (0, 1], got {far_target}"
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("impostor scores must be finite"));
    }
    let n = scores.len();
    if (n as f64) < 1.0 / far_target {
        log::warn!(
            "calibrating FAR {far_target} from only {n} impostor pairs; at least {} recommended",
            (1.0 / far_target).ceil()
        );
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    // tolerance keeps e.g. 0.001 * 1000 from flooring to 0
    let allowed = (far_target * n as f64 + 1e-9).floor() as usize;
    if allowed >= n {
        return Ok(sorted[n - 1]);
    }
    Ok(sorted[allowed].next_up())
}

/// Oracle scores of the given pairs, in pair order.
pub fn impostor_scores<O: FaceOracle>(
    oracle: &O,
    images: &[ImageBuffer],
    pairs: &[(usize, usize)],
) -> Result<Vec<f64>> {
    let mut probes: Vec<Option<O::Probe>> = (0..images.len()).map(|_| None).collect();
    for &(a, b) in pairs {
        for i in [a, b] {
            if probes[i].is_none() {
                probes[i] = Some(oracle.probe(&images[i])?);
            }
        }
    }
    pairs
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            let d = oracle
                .verify(probes[a].as_ref().unwrap(), probes[b].as_ref().unwrap())
                .map_err(|source| Error::PairFailure { pair: k, source })?;
            d.score.ok_or_else(|| {
                Error::Config("oracle reports no similarity scores; cannot calibrate".into())
            })
        })
        .collect()
}

pub fn calibrate_threshold<O: FaceOracle>(
    oracle: &O,
    images: &[ImageBuffer],
    impostor_pairs: &[(usize, usize)],
    far_target: f64,
) -> Result<f64> {
    if impostor_pairs.is_empty() {
        return Err(Error::EmptyInput("impostor pairs"));
    }
    calibrate_threshold_from_scores(
        &impostor_scores(oracle, images, impostor_pairs)?,
        far_target,
    )
}
