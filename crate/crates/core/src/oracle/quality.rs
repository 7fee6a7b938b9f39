//! Face-image quality criterion.
//!
//! The default detector looks at the central half of the image after removing
//! every row mean and every column mean from the luminance plane. Stripes of
//! either orientation are constant along one axis and vanish from that
//! residual, so they cannot fake a face; what survives is two-dimensional
//! structure such as eyes and a mouth.

use super::QualityReport;
use crate::image::{luminance, ImageBuffer};

/// Minimum residual luminance variance in the central region (gray levels squared).
pub const RESIDUAL_VARIANCE_FLOOR: f64 = 20.0;
/// Residual gradient magnitude (gray levels) that counts a pixel as an edge.
pub const EDGE_MAGNITUDE: f64 = 12.0;
/// Minimum fraction of edge pixels in the central region.
pub const EDGE_DENSITY_FLOOR: f64 = 0.02;
/// Images with at least this fraction of clipped pixels fail the contrast check.
pub const CLIP_FRACTION_LIMIT: f64 = 0.4;

pub fn quality_check(img: &ImageBuffer) -> QualityReport {
    QualityReport::new(heuristic_face_detected(img), contrast_ok(img))
}

/// Pixels with any channel at 0 or 255, as a fraction of the image.
pub fn clipped_fraction(img: &ImageBuffer) -> f64 {
    let clipped = img
        .pixels()
        .iter()
        .filter(|p| p.iter().any(|&v| v == 0 || v == 255))
        .count();
    clipped as f64 / img.pixels().len() as f64
}

pub fn contrast_ok(img: &ImageBuffer) -> bool {
    clipped_fraction(img) < CLIP_FRACTION_LIMIT
}

pub fn heuristic_face_detected(img: &ImageBuffer) -> bool {
    let (x0, x1) = (img.width() / 4, img.width() - img.width() / 4);
    let (y0, y1) = (img.height() / 4, img.height() - img.height() / 4);
    let (w, h) = (x1 - x0, y1 - y0);
    if w < 3 || h < 3 {
        return false;
    }
    let lum: Vec<f64> = (y0..y1)
        .flat_map(|y| (x0..x1).map(move |x| (x, y)))
        .map(|(x, y)| luminance(img.get(x, y)))
        .collect();
    let mut row_mean = vec![0.0; h];
    let mut col_mean = vec![0.0; w];
    for y in 0..h {
        for x in 0..w {
            row_mean[y] += lum[y * w + x];
            col_mean[x] += lum[y * w + x];
        }
    }
    row_mean.iter_mut().for_each(|v| *v /= w as f64);
    col_mean.iter_mut().for_each(|v| *v /= h as f64);
    let grand = row_mean.iter().sum::<f64>() / h as f64;
    let residual: Vec<f64> = (0..h * w)
        .map(|i| lum[i] - row_mean[i / w] - col_mean[i % w] + grand)
        .collect();

    let variance = residual.iter().map(|r| r * r).sum::<f64>() / residual.len() as f64;
    if variance < RESIDUAL_VARIANCE_FLOOR {
        return false;
    }
    let mut edges = 0usize;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let gx = (residual[y * w + x + 1] - residual[y * w + x - 1]) / 2.0;
            let gy = (residual[(y + 1) * w + x] - residual[(y - 1) * w + x]) / 2.0;
            if (gx * gx + gy * gy).sqrt() > EDGE_MAGNITUDE {
                edges += 1;
            }
        }
    }
    let density = edges as f64 / ((w - 2) * (h - 2)) as f64;
    density >= EDGE_DENSITY_FLOOR
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn black_image_has_no_face() {
        let r = quality_check(&ImageBuffer::filled(96, 112, [0; 3]));
        assert!(!r.face_detected);
        assert!(!r.contrast_ok);
        assert!(!r.passes);
    }

    #[test]
    fn pure_stripes_are_not_a_face() {
        let img = ImageBuffer::from_fn(
            96,
            112,
            |x, _| if (x / 6) % 2 == 0 { [40; 3] } else { [200; 3] },
        );
        assert!(!heuristic_face_detected(&img));
    }

    #[test]
    fn checker_blobs_are_detected() {
        let img = ImageBuffer::from_fn(96, 112, |x, y| {
            if ((x / 8) + (y / 8)) % 2 == 0 {
                [60, 50, 40]
            } else {
                [190, 170, 150]
            }
        });
        assert!(heuristic_face_detected(&img));
        assert!(contrast_ok(&img));
    }

    #[test]
    fn clipping_fraction() {
        let img = ImageBuffer::from_fn(10, 10, |x, _| if x < 5 { [255, 10, 10] } else { [10; 3] });
        assert!((clipped_fraction(&img) - 0.5).abs() < 1e-12);
        assert!(!contrast_ok(&img));
    }
}
