//! Procedural face-like test cards.
//!
//! Every identity gets its own background, skin tone, hair, facial layout and
//! a textured patch; each sample of an identity re-renders the same card with
//! a small shift, brightness change and pixel noise.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::pairs::PairSet;
use crate::error::{Error, Result};
use crate::image::ImageBuffer;

pub const FIXTURE_WIDTH: usize = 96;
pub const FIXTURE_HEIGHT: usize = 112;
pub const SAMPLES_PER_IDENTITY: usize = 2;
/// Channel values stay inside this range so injection never starts clipped.
pub const FIXTURE_RANGE: (f64, f64) = (10.0, 245.0);

#[derive(Debug, Clone)]
struct Identity {
    background: [f64; 3],
    background_tilt: [f64; 2],
    skin: [f64; 3],
    hair: [f64; 3],
    face_center: [f64; 2],
    face_radius: [f64; 2],
    hairline: f64,
    eye_y: f64,
    eye_gap: f64,
    eye_radius: f64,
    iris: [f64; 3],
    brow_lift: f64,
    brow_slope: f64,
    nose_len: f64,
    mouth_y: f64,
    mouth_half_width: f64,
    lip: [f64; 3],
    texture_freq: f64,
    texture_angle: f64,
    texture_amp: f64,
}

fn color(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> [f64; 3] {
    [
        rng.random_range(lo..hi),
        rng.random_range(lo..hi),
        rng.random_range(lo..hi),
    ]
}

fn identity_rng(seed: u64, identity: usize, stream: u64) -> ChaCha8Rng {
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (identity as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(stream);
    rng
}

impl Identity {
    fn draw(seed: u64, identity: usize) -> Self {
        let rng = &mut identity_rng(seed, identity, 0);
        let tone = rng.random_range(0.0..1.0);
        let skin = [
            120.0 + 105.0 * tone + rng.random_range(-10.0..10.0),
            85.0 + 95.0 * tone + rng.random_range(-10.0..10.0),
            60.0 + 90.0 * tone + rng.random_range(-10.0..10.0),
        ];
        Identity {
            background: color(rng, 35.0, 220.0),
            background_tilt: [rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6)],
            skin,
            hair: color(rng, 20.0, 140.0),
            face_center: [
                48.0 + rng.random_range(-4.0..4.0),
                60.0 + rng.random_range(-4.0..4.0),
            ],
            face_radius: [rng.random_range(26.0..36.0), rng.random_range(36.0..46.0)],
            hairline: rng.random_range(0.25..0.6),
            eye_y: rng.random_range(-0.3..-0.1),
            eye_gap: rng.random_range(10.0..17.0),
            eye_radius: rng.random_range(2.5..4.5),
            iris: color(rng, 15.0, 90.0),
            brow_lift: rng.random_range(4.0..8.0),
            brow_slope: rng.random_range(-0.3..0.3),
            nose_len: rng.random_range(6.0..14.0),
            mouth_y: rng.random_range(0.35..0.55),
            mouth_half_width: rng.random_range(6.0..13.0),
            lip: [
                rng.random_range(120.0..200.0),
                rng.random_range(40.0..90.0),
                rng.random_range(40.0..90.0),
            ],
            texture_freq: rng.random_range(0.15..0.45),
            texture_angle: rng.random_range(0.0..std::f64::consts::PI),
            texture_amp: rng.random_range(6.0..16.0),
        }
    }

    fn render(&self, shift: [f64; 2], brightness: f64, noise: &mut ChaCha8Rng) -> ImageBuffer {
        let (w, h) = (FIXTURE_WIDTH, FIXTURE_HEIGHT);
        let [cx, cy] = [
            self.face_center[0] + shift[0],
            self.face_center[1] + shift[1],
        ];
        let [rx, ry] = self.face_radius;
        let eye_y = cy + self.eye_y * ry;
        let mouth_y = cy + self.mouth_y * ry;
        let (lo, hi) = FIXTURE_RANGE;
        let (dir_x, dir_y) = (self.texture_angle.cos(), self.texture_angle.sin());

        ImageBuffer::from_fn(w, h, |x, y| {
            let (xf, yf) = (x as f64, y as f64);
            let u = (xf - cx) / rx;
            let v = (yf - cy) / ry;
            let r2 = u * u + v * v;

            let tilt =
                self.background_tilt[0] * (xf - 48.0) + self.background_tilt[1] * (yf - 56.0);
            let mut px = self.background.map(|c| c + tilt);

            // hair: a larger ellipse behind the face, visible above the hairline
            let hu = (xf - cx) / (rx * 1.12);
            let hv = (yf - cy + 0.08 * ry) / (ry * 1.1);
            if hu * hu + hv * hv <= 1.0 && (v < -self.hairline || r2 > 1.0) {
                px = self.hair;
            }
            if r2 <= 1.0 && v >= -self.hairline {
                let shade = 1.0 - 0.18 * r2;
                px = self.skin.map(|c| c * shade);
                // cheek texture patch
                let t = (xf - cx) * dir_x + (yf - cy) * dir_y;
                if v > -0.05 && v < 0.35 && u.abs() > 0.25 && u.abs() < 0.8 {
                    let s =
                        self.texture_amp * (t * self.texture_freq * std::f64::consts::TAU).sin();
                    px = px.map(|c| c + s);
                }
                for side in [-1.0, 1.0] {
                    let ex = cx + side * self.eye_gap;
                    let d2 = (xf - ex).powi(2) + (yf - eye_y).powi(2);
                    let er = self.eye_radius;
                    if d2 <= (er * 1.8).powi(2) && (yf - eye_y).abs() <= er * 1.1 {
                        px = [235.0, 232.0, 225.0];
                    }
                    if d2 <= er * er {
                        px = self.iris;
                    }
                    let brow_y = eye_y - self.brow_lift - side * self.brow_slope * (xf - ex);
                    if (xf - ex).abs() <= er * 2.2 && (yf - brow_y).abs() <= 1.2 {
                        px = self.hair.map(|c| c * 0.8);
                    }
                }
                if (xf - cx).abs() <= 1.5 && yf > eye_y + 3.0 && yf < eye_y + 3.0 + self.nose_len {
                    px = self.skin.map(|c| c * 0.7);
                }
                let mu = (xf - cx) / self.mouth_half_width;
                let mv = (yf - mouth_y) / 2.6;
                if mu * mu + mv * mv <= 1.0 {
                    px = self.lip;
                }
            }
            let n = noise.random_range(-3.0..3.0);
            px.map(|c| (c * brightness + n).clamp(lo, hi).round() as u8)
        })
    }
}

/// Sample `sample` of identity `identity`. Pure function of its arguments.
pub fn fixture_image(seed: u64, identity: usize, sample: usize) -> ImageBuffer {
    let id = Identity::draw(seed, identity);
    let rng = &mut identity_rng(seed, identity, 1 + sample as u64);
    let shift = [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
    let brightness = rng.random_range(0.96..1.04);
    id.render(shift, brightness, rng)
}

/// Cell sizes (pixels) and amplitudes of the noise octaves of a texture card.
const TEXTURE_OCTAVES: [(usize, f64); 4] = [(16, 22.0), (8, 14.0), (4, 9.0), (2, 6.0)];

/// A face-free texture card of fixture size: a tinted gray base plus
/// multi-scale value noise, bilinearly interpolated per octave.
pub fn texture_image(seed: u64) -> ImageBuffer {
    let rng = &mut identity_rng(seed, usize::MAX, 0);
    let base = color(rng, 90.0, 170.0);
    let (w, h) = (FIXTURE_WIDTH, FIXTURE_HEIGHT);
    let mut field = vec![0.0; w * h];
    for (cell, amp) in TEXTURE_OCTAVES {
        let (gw, gh) = (w / cell + 2, h / cell + 2);
        let grid: Vec<f64> = (0..gw * gh).map(|_| rng.random_range(-amp..amp)).collect();
        for y in 0..h {
            let (fy, ty) = ((y / cell), (y % cell) as f64 / cell as f64);
            for x in 0..w {
                let (fx, tx) = ((x / cell), (x % cell) as f64 / cell as f64);
                let g = |i: usize, j: usize| grid[j * gw + i];
                let top = g(fx, fy) * (1.0 - tx) + g(fx + 1, fy) * tx;
                let bottom = g(fx, fy + 1) * (1.0 - tx) + g(fx + 1, fy + 1) * tx;
                field[y * w + x] += top * (1.0 - ty) + bottom * ty;
            }
        }
    }
    let (lo, hi) = FIXTURE_RANGE;
    ImageBuffer::from_fn(w, h, |x, y| {
        let n = rng.random_range(-3.0..3.0);
        base.map(|c| (c + field[y * w + x] + n).clamp(lo, hi).round() as u8)
    })
}

/// Relative path of a fixture image inside the output directory.
pub fn fixture_path(identity: usize, sample: usize) -> String {
    format!("id_{identity:03}/sample_{sample}.png")
}

/// Writes `count` identities with two samples each under `dir`, plus
/// `pairs.csv`. Genuine pairs are the two samples of one identity; impostor
/// pairs are sample 0 of identity `i` against sample 1 of identity `j > i`.
pub fn generate_fixture_set(dir: &Path, seed: u64, count: usize) -> Result<PairSet> {
    if count < 2 {
        return Err(Error::invalid("a fixture set needs at least 2 identities"));
    }
    for i in 0..count {
        let sub = dir.join(format!("id_{i:03}"));
        std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        for s in 0..SAMPLES_PER_IDENTITY {
            fixture_image(seed, i, s).write_png(dir.join(fixture_path(i, s)))?;
        }
    }
    let set = fixture_pairs(dir, count, seed);
    set.write_csv(&dir.join("pairs.csv"))?;
    Ok(set)
}

fn fixture_pairs(dir: &Path, count: usize, seed: u64) -> PairSet {
    let p = |i, s| dir.join(fixture_path(i, s));
    PairSet {
        name: format!("fixtures-seed{seed}-n{count}"),
        genuine_pairs: (0..count).map(|i| (p(i, 0), p(i, 1))).collect(),
        impostor_pairs: (0..count)
            .flat_map(|i| (i + 1..count).map(move |j| (i, j)))
            .map(|(i, j)| (p(i, 0), p(j, 1)))
            .collect(),
    }
}

/// Fixture images held in memory, identity-major: image `2 * i + s` is
/// sample `s` of identity `i`. Pairs use the same layout as
/// [`generate_fixture_set`].
pub fn fixture_dataset(seed: u64, count: usize) -> Result<super::Dataset> {
    if count < 2 {
        return Err(Error::invalid("a fixture set needs at least 2 identities"));
    }
    let mut images = Vec::with_capacity(count * SAMPLES_PER_IDENTITY);
    let mut labels = Vec::with_capacity(count * SAMPLES_PER_IDENTITY);
    for i in 0..count {
        for s in 0..SAMPLES_PER_IDENTITY {
            images.push(fixture_image(seed, i, s));
            labels.push(fixture_path(i, s));
        }
    }
    Ok(super::Dataset {
        labels,
        images,
        genuine: (0..count).map(|i| (2 * i, 2 * i + 1)).collect(),
        impostor: (0..count)
            .flat_map(|i| (i + 1..count).map(move |j| (2 * i, 2 * j + 1)))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{heuristic_face_detected, quality_check};

    #[test]
    fn deterministic_and_distinct() {
        assert_eq!(fixture_image(3, 4, 0), fixture_image(3, 4, 0));
        assert_ne!(fixture_image(3, 4, 0), fixture_image(3, 4, 1));
        assert_ne!(fixture_image(3, 4, 0), fixture_image(3, 5, 0));
        assert_ne!(fixture_image(3, 4, 0), fixture_image(4, 4, 0));
    }

    #[test]
    fn within_range_and_detected() {
        for i in 0..20 {
            for s in 0..2 {
                let img = fixture_image(11, i, s);
                assert!(img
                    .pixels()
                    .iter()
                    .flatten()
                    .all(|&v| (10..=245).contains(&v)));
                assert!(heuristic_face_detected(&img), "identity {i} sample {s}");
                assert!(quality_check(&img).passes);
            }
        }
    }

    #[test]
    fn pair_counts() {
        let d = fixture_dataset(1, 6).unwrap();
        assert_eq!(d.genuine.len(), 6);
        assert_eq!(d.impostor.len(), 15);
        assert!(fixture_dataset(1, 1).is_err());
    }
}
