//! 8-bit RGB raster and the PNG files it is exchanged through.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};

/// Rec. 601 luma weights.
pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

pub fn luminance(px: [u8; 3]) -> f64 {
    LUMA[0] * px[0] as f64 + LUMA[1] * px[1] as f64 + LUMA[2] * px[2] as f64
}

/// Row-major RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if pixels.len() != width * height {
            return Err(Error::invalid(format!(
                "{}x{} image needs {} pixels, got {}",
                width,
                height,
                width * height,
                pixels.len()
            )));
        }
        Ok(ImageBuffer {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, px: [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        ImageBuffer {
            width,
            height,
            pixels: vec![px; width * height],
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        ImageBuffer {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [[u8; 3]] {
        &mut self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, px: [u8; 3]) {
        self.pixels[y * self.width + x] = px;
    }

    pub fn mean_luminance(&self) -> f64 {
        self.pixels.iter().map(|&p| luminance(p)).sum::<f64>() / self.pixels.len() as f64
    }

    /// Quarter turn clockwise.
    pub fn rotate90(&self) -> ImageBuffer {
        let (w, h) = (self.width, self.height);
        ImageBuffer::from_fn(h, w, |x, y| self.get(y, h - 1 - x))
    }

    pub fn transpose(&self) -> ImageBuffer {
        ImageBuffer::from_fn(self.height, self.width, |x, y| self.get(y, x))
    }

    pub fn read_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let (info, buf) = decode_png(path, file)?;
        let (w, h) = (info.width as usize, info.height as usize);
        let pixels = match info.color_type {
            png::ColorType::Rgb => buf.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
            png::ColorType::Rgba => buf.chunks_exact(4).map(|c| [c[0], c[1], c[2]]).collect(),
            png::ColorType::Grayscale => buf.iter().map(|&v| [v; 3]).collect(),
            png::ColorType::GrayscaleAlpha => buf.chunks_exact(2).map(|c| [c[0]; 3]).collect(),
            png::ColorType::Indexed => {
                return Err(Error::PngDecode {
                    path: path.into(),
                    message: "palette was not expanded".into(),
                })
            }
        };
        ImageBuffer::new(w, h, pixels)
    }

    /// Writes 8-bit RGB without alpha.
    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let data: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        encode_png(file, self.width, self.height, png::ColorType::Rgb, &data)
    }
}

/// Binary foreground mask; `true` marks foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid("mask data does not match its dimensions"));
        }
        Ok(Mask {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Mask {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    /// Single-channel PNG: 0 is background, 255 foreground (values above 127 count as foreground).
    pub fn read_png(path: impl AsRef<Path>) -> Result<Self> {
        let img = ImageBuffer::read_png(path)?;
        let data = img.pixels().iter().map(|p| luminance(*p) > 127.5).collect();
        Mask::new(img.width(), img.height(), data)
    }

    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let data: Vec<u8> = self.data.iter().map(|&b| if b { 255 } else { 0 }).collect();
        encode_png(
            file,
            self.width,
            self.height,
            png::ColorType::Grayscale,
            &data,
        )
    }
}

fn decode_png(path: &Path, file: File) -> Result<(png::OutputInfo, Vec<u8>)> {
    let err = |e: png::DecodingError| Error::PngDecode {
        path: path.into(),
        message: e.to_string(),
    };
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder.read_info().map_err(err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::PngDecode {
            path: path.into(),
            message: "image too large".into(),
        })?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(err)?;
    buf.truncate(info.buffer_size());
    Ok((info, buf))
}

fn encode_png(
    file: File,
    width: usize,
    height: usize,
    color: png::ColorType,
    data: &[u8],
) -> Result<()> {
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::PngEncode(e.to_string()))?;
    writer
        .write_image_data(data)
        .map_err(|e| Error::PngEncode(e.to_string()))?;
    writer.finish().map_err(|e| Error::PngEncode(e.to_string()))
}
