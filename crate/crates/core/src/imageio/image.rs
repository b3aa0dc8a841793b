use std::path::Path;

use crate::error::{Error, Result};

/// Row-major image with 1 (luma) or 3 (RGB) channels, intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("empty image {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!(
                "expected 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidImage(format!(
                "{width}x{height}x{channels} image needs {} values, got {}",
                width * height * channels,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidImage("non-finite intensity".into()));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Single-channel image from a function of pixel coordinates.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, 1, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Luma at a pixel: the value itself, or `0.299 R + 0.587 G + 0.114 B`.
    pub fn luma_at(&self, x: usize, y: usize) -> f64 {
        let i = (y * self.width + x) * self.channels;
        if self.channels == 1 {
            self.data[i]
        } else {
            0.299 * self.data[i] + 0.587 * self.data[i + 1] + 0.114 * self.data[i + 2]
        }
    }

    /// Single-channel luma version of this image.
    pub fn to_luma(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let data = (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .map(|(x, y)| self.luma_at(x, y))
            .collect();
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Bilinear sample of channel `c`; coordinates outside the image clamp to
    /// the border. Exact at integer coordinates.
    pub fn sample(&self, x: f64, y: f64, c: usize) -> f64 {
        let xc = x.clamp(0.0, (self.width - 1) as f64);
        let yc = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = xc.floor() as usize;
        let y0 = yc.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = xc - x0 as f64;
        let fy = yc - y0 as f64;
        let top = self.get(x0, y0, c) * (1.0 - fx) + self.get(x1, y0, c) * fx;
        let bottom = self.get(x0, y1, c) * (1.0 - fx) + self.get(x1, y1, c) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Bilinear sample of every channel.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Vec<f64> {
        (0..self.channels).map(|c| self.sample(x, y, c)).collect()
    }

    /// Copy translated by an integer offset; pixels shifted in from outside
    /// take `fill`.
    pub fn shifted(&self, dx: isize, dy: isize, fill: f64) -> Image {
        let mut out = vec![fill; self.data.len()];
        for y in 0..self.height {
            let sy = y as isize - dy;
            if sy < 0 || sy >= self.height as isize {
                continue;
            }
            for x in 0..self.width {
                let sx = x as isize - dx;
                if sx < 0 || sx >= self.width as isize {
                    continue;
                }
                for c in 0..self.channels {
                    out[(y * self.width + x) * self.channels + c] =
                        self.get(sx as usize, sy as usize, c);
                }
            }
        }
        Image {
            data: out,
            ..self.clone()
        }
    }
}

/// Loads a PGM/PPM image (P2, P3, P5, P6). PNG is accepted when the crate is
/// built with the `png` feature.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"\x89PNG") {
        return load_png(path, &bytes);
    }
    super::pnm::decode_pnm(&bytes).map_err(|e| Error::io(path, e))
}

/// Writes a PGM (1 channel) or PPM (3 channels), or a PNG when the path ends
/// in `.png` and the `png` feature is enabled.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
        return save_png(img, path);
    }
    std::fs::write(path, super::pnm::encode_pnm(img)).map_err(|e| Error::io(path, e))
}

#[cfg(feature = "png")]
fn load_png(path: &Path, bytes: &[u8]) -> Result<Image> {
    let decoded = image::load_from_memory(bytes).map_err(|e| Error::io(path, e))?;
    let rgb = decoded.to_rgb8();
    let (w, h) = rgb.dimensions();
    let data = rgb.as_raw().iter().map(|&v| v as f64 / 255.0).collect();
    Image::new(w as usize, h as usize, 3, data)
}

#[cfg(not(feature = "png"))]
fn load_png(path: &Path, _bytes: &[u8]) -> Result<Image> {
    Err(Error::io(path, "PNG support requires the `png` feature"))
}

#[cfg(feature = "png")]
fn save_png(img: &Image, path: &Path) -> Result<()> {
    let raw: Vec<u8> = img.data().iter().map(|&v| super::pnm::quantize(v)).collect();
    let color = if img.channels() == 1 {
        image::ColorType::L8
    } else {
        image::ColorType::Rgb8
    };
    image::save_buffer(path, &raw, img.width() as u32, img.height() as u32, color)
        .map_err(|e| Error::io(path, e))
}

#[cfg(not(feature = "png"))]
fn save_png(_img: &Image, path: &Path) -> Result<()> {
    Err(Error::io(path, "PNG support requires the `png` feature"))
}
