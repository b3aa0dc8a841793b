use super::Image;
use crate::error::{Error, Result};

pub(crate) fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Encodes as binary PGM (P5) or PPM (P6), maxval 255.
pub fn encode_pnm(img: &Image) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|&v| quantize(v)));
    out
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Result<&str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::InvalidImage("truncated header".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::InvalidImage("non-ASCII header".into()))
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token()?;
        tok.parse()
            .map_err(|_| Error::InvalidImage(format!("bad {what} '{tok}'")))
    }
}

/// Decodes P2/P3 (ASCII) or P5/P6 (binary) images with maxval up to 255.
pub fn decode_pnm(bytes: &[u8]) -> Result<Image> {
    let mut h = Header { bytes, pos: 0 };
    let magic = h.token()?.to_owned();
    let (channels, binary) = match magic.as_str() {
        "P2" => (1, false),
        "P3" => (3, false),
        "P5" => (1, true),
        "P6" => (3, true),
        other => return Err(Error::InvalidImage(format!("unsupported magic '{other}'"))),
    };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::InvalidImage(format!("unsupported maxval {maxval}")));
    }
    let n = width * height * channels;
    let scale = maxval as f64;
    let data: Vec<f64> = if binary {
        // Exactly one whitespace byte separates the header from the raster.
        let start = h.pos + 1;
        let raster = bytes.get(start..start + n).ok_or_else(|| {
            Error::InvalidImage(format!(
                "truncated raster: expected {n} bytes, found {}",
                bytes.len().saturating_sub(start)
            ))
        })?;
        raster.iter().map(|&v| v as f64 / scale).collect()
    } else {
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            let v = h.number("sample")?;
            data.push(v as f64 / scale);
        }
        data
    };
    Image::new(width, height, channels, data)
}
