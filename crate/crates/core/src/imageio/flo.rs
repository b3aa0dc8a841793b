use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::FlowField;
use crate::error::{Error, Result};

/// Sanity value opening every `.flo` file (bytes `PIEH`).
pub const FLO_MAGIC: f32 = 202021.25;

/// Middlebury layout: magic, i32 width, i32 height, then interleaved f32
/// `(u, v)` in row-major order, all little-endian.
pub fn encode_flo(flow: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * flow.len());
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(flow.width as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height as i32).to_le_bytes());
    for (u, v) in flow.u.iter().zip(&flow.v) {
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decodes a `.flo` buffer. Every pixel comes back valid with score 0.
pub fn decode_flo(bytes: &[u8]) -> Result<FlowField> {
    let word = |i: usize| -> Result<[u8; 4]> {
        bytes
            .get(4 * i..4 * i + 4)
            .map(|s| s.try_into().expect("4 bytes"))
            .ok_or_else(|| Error::InvalidArgument(format!("flo truncated at word {i}")))
    };
    let magic = f32::from_le_bytes(word(0)?);
    if magic != FLO_MAGIC {
        return Err(Error::InvalidArgument(format!("bad flo magic {magic}")));
    }
    let width = i32::from_le_bytes(word(1)?);
    let height = i32::from_le_bytes(word(2)?);
    if width <= 0 || height <= 0 {
        return Err(Error::InvalidArgument(format!(
            "bad flo dimensions {width}x{height}"
        )));
    }
    let (width, height) = (width as usize, height as usize);
    let expected = 12 + 8 * width * height;
    if bytes.len() != expected {
        return Err(Error::InvalidArgument(format!(
            "flo payload is {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    let mut flow = FlowField::constant(width, height, 0.0, 0.0);
    for i in 0..width * height {
        flow.u[i] = f32::from_le_bytes(word(3 + 2 * i)?);
        flow.v[i] = f32::from_le_bytes(word(4 + 2 * i)?);
    }
    Ok(flow)
}

/// Sidecar path holding validity and scores: `<path>.meta`.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Writes the `.flo` file and, unless every pixel is valid with score 0, a
/// `valid,score` CSV sidecar with one row per pixel.
pub fn write_flo(flow: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    flow.check()?;
    std::fs::write(path, encode_flo(flow)).map_err(|e| Error::io(path, e))?;
    let meta = meta_path(path);
    let trivial = flow.valid.iter().all(|&v| v) && flow.score.iter().all(|&s| s == 0.0);
    if trivial {
        if meta.exists() {
            std::fs::remove_file(&meta).map_err(|e| Error::io(&meta, e))?;
        }
        return Ok(());
    }
    let mut text = String::with_capacity(16 * flow.len());
    text.push_str("valid,score\n");
    for (valid, score) in flow.valid.iter().zip(&flow.score) {
        writeln!(text, "{},{}", u8::from(*valid), score).expect("write to string");
    }
    std::fs::write(&meta, text).map_err(|e| Error::io(&meta, e))
}

/// Reads a `.flo` file plus its sidecar when present.
pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut flow = decode_flo(&bytes).map_err(|e| Error::io(path, e))?;
    let meta = meta_path(path);
    if !meta.exists() {
        return Ok(flow);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(&meta)
        .map_err(|e| Error::io(&meta, e))?;
    let mut n = 0;
    for record in reader.records() {
        let record = record.map_err(|e| Error::io(&meta, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if n >= flow.len() || record.len() != 2 {
            return Err(Error::parse(&meta, line, "unexpected row"));
        }
        flow.valid[n] = match &record[0] {
            "0" => false,
            "1" => true,
            other => return Err(Error::parse(&meta, line, format!("bad flag '{other}'"))),
        };
        flow.score[n] = record[1]
            .parse()
            .map_err(|_| Error::parse(&meta, line, format!("bad score '{}'", &record[1])))?;
        n += 1;
    }
    if n != flow.len() {
        return Err(Error::parse(
            &meta,
            n as u64 + 1,
            format!("expected {} rows, found {n}", flow.len()),
        ));
    }
    Ok(flow)
}
