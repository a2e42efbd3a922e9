//! Binary PGM (P5) reading and writing, 8- and 16-bit.
//!
//! 16-bit samples are big-endian as required by the netpbm format.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Raw grayscale raster as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage16 {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub data: Vec<u16>,
}

impl GrayImage16 {
    /// Samples scaled to [0,1] by `maxval`.
    pub fn to_unit(&self) -> Vec<f64> {
        let m = f64::from(self.maxval);
        self.data.iter().map(|&v| f64::from(v) / m).collect()
    }
}

pub fn read_pgm(path: &Path) -> Result<GrayImage16> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes).map_err(|reason| Error::Decode {
        path: path.to_path_buf(),
        reason,
    })
}

pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<GrayImage16, String> {
    let mut pos = 0usize;
    let magic = next_token(bytes, &mut pos).ok_or("missing magic number")?;
    if magic != b"P5" {
        return Err(format!(
            "expected binary PGM magic 'P5', found '{}'",
            String::from_utf8_lossy(magic)
        ));
    }
    let mut header = [0usize; 3];
    for (slot, name) in header.iter_mut().zip(["width", "height", "maxval"]) {
        let tok = next_token(bytes, &mut pos).ok_or_else(|| format!("missing {name}"))?;
        *slot = std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("bad {name} '{}'", String::from_utf8_lossy(tok)))?;
    }
    let [width, height, maxval] = header;
    if width == 0 || height == 0 {
        return Err(format!("zero-area image {width}x{height}"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format!("maxval {maxval} out of range 1..=65535"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let n = width * height;
    let sample_bytes = if maxval > 255 { 2 } else { 1 };
    let raster = bytes
        .get(pos..pos + n * sample_bytes)
        .ok_or_else(|| format!("truncated raster: need {} bytes", n * sample_bytes))?;
    let data: Vec<u16> = if sample_bytes == 2 {
        raster
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    } else {
        raster.iter().map(|&b| u16::from(b)).collect()
    };
    if let Some(v) = data.iter().find(|&&v| usize::from(v) > maxval) {
        return Err(format!("sample {v} exceeds maxval {maxval}"));
    }
    Ok(GrayImage16 {
        width,
        height,
        maxval: maxval as u16,
        data,
    })
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| &bytes[start..*pos])
}

pub fn encode_pgm16(width: usize, height: usize, data: &[u16]) -> Vec<u8> {
    assert_eq!(data.len(), width * height, "raster size mismatch");
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    out.reserve(data.len() * 2);
    for v in data {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

pub fn write_pgm16(path: &Path, width: usize, height: usize, data: &[u16]) -> Result<()> {
    let bytes = encode_pgm16(width, height, data);
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

/// Quantizes values in [0,1] to the full 16-bit range (round to nearest).
pub fn quantize_unit(values: &[f64]) -> Vec<u16> {
    values
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16)
        .collect()
}
