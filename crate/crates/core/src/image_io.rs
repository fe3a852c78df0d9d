//! Grayscale image I/O: binary PGM (P5, 8 or 16 bit), PNG, and WPCF planes.
//!
//! All readers return samples scaled to `[0, 1]`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::wpcf;

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

fn pgm_err(reason: impl Into<String>) -> Error {
    Error::Format {
        format: "PGM",
        reason: reason.into(),
    }
}

/// Writes a 16-bit P5 image; values are clamped to `[0, 1]` and rounded.
pub fn encode_pgm16(width: usize, height: usize, values: &[f64]) -> Result<Vec<u8>> {
    encode_pgm(width, height, values, 65535)
}

pub fn encode_pgm8(width: usize, height: usize, values: &[f64]) -> Result<Vec<u8>> {
    encode_pgm(width, height, values, 255)
}

fn encode_pgm(width: usize, height: usize, values: &[f64], maxval: u16) -> Result<Vec<u8>> {
    if values.len() != width * height {
        return Err(pgm_err(format!("{} samples for {width}x{height}", values.len())));
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let mut out = format!("P5\n{width} {height}\n{maxval}\n").into_bytes();
    for &v in values {
        let q = (v.clamp(0.0, 1.0) * maxval as f64).round() as u16;
        if maxval > 255 {
            out.extend_from_slice(&q.to_be_bytes());
        } else {
            out.push(q as u8);
        }
    }
    Ok(out)
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(pgm_err("missing P5 magic"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(pgm_err("truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| pgm_err("bad header number"))?;
    }
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(pgm_err("header not terminated"));
    }
    pos += 1;
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(pgm_err(format!("bad header {width}x{height} max {maxval}")));
    }
    let depth = if maxval > 255 { 2 } else { 1 };
    let body = &bytes[pos..];
    if body.len() < width * height * depth {
        return Err(pgm_err("truncated raster"));
    }
    let values = (0..width * height)
        .map(|i| {
            let raw = if depth == 2 {
                u16::from_be_bytes([body[2 * i], body[2 * i + 1]]) as f64
            } else {
                body[i] as f64
            };
            (raw / maxval as f64).min(1.0)
        })
        .collect();
    Ok(GrayImage {
        width,
        height,
        values,
    })
}

pub fn save_pgm16(path: impl AsRef<Path>, width: usize, height: usize, values: &[f64]) -> Result<()> {
    let bytes = encode_pgm16(width, height, values)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn save_pgm8(path: impl AsRef<Path>, width: usize, height: usize, values: &[f64]) -> Result<()> {
    let bytes = encode_pgm8(width, height, values)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

/// Loads `.pgm`, `.png` or `.wpcf` by extension. WPCF planes must be real;
/// their real parts are used as is.
pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("pgm") => decode_pgm(&fs::read(path)?),
        Some("png") => {
            let img = image::open(path)?.into_luma16();
            let (w, h) = img.dimensions();
            Ok(GrayImage {
                width: w as usize,
                height: h as usize,
                values: img.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
            })
        }
        Some("wpcf") => {
            let (field, _) = wpcf::load_field(path)?;
            real_plane(&field)
        }
        _ => Err(Error::Format {
            format: "image",
            reason: format!("unsupported file type: {}", path.display()),
        }),
    }
}

/// Real parts of a field whose imaginary parts are exactly zero.
pub fn real_plane(field: &crate::field::ComplexField) -> Result<GrayImage> {
    if let Some(index) = field.data().iter().position(|c| c.im != 0.0) {
        return Err(Error::Format {
            format: "WPCF",
            reason: format!("sample {index} has a nonzero imaginary part"),
        });
    }
    Ok(GrayImage {
        width: field.width(),
        height: field.height(),
        values: field.data().iter().map(|c| c.re).collect(),
    })
}
