//! `WPCF` binary field files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic    4 bytes  "WPCF"
//! version  u16      1 = single field, 2 = multi-plane stack
//! width    u32
//! height   u32
//! pitch    f64      meters per pixel
//! lambda   f64      wavelength in meters, 0 when unset
//! channels u32      version 2 only
//! samples  channels * height * width interleaved (re, im) f64, row-major per plane
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{ComplexField, C64};

pub const MAGIC: &[u8; 4] = b"WPCF";
pub const VERSION_FIELD: u16 = 1;
pub const VERSION_STACK: u16 = 2;

/// Arbitrary cap on any one dimension, guards against garbage headers.
const MAX_DIM: u32 = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Stack {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub pitch: f64,
    pub wavelength: Option<f64>,
    /// `channels * height * width` samples, plane-major.
    pub data: Vec<C64>,
}

impl Stack {
    pub fn from_field(field: &ComplexField, wavelength: Option<f64>) -> Self {
        Self {
            width: field.width(),
            height: field.height(),
            channels: 1,
            pitch: field.pitch(),
            wavelength,
            data: field.data().to_vec(),
        }
    }

    pub fn plane(&self, c: usize) -> Result<ComplexField> {
        let n = self.width * self.height;
        ComplexField::new(
            self.width,
            self.height,
            self.pitch,
            self.data[c * n..(c + 1) * n].to_vec(),
        )
    }
}

fn format_err(reason: impl Into<String>) -> Error {
    Error::Format {
        format: "WPCF",
        reason: reason.into(),
    }
}

pub fn write_stack<W: Write>(mut w: W, stack: &Stack, version: u16) -> Result<()> {
    if version == VERSION_FIELD && stack.channels != 1 {
        return Err(format_err("version 1 files hold exactly one plane"));
    }
    if version != VERSION_FIELD && version != VERSION_STACK {
        return Err(format_err(format!("unknown version {version}")));
    }
    let expected = stack.channels * stack.width * stack.height;
    if stack.data.len() != expected {
        return Err(format_err(format!(
            "{} samples for a {}x{}x{} stack",
            stack.data.len(),
            stack.channels,
            stack.height,
            stack.width
        )));
    }
    w.write_all(MAGIC)?;
    w.write_all(&version.to_le_bytes())?;
    w.write_all(&(stack.width as u32).to_le_bytes())?;
    w.write_all(&(stack.height as u32).to_le_bytes())?;
    w.write_all(&stack.pitch.to_le_bytes())?;
    w.write_all(&stack.wavelength.unwrap_or(0.0).to_le_bytes())?;
    if version == VERSION_STACK {
        w.write_all(&(stack.channels as u32).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(stack.data.len() * 16);
    for c in &stack.data {
        buf.extend_from_slice(&c.re.to_le_bytes());
        buf.extend_from_slice(&c.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_stack<R: Read>(mut r: R) -> Result<Stack> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(format_err("bad magic"));
    }
    let version = read_u16(&mut r)?;
    if version != VERSION_FIELD && version != VERSION_STACK {
        return Err(format_err(format!("unsupported version {version}")));
    }
    let width = read_u32(&mut r)?;
    let height = read_u32(&mut r)?;
    if width == 0 || height == 0 || width > MAX_DIM || height > MAX_DIM {
        return Err(format_err(format!("implausible shape {width}x{height}")));
    }
    let pitch = read_f64(&mut r)?;
    if !(pitch.is_finite() && pitch > 0.0) {
        return Err(format_err(format!("pitch {pitch} is not positive")));
    }
    let wavelength = read_f64(&mut r)?;
    let channels = if version == VERSION_STACK {
        read_u32(&mut r)?
    } else {
        1
    };
    if channels == 0 || channels > 4096 {
        return Err(format_err(format!("implausible channel count {channels}")));
    }
    let count = channels as usize * width as usize * height as usize;
    let mut bytes = vec![0u8; count * 16];
    r.read_exact(&mut bytes)?;
    let data = bytes
        .chunks_exact(16)
        .map(|c| {
            C64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect::<Vec<_>>();
    if let Some(index) = data.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(Error::NonFinite { index });
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(format_err("trailing bytes after samples"));
    }
    Ok(Stack {
        width: width as usize,
        height: height as usize,
        channels: channels as usize,
        pitch,
        wavelength: (wavelength > 0.0).then_some(wavelength),
        data,
    })
}

pub fn write_field<W: Write>(w: W, field: &ComplexField, wavelength: Option<f64>) -> Result<()> {
    write_stack(w, &Stack::from_field(field, wavelength), VERSION_FIELD)
}

/// Reads a single field; version-2 stacks are accepted when they hold one plane.
pub fn read_field<R: Read>(r: R) -> Result<(ComplexField, Option<f64>)> {
    let stack = read_stack(r)?;
    if stack.channels != 1 {
        return Err(format_err(format!(
            "expected a single plane, found {} channels",
            stack.channels
        )));
    }
    Ok((stack.plane(0)?, stack.wavelength))
}

pub fn save_field(path: impl AsRef<Path>, field: &ComplexField, wavelength: Option<f64>) -> Result<()> {
    write_field(BufWriter::new(File::create(path)?), field, wavelength)
}

pub fn load_field(path: impl AsRef<Path>) -> Result<(ComplexField, Option<f64>)> {
    read_field(BufReader::new(File::open(path)?))
}

pub fn save_stack(path: impl AsRef<Path>, stack: &Stack) -> Result<()> {
    write_stack(BufWriter::new(File::create(path)?), stack, VERSION_STACK)
}

pub fn load_stack(path: impl AsRef<Path>) -> Result<Stack> {
    read_stack(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_is_bit_exact() {
        let f = ComplexField::new(2, 1, 0.5, vec![C64::new(1.0, -2.0), C64::new(0.0, 3.5)]).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &f, Some(633e-9)).unwrap();
        assert_eq!(&buf[..4], b"WPCF");
        assert_eq!(&buf[4..6], &1u16.to_le_bytes());
        assert_eq!(&buf[6..10], &2u32.to_le_bytes());
        assert_eq!(&buf[10..14], &1u32.to_le_bytes());
        assert_eq!(&buf[14..22], &0.5f64.to_le_bytes());
        assert_eq!(&buf[22..30], &633e-9f64.to_le_bytes());
        assert_eq!(&buf[30..38], &1.0f64.to_le_bytes());
        assert_eq!(&buf[38..46], &(-2.0f64).to_le_bytes());
        assert_eq!(buf.len(), 30 + 2 * 16);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let f = ComplexField::zeros(3, 3, 1.0).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &f, None).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_field(&bad[..]).is_err());
        assert!(read_field(&buf[..buf.len() - 1]).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(read_field(&long[..]).is_err());
    }

    #[test]
    fn stack_needs_version_two() {
        let stack = Stack {
            width: 2,
            height: 2,
            channels: 3,
            pitch: 1.0,
            wavelength: None,
            data: vec![C64::new(0.0, 0.0); 12],
        };
        assert!(write_stack(Vec::new(), &stack, VERSION_FIELD).is_err());
        let mut buf = Vec::new();
        write_stack(&mut buf, &stack, VERSION_STACK).unwrap();
        assert_eq!(read_stack(&buf[..]).unwrap(), stack);
        assert!(read_field(&buf[..]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(w in 1usize..6, h in 1usize..6, c in 1usize..4,
                      pitch in 1e-7f64..1.0, seed in any::<u32>()) {
            let data = (0..w * h * c)
                .map(|i| C64::new((i as f64 + seed as f64).sin(), (i as f64 * 0.7).cos()))
                .collect();
            let stack = Stack { width: w, height: h, channels: c, pitch, wavelength: Some(5e-7), data };
            let mut buf = Vec::new();
            write_stack(&mut buf, &stack, VERSION_STACK).unwrap();
            prop_assert_eq!(read_stack(&buf[..]).unwrap(), stack);
        }
    }
}
