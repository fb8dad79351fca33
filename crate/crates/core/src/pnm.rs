//! 8-bit portable graymap I/O (P2 ASCII and P5 binary, maxval 255).
//!
//! Pixels are held as reals in memory. Writing clamps to `[0, 255]` and rounds
//! half away from zero, so an 8-bit image survives a round trip bit-exactly.

use std::fs;
use std::path::Path;

use crate::error::{PnmError, Result};
use crate::grid::Image;

pub const MAXVAL: u32 = 255;

/// Graymap encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Encoding {
    /// `P2`
    Ascii,
    /// `P5`
    #[default]
    Binary,
}

/// Clamp to `[0, 255]` and round half away from zero. NaN maps to 0.
pub fn quantize(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    v.clamp(0.0, 255.0).round() as u8
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
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

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn header_number(&mut self, what: &str) -> Result<u32, PnmError> {
        let tok = self
            .token()
            .ok_or_else(|| PnmError::MalformedHeader(format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                PnmError::MalformedHeader(format!("bad {what} `{}`", String::from_utf8_lossy(tok)))
            })
    }
}

/// Decode a P2 or P5 graymap.
pub fn decode(bytes: &[u8]) -> Result<Image, PnmError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let encoding = match cur.token() {
        Some(b"P2") => Encoding::Ascii,
        Some(b"P5") => Encoding::Binary,
        Some(other) => {
            return Err(PnmError::MalformedHeader(format!(
                "unsupported magic `{}`",
                String::from_utf8_lossy(other)
            )))
        }
        None => return Err(PnmError::MalformedHeader("empty input".into())),
    };
    let cols = cur.header_number("width")? as usize;
    let rows = cur.header_number("height")? as usize;
    if rows < 2 || cols < 2 {
        return Err(PnmError::MalformedHeader(format!("{cols}x{rows} is below the 2x2 minimum")));
    }
    let maxval = cur.header_number("maxval")?;
    if maxval != MAXVAL {
        return Err(PnmError::UnsupportedMaxval(maxval));
    }
    let expected = rows * cols;
    let data: Vec<f64> = match encoding {
        Encoding::Binary => {
            // exactly one whitespace byte separates the header from the raster
            match bytes.get(cur.pos) {
                Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
                _ => return Err(PnmError::Truncated { expected, found: 0 }),
            }
            let raster = &bytes[cur.pos..];
            if raster.len() < expected {
                return Err(PnmError::Truncated { expected, found: raster.len() });
            }
            raster[..expected].iter().map(|&b| f64::from(b)).collect()
        }
        Encoding::Ascii => {
            let mut out = Vec::with_capacity(expected);
            while out.len() < expected {
                let Some(tok) = cur.token() else {
                    return Err(PnmError::Truncated { expected, found: out.len() });
                };
                let v: u32 = std::str::from_utf8(tok)
                    .ok()
                    .and_then(|s| s.parse().ok())
                    .filter(|&v| v <= MAXVAL)
                    .ok_or_else(|| {
                        PnmError::MalformedHeader(format!(
                            "bad sample `{}` at index {}",
                            String::from_utf8_lossy(tok),
                            out.len()
                        ))
                    })?;
                out.push(f64::from(v));
            }
            out
        }
    };
    Ok(Image::from_raw(rows, cols, data))
}

/// Encode an image as an 8-bit graymap.
pub fn encode(image: &Image, encoding: Encoding) -> Vec<u8> {
    let (rows, cols) = image.shape();
    let magic = match encoding {
        Encoding::Ascii => "P2",
        Encoding::Binary => "P5",
    };
    let mut out = format!("{magic}\n{cols} {rows}\n{MAXVAL}\n").into_bytes();
    match encoding {
        Encoding::Binary => out.extend(image.as_slice().iter().map(|&v| quantize(v))),
        Encoding::Ascii => {
            for row in image.as_slice().chunks(cols) {
                let line: Vec<String> = row.iter().map(|&v| quantize(v).to_string()).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
    }
    out
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    Ok(decode(&fs::read(path)?)?)
}

pub fn write_image(path: impl AsRef<Path>, image: &Image, encoding: Encoding) -> Result<()> {
    fs::write(path, encode(image, encoding))?;
    Ok(())
}
