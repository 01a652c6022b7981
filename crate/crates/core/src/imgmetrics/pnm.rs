//! Binary Netpbm: P5 (gray) and P6 (RGB), 8-bit, maxval 255.

use super::Image;
use crate::error::{Error, Result};

fn perr(msg: impl Into<String>) -> Error {
    Error::Parse { line: None, msg: msg.into() }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(perr(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("digits are ascii")
            .parse()
            .map_err(|_| perr(format!("{what} out of range")))
    }
}

/// Decodes a P5/P6 image, scaling bytes by 1/255.
///
/// Exactly one whitespace byte separates maxval from the raster.
pub fn decode_pnm(bytes: &[u8]) -> Result<Image> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(perr("not a binary PGM/PPM (expected P5 or P6)")),
    };
    let mut h = Header { bytes, pos: 2 };
    if !h.bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(perr("malformed magic number"));
    }
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if maxval != 255 {
        return Err(perr(format!("unsupported maxval {maxval}; only 255 is accepted")));
    }
    if !h.bytes.get(h.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(perr("expected a single whitespace after maxval"));
    }
    let raster = &bytes[h.pos + 1..];
    let n = width
        .checked_mul(height)
        .and_then(|p| p.checked_mul(channels))
        .ok_or_else(|| perr("image dimensions overflow"))?;
    if raster.len() < n {
        return Err(perr(format!("truncated raster: expected {n} bytes, found {}", raster.len())));
    }
    if raster.len() > n {
        return Err(perr(format!("{} trailing bytes after raster", raster.len() - n)));
    }
    Image::new(width, height, channels, raster.iter().map(|&b| f64::from(b) / 255.0).collect())
}

/// Encodes with rounding to the nearest 8-bit level.
pub fn encode_pnm(img: &Image) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|v| (v * 255.0).round() as u8));
    out
}
