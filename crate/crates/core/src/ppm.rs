//! Binary PPM (P6, maxval 255) reading and writing.
//!
//! The header is `P6`, width, height and maxval separated by whitespace, with
//! `#` comments allowed between tokens, followed by exactly one whitespace
//! byte and `width * height * 3` bytes of RGB data. Written files always use
//! the canonical `P6\n<w> <h>\n255\n` header.

use std::io::Write;

use crate::error::BundleError;

/// 8-bit RGB raster, row-major, 3 bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        RgbImage {
            width,
            height,
            data: vec![0; width * height * 3],
        }
    }

    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&color);
        }
        RgbImage {
            width,
            height,
            data,
        }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Option<Self> {
        (data.len() == width * height * 3).then_some(RgbImage {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn put(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() + 32);
        write!(out, "P6\n{} {}\n255\n", self.width, self.height).expect("write to Vec");
        out.extend_from_slice(&self.data);
        out
    }

    /// Decodes a P6 image; `file` is used only for error messages.
    pub fn decode(bytes: &[u8], file: &str) -> Result<Self, BundleError> {
        let mut cursor = HeaderCursor {
            bytes,
            pos: 0,
            line: 1,
            file,
        };
        let magic = cursor.token()?;
        if magic != b"P6" {
            return Err(BundleError::parse(
                file,
                1,
                "expected binary PPM magic `P6`",
            ));
        }
        let width = cursor.number("width")?;
        let height = cursor.number("height")?;
        let maxval = cursor.number("maxval")?;
        if maxval != 255 {
            return Err(BundleError::parse(
                file,
                cursor.line,
                format!("unsupported maxval {maxval}, expected 255"),
            ));
        }
        if width == 0 || height == 0 {
            return Err(BundleError::parse(
                file,
                cursor.line,
                "image dimensions must be positive",
            ));
        }
        // single whitespace byte separates header and raster
        match bytes.get(cursor.pos) {
            Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
            _ => {
                return Err(BundleError::parse(
                    file,
                    cursor.line,
                    "missing whitespace after maxval",
                ))
            }
        }
        let expected = width * height * 3;
        let raster = &bytes[cursor.pos..];
        if raster.len() != expected {
            return Err(BundleError::parse(
                file,
                cursor.line,
                format!("expected {expected} raster bytes, found {}", raster.len()),
            ));
        }
        Ok(RgbImage {
            width,
            height,
            data: raster.to_vec(),
        })
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    file: &'a str,
}

impl<'a> HeaderCursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    if c == b'\n' {
                        break;
                    }
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                if b == b'\n' {
                    self.line += 1;
                }
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8], BundleError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(BundleError::parse(
                self.file,
                self.line,
                "truncated PPM header",
            ));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize, BundleError> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                BundleError::parse(
                    self.file,
                    self.line,
                    format!("invalid {what} in PPM header"),
                )
            })
    }
}
