//! 8-bit grayscale raster and a bit-exact binary PGM (P5) reader/writer.

use crate::error::{Error, Result};

/// Row-major 8-bit grayscale image.
#[derive(Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GrayImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width.checked_mul(height) != Some(data.len()) {
            return Err(Error::Dimension(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width.saturating_mul(height),
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.data[row * self.width + col] = value;
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.height, self.width, |r, c| self.get(c, r))
    }
}

/// Decodes a binary PGM with maxval 255.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut cursor = HeaderCursor { bytes, pos: 0 };
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(decode_error(0, "expected P5 magic (8-bit binary PGM)"));
    }
    cursor.pos = 2;
    let width = cursor.number("width")?;
    let height = cursor.number("height")?;
    let maxval = cursor.number("maxval")?;
    if maxval != 255 {
        return Err(decode_error(cursor.pos, format!("maxval {maxval} unsupported, need 255")));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cursor.pos) {
        Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
        _ => return Err(decode_error(cursor.pos, "missing whitespace after maxval")),
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| decode_error(cursor.pos, "image dimensions overflow"))?;
    let payload = &bytes[cursor.pos..];
    if payload.len() < count {
        return Err(decode_error(
            bytes.len(),
            format!("truncated raster: {} of {count} bytes", payload.len()),
        ));
    }
    GrayImage::new(width, height, payload[..count].to_vec())
}

/// Encodes as `P5\n<w> <h>\n255\n` followed by the raw raster.
pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.data);
    out
}

fn decode_error(offset: usize, reason: impl Into<String>) -> Error {
    Error::Decode { offset, reason: reason.into() }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_separators(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, field: &str) -> Result<usize> {
        let before = self.pos;
        self.skip_separators();
        if self.pos == before {
            return Err(decode_error(self.pos, format!("expected whitespace before {field}")));
        }
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(decode_error(start, format!("expected decimal {field}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| decode_error(start, format!("{field} out of range")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_tiny_p5() {
        let bytes = b"P5\n2 2\n255\n\x00\x80\xff\x07";
        let img = decode_pgm(bytes).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.pixels(), &[0, 128, 255, 7]);
        assert_eq!(encode_pgm(&img), bytes.to_vec());
    }

    #[test]
    fn accepts_comments_in_header() {
        let img = decode_pgm(b"P5 # made by hand\n1 1\n255\n\x2a").unwrap();
        assert_eq!(img.pixels(), &[42]);
    }

    #[test]
    fn rejects_color_header() {
        let err = decode_pgm(b"P6\n1 1\n255\n\x00\x00\x00").unwrap_err();
        assert!(matches!(err, Error::Decode { offset: 0, .. }));
    }

    #[test]
    fn rejects_sixteen_bit() {
        assert!(matches!(
            decode_pgm(b"P5\n1 1\n65535\n\x00\x00"),
            Err(Error::Decode { .. })
        ));
    }

    #[test]
    fn truncated_payload_names_offset() {
        let err = decode_pgm(b"P5\n2 2\n255\n\x01\x02").unwrap_err();
        assert_eq!(err, Error::Decode {
            offset: 13,
            reason: "truncated raster: 2 of 4 bytes".into()
        });
    }

    #[test]
    fn size_arithmetic_for_full_frame() {
        let img = GrayImage::filled(512, 512, 9);
        let round = decode_pgm(&encode_pgm(&img)).unwrap();
        assert_eq!(round.pixels().len(), 262_144);
    }

    #[test]
    fn mismatched_buffer_is_rejected() {
        assert!(GrayImage::new(3, 3, vec![0; 8]).is_err());
    }
}
