//! MSB-first bit streams and the small entropy codes used by the auxiliary
//! information: fixed-width fields, Elias-gamma integers, a byte-aligned
//! run-length code for flag bits, and a bitwise CRC-16.

use crate::error::{Error, Result};

/// Append-only bit sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BitWriter {
    bits: Vec<bool>,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn push_bit(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    pub fn push_bits(&mut self, bits: &[bool]) {
        self.bits.extend_from_slice(bits);
    }

    /// Writes the low `width` bits of `value`, most significant first.
    pub fn push(&mut self, value: u64, width: u32, field: &str) -> Result<()> {
        if width < 64 && value >> width != 0 {
            return Err(Error::Serialization(format!(
                "{field} = {value} does not fit in {width} bits"
            )));
        }
        for shift in (0..width).rev() {
            self.bits.push((value >> shift) & 1 == 1);
        }
        Ok(())
    }

    /// Elias-gamma code of `value >= 1`.
    pub fn push_gamma(&mut self, value: u64, field: &str) -> Result<()> {
        if value == 0 {
            return Err(Error::Serialization(format!("{field}: gamma code needs a positive value")));
        }
        let width = 64 - value.leading_zeros();
        for _ in 1..width {
            self.bits.push(false);
        }
        self.push(value, width, field)
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.bits
    }

    pub fn as_bits(&self) -> &[bool] {
        &self.bits
    }
}

/// Cursor over a bit slice that reports the failing offset on underrun.
#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bits: &'a [bool],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bits: &'a [bool]) -> Self {
        Self { bits, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.pos
    }

    pub fn read_bit(&mut self, field: &str) -> Result<bool> {
        let bit = *self.bits.get(self.pos).ok_or_else(|| Error::Deserialization {
            offset: self.pos,
            reason: format!("stream ends inside {field}"),
        })?;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read(&mut self, width: u32, field: &str) -> Result<u64> {
        let mut value = 0u64;
        for _ in 0..width {
            value = (value << 1) | u64::from(self.read_bit(field)?);
        }
        Ok(value)
    }

    pub fn read_gamma(&mut self, field: &str) -> Result<u64> {
        let start = self.pos;
        let mut zeros = 0u32;
        while !self.read_bit(field)? {
            zeros += 1;
            if zeros >= 63 {
                return Err(Error::Deserialization {
                    offset: start,
                    reason: format!("{field}: gamma prefix too long"),
                });
            }
        }
        let rest = self.read(zeros, field)?;
        Ok((1u64 << zeros) | rest)
    }

    pub fn read_bits(&mut self, count: usize, field: &str) -> Result<&'a [bool]> {
        if self.remaining() < count {
            return Err(Error::Deserialization {
                offset: self.pos,
                reason: format!("stream ends inside {field}"),
            });
        }
        let out = &self.bits[self.pos..self.pos + count];
        self.pos += count;
        Ok(out)
    }
}

/// Maps signed integers onto 0, 1, 2, ... as 0, -1, 1, -2, 2, ...
pub fn zigzag(value: i64) -> u64 {
    ((value << 1) ^ (value >> 63)) as u64
}

pub fn unzigzag(value: u64) -> i64 {
    ((value >> 1) as i64) ^ -((value & 1) as i64)
}

/// Longest run one RLE token can carry.
pub const RLE_MAX_RUN: usize = 127;

/// Byte-aligned run-length code for bit strings.
///
/// Every token is one byte: the high bit is the repeated bit value and the
/// low seven bits the run length (1..=127). Longer runs are split.
pub fn rle_encode(bits: &[bool]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < bits.len() {
        let value = bits[i];
        let mut run = 1;
        while i + run < bits.len() && bits[i + run] == value && run < RLE_MAX_RUN {
            run += 1;
        }
        out.push(((value as u8) << 7) | run as u8);
        i += run;
    }
    out
}

pub fn rle_decode(bytes: &[u8]) -> Result<Vec<bool>> {
    let mut bits = Vec::new();
    for (index, &token) in bytes.iter().enumerate() {
        let run = (token & 0x7f) as usize;
        if run == 0 {
            return Err(Error::Deserialization {
                offset: index * 8,
                reason: "zero-length run in flag RLE".into(),
            });
        }
        bits.extend(std::iter::repeat_n(token & 0x80 != 0, run));
    }
    Ok(bits)
}

/// CRC-16/CCITT-FALSE computed bit by bit.
pub fn crc16(bits: &[bool]) -> u16 {
    let mut crc: u16 = 0xffff;
    for &bit in bits {
        let feedback = ((crc >> 15) & 1 == 1) ^ bit;
        crc <<= 1;
        if feedback {
            crc ^= 0x1021;
        }
    }
    crc
}

/// Packs bits MSB-first into bytes, zero-filling the last byte.
pub fn pack(bits: &[bool]) -> Vec<u8> {
    bits.chunks(8)
        .map(|chunk| {
            chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| acc | ((b as u8) << (7 - i)))
        })
        .collect()
}

pub fn unpack(bytes: &[u8], bit_len: usize) -> Vec<bool> {
    (0..bit_len)
        .map(|i| bytes[i / 8] >> (7 - i % 8) & 1 == 1)
        .collect()
}
