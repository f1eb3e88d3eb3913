//! Pixel bookkeeping: the double-layer checkerboard partition, the reserved
//! bottom rows that carry auxiliary bits, and saturation preprocessing with
//! its location map.

use crate::bits::{pack, unpack, BitReader, BitWriter};
use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Rows at the bottom of the image whose LSBs hold auxiliary information
/// unless the auxiliary stream needs more.
pub const RESERVED_ROWS: usize = 2;

/// Leading rows and columns skipped because the prediction context reaches
/// two pixels up and to the left.
pub const LEADING_MARGIN: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layer {
    First,
    Second,
}

impl Layer {
    fn parity(self) -> usize {
        match self {
            Layer::First => 0,
            Layer::Second => 1,
        }
    }
}

/// The embedding cells of one layer in raster-scan order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerPartition {
    pub layer: Layer,
    pub cells: Vec<(usize, usize)>,
}

impl LayerPartition {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Splits the embeddable region of `img` into the two checkerboard layers,
/// with the default two reserved rows.
pub fn partition(img: &GrayImage) -> Result<(LayerPartition, LayerPartition)> {
    partition_dims(img.width(), img.height(), RESERVED_ROWS)
}

/// Checkerboard partition for a `width` x `height` image whose bottom
/// `reserved_rows` rows carry auxiliary bits.
///
/// Cells satisfy `2 <= row <= height - reserved_rows - 2` and
/// `2 <= col <= width - 2`: the last image row above the reserved block is
/// context-only, since its pixels sit in the prediction window of the row
/// above it.
pub fn partition_dims(
    width: usize,
    height: usize,
    reserved_rows: usize,
) -> Result<(LayerPartition, LayerPartition)> {
    let reserved_rows = reserved_rows.max(RESERVED_ROWS);
    if width < 6 || height < reserved_rows + 5 {
        return Err(Error::Dimension(format!(
            "{width}x{height} image leaves no embeddable cells with {reserved_rows} reserved rows \
             (need width >= 6 and height >= {})",
            reserved_rows + 5
        )));
    }
    let last_row = height - reserved_rows - 2;
    let last_col = width - 2;
    let mut first = Vec::new();
    let mut second = Vec::new();
    for row in LEADING_MARGIN..=last_row {
        for col in LEADING_MARGIN..=last_col {
            if (row + col) % 2 == Layer::First.parity() {
                first.push((row, col));
            } else {
                second.push((row, col));
            }
        }
    }
    Ok((
        LayerPartition { layer: Layer::First, cells: first },
        LayerPartition { layer: Layer::Second, cells: second },
    ))
}

/// Number of bottom rows needed to hold `aux_bits` LSBs.
pub fn reserved_rows_for(aux_bits: usize, width: usize) -> usize {
    aux_bits.div_ceil(width).max(RESERVED_ROWS)
}

/// Raster indices of the pixels whose LSBs carry auxiliary bits: the bottom
/// row left to right, then the row above it, and so on.
pub fn aux_positions(width: usize, height: usize, count: usize) -> impl Iterator<Item = usize> {
    (0..count.min(width * height)).map(move |k| {
        let row = height - 1 - k / width;
        row * width + k % width
    })
}

/// Saturated pixels that preprocessing pulled one step inward.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LocationMap {
    entries: Vec<usize>,
    compressed: Vec<u8>,
    bit_len: usize,
}

impl LocationMap {
    /// Builds the map from strictly increasing raster indices.
    pub fn from_entries(entries: Vec<usize>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0] < w[1]));
        let mut writer = BitWriter::new();
        let mut next = 0usize;
        for &index in &entries {
            // zero-run length before each saturated pixel, gamma coded
            writer
                .push_gamma((index - next) as u64 + 1, "location map run")
                .expect("positive run");
            next = index + 1;
        }
        let bit_len = writer.len();
        Self { entries, compressed: pack(writer.as_bits()), bit_len }
    }

    /// Inverse of the compressed form; `pixel_count` bounds the indices.
    pub fn decompress(compressed_bits: &[bool], pixel_count: usize) -> Result<Self> {
        let mut reader = BitReader::new(compressed_bits);
        let mut entries = Vec::new();
        let mut next = 0usize;
        while reader.remaining() > 0 {
            let offset = reader.position();
            let run = reader.read_gamma("location map run")? as usize - 1;
            let index = next + run;
            if index >= pixel_count {
                return Err(Error::Deserialization {
                    offset,
                    reason: format!("location map index {index} outside image"),
                });
            }
            entries.push(index);
            next = index + 1;
        }
        Ok(Self::from_entries(entries))
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn compressed(&self) -> &[u8] {
        &self.compressed
    }

    /// Bit length of the compressed form.
    pub fn s_clm(&self) -> usize {
        self.bit_len
    }

    pub fn compressed_bits(&self) -> Vec<bool> {
        unpack(&self.compressed, self.bit_len)
    }
}

/// Moves every 0 to 1 and every 255 to 254, recording the changed pixels.
pub fn preprocess_saturation(img: &GrayImage) -> (GrayImage, LocationMap) {
    let mut out = img.clone();
    let mut entries = Vec::new();
    for (index, px) in out.pixels_mut().iter_mut().enumerate() {
        match *px {
            0 => {
                *px = 1;
                entries.push(index);
            }
            255 => {
                *px = 254;
                entries.push(index);
            }
            _ => {}
        }
    }
    (out, LocationMap::from_entries(entries))
}

/// Undoes [`preprocess_saturation`].
pub fn postprocess_saturation(img: &GrayImage, map: &LocationMap) -> Result<GrayImage> {
    let mut out = img.clone();
    let pixels = out.pixels_mut();
    for &index in map.entries() {
        let px = pixels.get_mut(index).ok_or_else(|| {
            Error::Corruption(format!("location map index {index} outside image"))
        })?;
        *px = match *px {
            1 => 0,
            254 => 255,
            other => {
                return Err(Error::Corruption(format!(
                    "location map pixel {index} holds {other}, expected 1 or 254"
                )))
            }
        };
    }
    Ok(out)
}
