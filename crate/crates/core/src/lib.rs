//! Reversible data hiding in 8-bit grayscale images with dual-predictor
//! two-dimensional prediction-error histograms, plus the C-PEE and
//! multiple-histogram baselines it is compared against.
//!
//! The cover is split into two checkerboard layers. Every pixel of a layer
//! gets two prediction errors (rhombus mean and a second predictor) and a
//! local complexity; pixels are grouped into complexity classes and, per
//! class, into diagonals `e2 = e1 + b` of the 2D error histogram. Each
//! diagonal is a 1D histogram that receives its own pair of expansion bins,
//! chosen jointly across all diagonals by a grouped-knapsack dynamic
//! program. Extraction restores the cover bit for bit.
//!
//! ```no_run
//! use dpeh::{codec, image};
//!
//! let bytes = std::fs::read("cover.pgm").unwrap();
//! let cover = image::decode_pgm(&bytes).unwrap();
//! let payload = vec![true, false, true];
//! let stego = codec::embed(&cover, &payload, &codec::EmbedConfig::default()).unwrap();
//! let out = codec::extract(&stego.image).unwrap();
//! assert_eq!(out.payload, payload);
//! assert_eq!(out.cover, cover);
//! ```

pub mod bits;
pub mod codec;
pub mod error;
pub mod histograms;
pub mod image;
pub mod optimizer;
pub mod pixels;
pub mod predictors;
pub mod reference;

pub use error::{Error, Result};
