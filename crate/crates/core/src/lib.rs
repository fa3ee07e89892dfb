//! Texture attributes and weakly supervised structure labeling for 2D
//! seismic sections.
//!
//! The crate covers the full chain from a raw amplitude section to a
//! color-coded label map: normalization and patch handling ([`grid`]),
//! eight texture descriptors ([`attr`]), SLIC superpixels ([`segment`]),
//! one-vs-all linear SVMs ([`classify`]), the harvest/train/label workflow
//! ([`pipeline`]) and segmentation scoring ([`eval`]).

pub mod attr;
pub mod classify;
pub mod error;
pub mod eval;
pub mod grid;
pub mod histogram;
pub mod labels;
pub mod pipeline;
pub mod segment;
pub mod selftest;

pub use error::{Error, Result};
