//! Dense image alignment on binary descriptor channels.
//!
//! Images are compared through a [`Representation`]: raw intensity, the eight
//! comparison bits of the 3x3 census/LBP descriptor kept as separate
//! channels ("bit-planes"), or the packed LBP code as a single channel.
//! [`align`] runs coarse-to-fine Gauss-Newton over a parametric warp using one
//! of three Lucas-Kanade update rules; [`eval`] holds the synthetic
//! experiments.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod align;
pub mod descriptor;
pub mod error;
pub mod eval;
pub mod image;
pub mod warp;

pub use align::{
    align, precompute_template, track_sequence, AlignConfig, AlignResult, TemplateModel, TrackedFrame, Tracker, Variant,
};
pub use descriptor::{
    compute_bitplanes, compute_lbp, hamming, ssd_multichannel, ComparisonOp, LbpImage, NeighborOffsets, Representation,
};
pub use error::{Error, Result};
pub use image::{load_image, save_image, Image, MultiChannelImage, PixelRegion};
pub use warp::{WarpModel, WarpParams};
