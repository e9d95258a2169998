//! Frame representation and pixel-level primitives.

mod denoise;
mod frame;
mod threshold;

pub use denoise::{denoise_mask, neighborhood_sum, neighborhood_totals, DenoiseConfig};
pub use frame::{crop, to_grayscale, Frame, RawImage, Roi};
pub use threshold::{binarize, histogram, median_blur, otsu_threshold, BinaryImage};
