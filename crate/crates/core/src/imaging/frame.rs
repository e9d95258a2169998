use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// An 8-bit grayscale frame stored row-major.
///
/// Intensities are `u8`, so the `[0, 255]` range holds by construction;
/// the constructor enforces `pixels.len() == width * height` and
/// non-zero dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    pub scale_nm_per_px: Option<f64>,
    pub index: u64,
    pub timestamp_s: f64,
    pub metadata: BTreeMap<String, String>,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidFrame(format!(
                "expected {} pixels for {width}x{height}, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
            scale_nm_per_px: None,
            index: 0,
            timestamp_s: 0.0,
            metadata: BTreeMap::new(),
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Sets the frame ordinal and derives the timestamp from the frame rate.
    pub fn with_index(mut self, index: u64, fps: f64) -> Self {
        self.index = index;
        self.timestamp_s = if fps > 0.0 { index as f64 / fps } else { 0.0 };
        self
    }

    pub fn with_scale(mut self, scale_nm_per_px: Option<f64>) -> Self {
        self.scale_nm_per_px = scale_nm_per_px;
        self
    }

    /// A new frame with the same metadata but different pixel content.
    pub(crate) fn with_pixels(&self, width: usize, height: usize, pixels: Vec<u8>) -> Self {
        debug_assert_eq!(pixels.len(), width * height);
        Self {
            width,
            height,
            pixels,
            scale_nm_per_px: self.scale_nm_per_px,
            index: self.index,
            timestamp_s: self.timestamp_s,
            metadata: self.metadata.clone(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.pixels[row * self.width + col] = value;
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.pixels[row * self.width..(row + 1) * self.width]
    }
}

/// Interleaved multi-channel 8-bit image as decoded from disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

/// Converts a 1- or 3-channel image to a grayscale [`Frame`].
///
/// RGB pixels are combined with luma weights 0.299/0.587/0.114, rounded
/// half-up. The weights are applied in integer per-mille arithmetic so the
/// rounding is exact.
pub fn to_grayscale(raw: &RawImage) -> Result<Frame> {
    let expected = raw.width * raw.height * raw.channels;
    if raw.data.len() != expected {
        return Err(Error::InvalidFrame(format!(
            "expected {expected} bytes for {}x{}x{}, got {}",
            raw.width,
            raw.height,
            raw.channels,
            raw.data.len()
        )));
    }
    match raw.channels {
        1 => Frame::new(raw.width, raw.height, raw.data.clone()),
        3 => {
            let gray = raw
                .data
                .chunks_exact(3)
                .map(|px| {
                    let weighted =
                        299 * u32::from(px[0]) + 587 * u32::from(px[1]) + 114 * u32::from(px[2]);
                    ((weighted + 500) / 1000) as u8
                })
                .collect();
            Frame::new(raw.width, raw.height, gray)
        }
        n => Err(Error::UnsupportedChannels(n)),
    }
}

/// Axis-aligned rectangle in pixel coordinates; `x` is the column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Roi {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Roi {
    pub fn new(x: usize, y: usize, width: usize, height: usize) -> Self {
        Self {
            x,
            y,
            width,
            height,
        }
    }
}

/// Extracts the region `roi`. Scale, index and metadata carry over.
pub fn crop(frame: &Frame, roi: Roi) -> Result<Frame> {
    let out_of_bounds = roi.width == 0
        || roi.height == 0
        || roi.x.checked_add(roi.width).is_none_or(|r| r > frame.width)
        || roi
            .y
            .checked_add(roi.height)
            .is_none_or(|b| b > frame.height);
    if out_of_bounds {
        return Err(Error::RoiOutOfBounds {
            x: roi.x,
            y: roi.y,
            width: roi.width,
            height: roi.height,
            frame_width: frame.width,
            frame_height: frame.height,
        });
    }
    let mut pixels = Vec::with_capacity(roi.width * roi.height);
    for row in roi.y..roi.y + roi.height {
        let start = row * frame.width + roi.x;
        pixels.extend_from_slice(&frame.pixels[start..start + roi.width]);
    }
    Ok(frame.with_pixels(roi.width, roi.height, pixels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_dimensions() {
        assert!(Frame::new(0, 3, vec![]).is_err());
        assert!(Frame::new(2, 2, vec![0; 3]).is_err());
        assert!(Frame::new(2, 2, vec![0; 4]).is_ok());
    }

    #[test]
    fn timestamp_from_index() {
        let f = Frame::filled(2, 2, 0).unwrap().with_index(25, 10.0);
        assert_eq!(f.index, 25);
        assert!((f.timestamp_s - 2.5).abs() < 1e-12);
    }

    #[test]
    fn grayscale_single_channel_is_identity() {
        let raw = RawImage {
            width: 2,
            height: 1,
            channels: 1,
            data: vec![17, 230],
        };
        assert_eq!(to_grayscale(&raw).unwrap().pixels(), &[17, 230]);
    }

    #[test]
    fn grayscale_luma() {
        let raw = RawImage {
            width: 2,
            height: 1,
            channels: 3,
            data: vec![255, 255, 255, 100, 200, 50],
        };
        let f = to_grayscale(&raw).unwrap();
        assert_eq!(f.pixels(), &[255, 153]);
    }

    #[test]
    fn grayscale_rejects_rgba() {
        let raw = RawImage {
            width: 1,
            height: 1,
            channels: 4,
            data: vec![0; 4],
        };
        assert!(matches!(
            to_grayscale(&raw),
            Err(Error::UnsupportedChannels(4))
        ));
    }

    #[test]
    fn crop_full_frame_is_identity() {
        let f = Frame::new(3, 2, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(crop(&f, Roi::new(0, 0, 3, 2)).unwrap(), f);
    }

    #[test]
    fn crop_recording_to_patch() {
        let mut f = Frame::filled(1024, 942, 7).unwrap().with_scale(Some(71.4));
        f.metadata.insert("v_pp".into(), "36".into());
        let patch = crop(&f, Roi::new(460, 300, 105, 350)).unwrap();
        assert_eq!((patch.width(), patch.height()), (105, 350));
        assert_eq!(patch.scale_nm_per_px, Some(71.4));
        assert_eq!(patch.metadata.get("v_pp").map(String::as_str), Some("36"));
    }

    #[test]
    fn crop_out_of_bounds() {
        let f = Frame::filled(10, 10, 0).unwrap();
        assert!(matches!(
            crop(&f, Roi::new(5, 0, 6, 2)),
            Err(Error::RoiOutOfBounds { .. })
        ));
        assert!(crop(&f, Roi::new(0, 9, 1, 2)).is_err());
        assert!(crop(&f, Roi::new(0, 0, 0, 2)).is_err());
    }

    proptest! {
        #[test]
        fn crop_composes(
            w in 6usize..20, h in 6usize..20,
            seed in any::<u64>(),
            ax in 0usize..3, ay in 0usize..3,
            bx in 0usize..2, by in 0usize..2,
        ) {
            let pixels: Vec<u8> = (0..w * h).map(|i| (i as u64 ^ seed) as u8).collect();
            let f = Frame::new(w, h, pixels).unwrap();
            let a = Roi::new(ax, ay, w - ax, h - ay);
            let b = Roi::new(bx, by, a.width - bx - 1, a.height - by - 1);
            let nested = crop(&crop(&f, a).unwrap(), b).unwrap();
            let direct = crop(&f, Roi::new(ax + bx, ay + by, b.width, b.height)).unwrap();
            prop_assert_eq!(nested, direct);
        }
    }
}
