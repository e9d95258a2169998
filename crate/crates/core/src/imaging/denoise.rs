//! Tall box-kernel denoising.
//!
//! A bright pixel that belongs to a vertically aligned beam has bright
//! neighbours above and below it; isolated noise does not. The 7×3 box
//! average measures that local support, and pixels whose support falls
//! below `mask_threshold` are zeroed in the original frame.

use super::Frame;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiseConfig {
    pub kernel_rows: usize,
    pub kernel_cols: usize,
    pub normalizer: u32,
    pub mask_threshold: u8,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self {
            kernel_rows: 7,
            kernel_cols: 3,
            normalizer: 21,
            mask_threshold: 20,
        }
    }
}

impl DenoiseConfig {
    pub fn with_threshold(mask_threshold: u8) -> Self {
        Self {
            mask_threshold,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_rows.is_multiple_of(2) || self.kernel_cols.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "kernel must have odd dimensions, got {}x{}",
                self.kernel_rows, self.kernel_cols
            )));
        }
        if self.normalizer as usize != self.kernel_rows * self.kernel_cols {
            return Err(Error::InvalidConfig(format!(
                "normalizer {} must equal kernel_rows*kernel_cols = {}",
                self.normalizer,
                self.kernel_rows * self.kernel_cols
            )));
        }
        Ok(())
    }
}

/// Un-normalised kernel sums (zero padding at the borders), one per pixel.
pub fn neighborhood_totals(frame: &Frame, cfg: &DenoiseConfig) -> Result<Vec<u32>> {
    cfg.validate()?;
    let (w, h) = (frame.width(), frame.height());
    if w < cfg.kernel_cols || h < cfg.kernel_rows {
        return Err(Error::FrameSmallerThanKernel {
            width: w,
            height: h,
            kernel_cols: cfg.kernel_cols,
            kernel_rows: cfg.kernel_rows,
        });
    }
    let (ry, rx) = (cfg.kernel_rows / 2, cfg.kernel_cols / 2);

    // Summed-area table with a zero first row/column.
    let stride = w + 1;
    let mut sat = vec![0u64; (h + 1) * stride];
    for row in 0..h {
        let mut acc = 0u64;
        for (col, &p) in frame.row(row).iter().enumerate() {
            acc += u64::from(p);
            sat[(row + 1) * stride + col + 1] = sat[row * stride + col + 1] + acc;
        }
    }

    let mut out = Vec::with_capacity(w * h);
    for row in 0..h {
        let r0 = row.saturating_sub(ry);
        let r1 = (row + ry + 1).min(h);
        for col in 0..w {
            let c0 = col.saturating_sub(rx);
            let c1 = (col + rx + 1).min(w);
            let total = sat[r1 * stride + c1] + sat[r0 * stride + c0]
                - sat[r0 * stride + c1]
                - sat[r1 * stride + c0];
            out.push(total as u32);
        }
    }
    Ok(out)
}

/// Kernel average `round(total / normalizer)`, clamped to `[0, 255]`.
pub fn neighborhood_sum(frame: &Frame, cfg: &DenoiseConfig) -> Result<Frame> {
    let totals = neighborhood_totals(frame, cfg)?;
    let pixels = totals
        .into_iter()
        .map(|t| round_div(t, cfg.normalizer).min(255) as u8)
        .collect();
    Ok(frame.with_pixels(frame.width(), frame.height(), pixels))
}

/// Keeps original pixels whose kernel average reaches `mask_threshold`;
/// everything else becomes 0.
pub fn denoise_mask(frame: &Frame, cfg: &DenoiseConfig) -> Result<Frame> {
    let support = neighborhood_sum(frame, cfg)?;
    let pixels = frame
        .pixels()
        .iter()
        .zip(support.pixels())
        .map(|(&p, &s)| if s >= cfg.mask_threshold { p } else { 0 })
        .collect();
    Ok(frame.with_pixels(frame.width(), frame.height(), pixels))
}

#[inline]
fn round_div(total: u32, d: u32) -> u32 {
    // Round half up.
    (2 * total + d) / (2 * d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_interior_is_preserved() {
        let f = Frame::filled(9, 15, 60).unwrap();
        let s = neighborhood_sum(&f, &DenoiseConfig::default()).unwrap();
        for row in 3..12 {
            for col in 1..8 {
                assert_eq!(s.get(row, col), 60);
            }
        }
        // Zero padding attenuates the corner: 4 rows × 2 cols of 21 in view.
        assert_eq!(s.get(0, 0), round_div(60 * 8, 21) as u8);
    }

    #[test]
    fn single_pixel_spreads_over_kernel() {
        let mut f = Frame::filled(11, 15, 0).unwrap();
        f.set(7, 5, 210);
        let s = neighborhood_sum(&f, &DenoiseConfig::default()).unwrap();
        for row in 0..15 {
            for col in 0..11 {
                let inside = (4..=10).contains(&row) && (4..=6).contains(&col);
                assert_eq!(
                    s.get(row, col),
                    if inside { 10 } else { 0 },
                    "({row},{col})"
                );
            }
        }
    }

    #[test]
    fn all_zero_stays_zero() {
        let f = Frame::filled(5, 9, 0).unwrap();
        let cfg = DenoiseConfig::default();
        assert!(neighborhood_sum(&f, &cfg)
            .unwrap()
            .pixels()
            .iter()
            .all(|&p| p == 0));
        assert!(denoise_mask(&f, &cfg)
            .unwrap()
            .pixels()
            .iter()
            .all(|&p| p == 0));
    }

    #[test]
    fn isolated_bright_pixel_is_masked() {
        let mut f = Frame::filled(11, 15, 0).unwrap();
        f.set(7, 5, 210);
        let out = denoise_mask(&f, &DenoiseConfig::with_threshold(20)).unwrap();
        assert_eq!(out.get(7, 5), 0);
    }

    #[test]
    fn vertical_stripe_survives() {
        let mut f = Frame::filled(15, 30, 0).unwrap();
        for row in 0..30 {
            for col in 6..9 {
                f.set(row, col, 200);
            }
        }
        let out = denoise_mask(&f, &DenoiseConfig::with_threshold(20)).unwrap();
        for row in 3..27 {
            for col in 6..9 {
                assert_eq!(out.get(row, col), 200);
            }
        }
    }

    #[test]
    fn rejects_small_frame_and_bad_config() {
        let f = Frame::filled(2, 10, 0).unwrap();
        assert!(matches!(
            neighborhood_sum(&f, &DenoiseConfig::default()),
            Err(Error::FrameSmallerThanKernel { .. })
        ));
        let bad = DenoiseConfig {
            normalizer: 20,
            ..DenoiseConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    fn small_frame() -> impl Strategy<Value = Frame> {
        (3usize..12, 7usize..16).prop_flat_map(|(w, h)| {
            proptest::collection::vec(0u8..=25, w * h)
                .prop_map(move |px| Frame::new(w, h, px).unwrap())
        })
    }

    proptest! {
        #[test]
        fn totals_are_linear(f in small_frame(), a in 1u8..=10) {
            let cfg = DenoiseConfig::default();
            let scaled = Frame::new(
                f.width(), f.height(),
                f.pixels().iter().map(|&p| p * a).collect(),
            ).unwrap();
            let base = neighborhood_totals(&f, &cfg).unwrap();
            let lhs = neighborhood_totals(&scaled, &cfg).unwrap();
            for (l, b) in lhs.iter().zip(&base) {
                prop_assert_eq!(*l, *b * u32::from(a));
            }
        }

        #[test]
        fn totals_match_direct_sum(f in small_frame()) {
            let cfg = DenoiseConfig::default();
            let totals = neighborhood_totals(&f, &cfg).unwrap();
            for row in 0..f.height() as i64 {
                for col in 0..f.width() as i64 {
                    let mut direct = 0u32;
                    for dr in -3..=3i64 {
                        for dc in -1..=1i64 {
                            let (r, c) = (row + dr, col + dc);
                            if r >= 0 && c >= 0 && (r as usize) < f.height() && (c as usize) < f.width() {
                                direct += u32::from(f.get(r as usize, c as usize));
                            }
                        }
                    }
                    prop_assert_eq!(totals[row as usize * f.width() + col as usize], direct);
                }
            }
        }

        #[test]
        fn mask_output_is_zero_or_original(
            px in proptest::collection::vec(any::<u8>(), 10 * 12),
            thr in any::<u8>(),
        ) {
            let f = Frame::new(10, 12, px).unwrap();
            let out = denoise_mask(&f, &DenoiseConfig::with_threshold(thr)).unwrap();
            for (o, p) in out.pixels().iter().zip(f.pixels()) {
                prop_assert!(*o == 0 || o == p);
            }
        }
    }
}
