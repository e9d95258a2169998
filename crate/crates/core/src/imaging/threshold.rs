use std::cmp::Ordering;

use super::Frame;
use crate::error::{Error, Result};

/// Foreground/background mask with the dimensions of its source frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || bits.len() != width * height {
            return Err(Error::InvalidFrame(format!(
                "binary image {width}x{height} with {} bits",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn foreground_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Median filter over a `window`×`window` neighbourhood.
///
/// Near the borders only the part of the window inside the frame is used.
/// For even-sized truncated neighbourhoods the lower median is taken.
pub fn median_blur(frame: &Frame, window: usize) -> Result<Frame> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidWindow(window));
    }
    if window == 1 {
        return Ok(frame.clone());
    }
    let (w, h) = (frame.width(), frame.height());
    let radius = window / 2;
    let mut out = Vec::with_capacity(w * h);
    let mut buf = Vec::with_capacity(window * window);
    for row in 0..h {
        let r0 = row.saturating_sub(radius);
        let r1 = (row + radius).min(h - 1);
        for col in 0..w {
            let c0 = col.saturating_sub(radius);
            let c1 = (col + radius).min(w - 1);
            buf.clear();
            for r in r0..=r1 {
                buf.extend_from_slice(&frame.row(r)[c0..=c1]);
            }
            let mid = (buf.len() - 1) / 2;
            let (_, median, _) = buf.select_nth_unstable(mid);
            out.push(*median);
        }
    }
    Ok(frame.with_pixels(w, h, out))
}

pub fn histogram(frame: &Frame) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &p in frame.pixels() {
        hist[p as usize] += 1;
    }
    hist
}

/// Between-class score `S_b²/n_b + S_f²/n_f` kept as an exact fraction.
///
/// Minimising the population-weighted within-class variance is the same as
/// maximising this quantity, since the total sum of squares is fixed.
#[derive(Clone, Copy)]
struct SplitScore {
    numerator: u128,
    denominator: u128,
}

impl SplitScore {
    fn new(n_b: u64, s_b: u64, n_f: u64, s_f: u64) -> Self {
        let (n_b, s_b, n_f, s_f) = (n_b as u128, s_b as u128, n_f as u128, s_f as u128);
        Self {
            numerator: s_b * s_b * n_f + s_f * s_f * n_b,
            denominator: n_b * n_f,
        }
    }

    fn compare(&self, other: &Self) -> Ordering {
        match (
            self.numerator.checked_mul(other.denominator),
            other.numerator.checked_mul(self.denominator),
        ) {
            (Some(a), Some(b)) => a.cmp(&b),
            // Beyond ~7 Mpx the cross products can overflow u128.
            _ => {
                let a = self.numerator as f64 / self.denominator as f64;
                let b = other.numerator as f64 / other.denominator as f64;
                a.partial_cmp(&b).unwrap_or(Ordering::Equal)
            }
        }
    }
}

/// OTSU threshold: the `t` in `[1, 255]` minimising the population-weighted
/// within-class variance of the split `{p < t} | {p >= t}`.
///
/// Ties resolve to the smallest `t`. Fails when no `t` produces two
/// non-empty classes (a constant image).
pub fn otsu_threshold(frame: &Frame) -> Result<u8> {
    let hist = histogram(frame);
    let total_n: u64 = hist.iter().sum();
    let total_s: u64 = hist.iter().enumerate().map(|(v, &n)| v as u64 * n).sum();

    let mut n_b = 0u64;
    let mut s_b = 0u64;
    let mut best: Option<(u8, SplitScore)> = None;
    for t in 1..=255usize {
        n_b += hist[t - 1];
        s_b += (t as u64 - 1) * hist[t - 1];
        let n_f = total_n - n_b;
        if n_b == 0 || n_f == 0 {
            continue;
        }
        let score = SplitScore::new(n_b, s_b, n_f, total_s - s_b);
        let better = match &best {
            None => true,
            Some((_, current)) => score.compare(current) == Ordering::Greater,
        };
        if better {
            best = Some((t as u8, score));
        }
    }
    best.map(|(t, _)| t)
        .ok_or_else(|| Error::DegenerateImage("constant image has no valid threshold split".into()))
}

/// Pixels `>= t` become foreground.
pub fn binarize(frame: &Frame, t: u8) -> BinaryImage {
    BinaryImage {
        width: frame.width(),
        height: frame.height(),
        bits: frame.pixels().iter().map(|&p| p >= t).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force OTSU straight from the definition: for every candidate
    /// threshold, partition the pixel list and compute the within-class
    /// scatter `Σ(x − mean)²` per class as an exact rational.
    fn otsu_brute_force(pixels: &[u8]) -> Option<u8> {
        let mut best: Option<(u8, i128, i128)> = None;
        for t in 1..=255u16 {
            let bg: Vec<i128> = pixels
                .iter()
                .filter(|&&p| (p as u16) < t)
                .map(|&p| p as i128)
                .collect();
            let fg: Vec<i128> = pixels
                .iter()
                .filter(|&&p| (p as u16) >= t)
                .map(|&p| p as i128)
                .collect();
            if bg.is_empty() || fg.is_empty() {
                continue;
            }
            // scatter_c = Σx² − (Σx)²/n  →  combined over denominator n_b·n_f
            let (nb, nf) = (bg.len() as i128, fg.len() as i128);
            let (sb, sf): (i128, i128) = (bg.iter().sum(), fg.iter().sum());
            let qb: i128 = bg.iter().map(|x| x * x).sum();
            let qf: i128 = fg.iter().map(|x| x * x).sum();
            let num = (qb * nb - sb * sb) * nf + (qf * nf - sf * sf) * nb;
            let den = nb * nf;
            let better = match best {
                None => true,
                Some((_, bn, bd)) => num * bd < bn * den,
            };
            if better {
                best = Some((t as u8, num, den));
            }
        }
        best.map(|(t, _, _)| t)
    }

    #[test]
    fn median_window_one_is_identity() {
        let f = Frame::new(3, 1, vec![9, 1, 5]).unwrap();
        assert_eq!(median_blur(&f, 1).unwrap(), f);
    }

    #[test]
    fn median_rejects_even_window() {
        let f = Frame::filled(3, 3, 0).unwrap();
        assert!(matches!(median_blur(&f, 2), Err(Error::InvalidWindow(2))));
        assert!(matches!(median_blur(&f, 0), Err(Error::InvalidWindow(0))));
    }

    #[test]
    fn median_uniform_and_spike() {
        let f = Frame::filled(5, 4, 77).unwrap();
        assert_eq!(median_blur(&f, 3).unwrap(), f);

        let mut spike = Frame::filled(3, 3, 0).unwrap();
        spike.set(1, 1, 255);
        assert_eq!(median_blur(&spike, 3).unwrap().get(1, 1), 0);
    }

    #[test]
    fn median_idempotent_on_large_constant_regions() {
        // Vertical and horizontal half-planes plus a wide stripe.
        let (w, h) = (20, 16);
        let mut f = Frame::filled(w, h, 0).unwrap();
        for r in 0..h {
            for c in 0..w {
                let v = if c >= 10 || (4..9).contains(&r) {
                    255
                } else {
                    0
                };
                f.set(r, c, v);
            }
        }
        let once = median_blur(&f, 3).unwrap();
        let twice = median_blur(&once, 3).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn otsu_perfect_split_takes_smallest() {
        let f = Frame::new(2, 2, vec![0, 0, 255, 255]).unwrap();
        assert_eq!(otsu_threshold(&f).unwrap(), 1);
    }

    #[test]
    fn otsu_constant_image_is_degenerate() {
        let f = Frame::filled(4, 4, 90).unwrap();
        assert!(matches!(otsu_threshold(&f), Err(Error::DegenerateImage(_))));
    }

    #[test]
    fn otsu_matches_brute_force_on_64_pixels() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(64);
        for _ in 0..50 {
            let px: Vec<u8> = (0..64).map(|_| rng.random()).collect();
            let f = Frame::new(8, 8, px.clone()).unwrap();
            assert_eq!(Some(otsu_threshold(&f).unwrap()), otsu_brute_force(&px));
        }
    }

    #[test]
    fn binarize_edges() {
        let f = Frame::new(2, 2, vec![0, 0, 255, 255]).unwrap();
        assert_eq!(binarize(&f, 1).bits(), &[false, false, true, true]);
        let g = Frame::new(3, 1, vec![1, 200, 255]).unwrap();
        assert_eq!(binarize(&g, 1).foreground_count(), 3);
        assert_eq!(binarize(&g, 255).bits(), &[false, false, true]);
    }

    proptest! {
        #[test]
        fn otsu_equals_brute_force(px in proptest::collection::vec(any::<u8>(), 256)) {
            let f = Frame::new(16, 16, px.clone()).unwrap();
            let expected = otsu_brute_force(&px);
            match otsu_threshold(&f) {
                Ok(t) => prop_assert_eq!(Some(t), expected),
                Err(_) => prop_assert_eq!(None, expected),
            }
        }

        #[test]
        fn otsu_few_levels(px in proptest::collection::vec(prop_oneof![Just(3u8), Just(40u8), Just(41u8), Just(250u8)], 256)) {
            let f = Frame::new(16, 16, px.clone()).unwrap();
            prop_assert_eq!(otsu_threshold(&f).ok(), otsu_brute_force(&px));
        }
    }
}
