//! Clamp localisation and the central reference line.
//!
//! The clamp pads at each end of the beam are large, bright, and mostly
//! untouched by drive-induced noise, so they are found by median blur,
//! OTSU binarisation and connected-component analysis. The line joining
//! their centroids is the undeflected beam axis.

use crate::error::{Error, Result};
use crate::imaging::{binarize, median_blur, otsu_threshold, BinaryImage, Frame};

/// Real-valued image position.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Point {
    pub row: f64,
    pub col: f64,
}

impl Point {
    pub fn new(row: f64, col: f64) -> Self {
        Self { row, col }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.row - other.row).hypot(self.col - other.col)
    }
}

/// Inclusive pixel bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub top: usize,
    pub left: usize,
    pub bottom: usize,
    pub right: usize,
}

/// One 8-connected foreground component, stored as its filled region.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub pixels: Vec<(usize, usize)>,
    pub area: usize,
    pub centroid: Point,
    pub bbox: BoundingBox,
}

impl Contour {
    fn from_pixels(mut pixels: Vec<(usize, usize)>) -> Self {
        pixels.sort_unstable();
        let area = pixels.len();
        let (mut sum_r, mut sum_c) = (0.0, 0.0);
        let mut bbox = BoundingBox {
            top: usize::MAX,
            left: usize::MAX,
            bottom: 0,
            right: 0,
        };
        for &(r, c) in &pixels {
            sum_r += r as f64;
            sum_c += c as f64;
            bbox.top = bbox.top.min(r);
            bbox.left = bbox.left.min(c);
            bbox.bottom = bbox.bottom.max(r);
            bbox.right = bbox.right.max(c);
        }
        Self {
            centroid: Point::new(sum_r / area as f64, sum_c / area as f64),
            pixels,
            area,
            bbox,
        }
    }
}

/// Labels 8-connected foreground components.
///
/// Sorted by area descending; equal areas by bounding-box top, then left.
pub fn find_contours(bin: &BinaryImage) -> Vec<Contour> {
    let (w, h) = (bin.width(), bin.height());
    let mut visited = vec![false; w * h];
    let mut stack = Vec::new();
    let mut contours = Vec::new();

    for start in 0..w * h {
        if visited[start] || !bin.bits()[start] {
            continue;
        }
        visited[start] = true;
        stack.push(start);
        let mut members = Vec::new();
        while let Some(idx) = stack.pop() {
            let (r, c) = (idx / w, idx % w);
            members.push((r, c));
            for nr in r.saturating_sub(1)..=(r + 1).min(h - 1) {
                for nc in c.saturating_sub(1)..=(c + 1).min(w - 1) {
                    let n = nr * w + nc;
                    if !visited[n] && bin.bits()[n] {
                        visited[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        contours.push(Contour::from_pixels(members));
    }

    contours.sort_by(|a, b| {
        b.area
            .cmp(&a.area)
            .then(a.bbox.top.cmp(&b.bbox.top))
            .then(a.bbox.left.cmp(&b.bbox.left))
    });
    contours
}

/// Default area gate: 2% of the patch.
pub fn default_min_area(width: usize, height: usize) -> usize {
    (width * height).div_ceil(50)
}

/// Picks the top-most and bottom-most (by centroid row) of the contours
/// whose area reaches `min_area`.
pub fn select_clamps(contours: &[Contour], min_area: usize) -> Result<(&Contour, &Contour)> {
    let mut qualifying = contours.iter().filter(|c| c.area >= min_area);
    let first = qualifying
        .next()
        .ok_or_else(|| Error::LocateFailed(format!("no contour with area >= {min_area}")))?;
    let (mut top, mut bottom) = (first, first);
    let mut count = 1;
    for c in qualifying {
        count += 1;
        if c.centroid.row < top.centroid.row {
            top = c;
        }
        if c.centroid.row > bottom.centroid.row {
            bottom = c;
        }
    }
    if count < 2 {
        return Err(Error::LocateFailed(format!(
            "found {count} contour with area >= {min_area}, need two"
        )));
    }
    Ok((top, bottom))
}

/// Undeflected beam axis between the two clamp centres.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CentralLine {
    pub top: Point,
    pub bottom: Point,
    pub length_px: f64,
}

impl CentralLine {
    pub fn new(top: Point, bottom: Point) -> Result<Self> {
        if !(top.row < bottom.row) {
            return Err(Error::InvalidCentralLine(format!(
                "top row {} must be above bottom row {}",
                top.row, bottom.row
            )));
        }
        Ok(Self {
            top,
            bottom,
            length_px: top.distance(&bottom),
        })
    }

    /// Column of the line at `row` (extrapolated outside the span).
    pub fn col_at(&self, row: f64) -> f64 {
        let slope = (self.bottom.col - self.top.col) / (self.bottom.row - self.top.row);
        self.top.col + (row - self.top.row) * slope
    }

    /// Factor converting a horizontal offset from the line into the
    /// orthogonal distance to it.
    pub fn orthogonal_factor(&self) -> f64 {
        (self.bottom.row - self.top.row) / self.length_px
    }

    pub fn row_span(&self) -> f64 {
        self.bottom.row - self.top.row
    }
}

pub fn central_line(top: &Contour, bottom: &Contour) -> Result<CentralLine> {
    CentralLine::new(top.centroid, bottom.centroid)
}

/// Full locate result: the line plus the clamp regions it came from.
#[derive(Debug, Clone)]
pub struct ClampLocation {
    pub line: CentralLine,
    pub top: Contour,
    pub bottom: Contour,
    pub threshold: u8,
}

impl ClampLocation {
    /// Rows strictly between the two clamp regions, shrunk by `clearance`
    /// on each side. Empty when the clamps overlap.
    pub fn free_rows(&self, clearance: usize) -> std::ops::Range<usize> {
        let start = self.top.bbox.bottom + 1 + clearance;
        let end = self.bottom.bbox.top.saturating_sub(clearance);
        start..end.max(start)
    }
}

pub fn locate_clamps(frame: &Frame, blur_window: usize, min_area: usize) -> Result<ClampLocation> {
    let blurred = median_blur(frame, blur_window)?;
    let threshold = otsu_threshold(&blurred)?;
    let bin = binarize(&blurred, threshold);
    let contours = find_contours(&bin);
    let (top, bottom) = select_clamps(&contours, min_area)?;
    let line = central_line(top, bottom)?;
    Ok(ClampLocation {
        line,
        top: top.clone(),
        bottom: bottom.clone(),
        threshold,
    })
}

/// median blur → OTSU → binarise → components → clamps → central line.
pub fn locate(frame: &Frame, blur_window: usize, min_area: usize) -> Result<CentralLine> {
    locate_clamps(frame, blur_window, min_area).map(|loc| loc.line)
}
