//! Per-row beam candidates and the two outlier filters applied to them.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::imaging::Frame;
use crate::locator::CentralLine;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Candidate,
    RemovedByContinuity,
    RemovedByParabola,
    Kept,
}

impl PointStatus {
    pub fn is_active(self) -> bool {
        matches!(self, PointStatus::Candidate | PointStatus::Kept)
    }
}

/// Brightest pixel of one row. `row` is the independent variable of the
/// fit, `col` the dependent one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrackPoint {
    pub row: usize,
    pub col: usize,
    pub intensity: u8,
    pub status: PointStatus,
}

/// Candidate points sorted by row, at most one per row. Filters annotate
/// statuses rather than dropping entries so removed points stay visible.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrackPointSet {
    points: Vec<TrackPoint>,
}

impl TrackPointSet {
    /// Builds a set from arbitrary points; sorts by row and rejects
    /// duplicate rows.
    pub fn new(mut points: Vec<TrackPoint>) -> Result<Self> {
        points.sort_by_key(|p| p.row);
        if points.windows(2).any(|w| w[0].row == w[1].row) {
            return Err(Error::InsufficientData(
                "duplicate row in track points".into(),
            ));
        }
        Ok(Self { points })
    }

    pub fn from_cols(rows_cols: &[(usize, usize)]) -> Result<Self> {
        Self::new(
            rows_cols
                .iter()
                .map(|&(row, col)| TrackPoint {
                    row,
                    col,
                    intensity: 0,
                    status: PointStatus::Candidate,
                })
                .collect(),
        )
    }

    pub fn all(&self) -> &[TrackPoint] {
        &self.points
    }

    pub fn active(&self) -> impl Iterator<Item = &TrackPoint> + '_ {
        self.points.iter().filter(|p| p.status.is_active())
    }

    pub fn active_count(&self) -> usize {
        self.active().count()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn count_with(&self, status: PointStatus) -> usize {
        self.points.iter().filter(|p| p.status == status).count()
    }
}

/// Row-wise argmax over every row of the frame.
pub fn row_maxima(frame: &Frame) -> TrackPointSet {
    row_maxima_in(frame, 0..frame.height())
}

/// Row-wise argmax over `rows`. All-zero rows produce no point; ties go to
/// the smallest column.
pub fn row_maxima_in(frame: &Frame, rows: Range<usize>) -> TrackPointSet {
    let rows = rows.start.min(frame.height())..rows.end.min(frame.height());
    let mut points = Vec::with_capacity(rows.len());
    for row in rows {
        let mut best_col = 0;
        let mut best = 0u8;
        for (col, &v) in frame.row(row).iter().enumerate() {
            if v > best {
                best = v;
                best_col = col;
            }
        }
        if best > 0 {
            points.push(TrackPoint {
                row,
                col: best_col,
                intensity: best,
                status: PointStatus::Candidate,
            });
        }
    }
    TrackPointSet { points }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContinuityConfig {
    /// Allowed column change per row of gap to the last accepted point.
    pub margin: u32,
    /// Double the margin after every consecutive rejection.
    pub doubling: bool,
}

impl Default for ContinuityConfig {
    fn default() -> Self {
        Self {
            margin: 3,
            doubling: true,
        }
    }
}

impl ContinuityConfig {
    pub fn validate(&self) -> Result<()> {
        if self.margin < 1 {
            return Err(Error::InvalidConfig(
                "continuity margin must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Marks acceptance for each active point walking in the given order.
fn continuity_pass<'a>(
    points: impl Iterator<Item = &'a TrackPoint>,
    cfg: &ContinuityConfig,
    accepted: &mut Vec<bool>,
) {
    let mut last: Option<&TrackPoint> = None;
    let mut margin = u64::from(cfg.margin);
    for p in points {
        let ok = match last {
            None => true,
            Some(prev) => {
                let gap = prev.row.abs_diff(p.row) as u64;
                let shift = prev.col.abs_diff(p.col) as u64;
                shift <= margin.saturating_mul(gap)
            }
        };
        accepted.push(ok);
        if ok {
            last = Some(p);
            margin = u64::from(cfg.margin);
        } else if cfg.doubling {
            margin = margin.saturating_mul(2);
        }
    }
}

/// Cone-of-safety filter run top-down and bottom-up; a point survives only
/// if both passes accept it. The first point of each pass is always
/// accepted.
pub fn continuity_filter(points: &TrackPointSet, cfg: &ContinuityConfig) -> TrackPointSet {
    let active: Vec<&TrackPoint> = points.active().collect();
    let mut down = Vec::with_capacity(active.len());
    continuity_pass(active.iter().copied(), cfg, &mut down);
    let mut up = Vec::with_capacity(active.len());
    continuity_pass(active.iter().rev().copied(), cfg, &mut up);
    up.reverse();

    let mut survive = down.iter().zip(&up).map(|(&d, &u)| d && u);
    let points = points
        .points
        .iter()
        .map(|p| {
            let mut p = *p;
            if p.status.is_active() && !survive.next().unwrap_or(false) {
                p.status = PointStatus::RemovedByContinuity;
            }
            p
        })
        .collect();
    TrackPointSet { points }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParabolaBandConfig {
    /// Full horizontal width of the band between the two parabolas.
    pub separation_d: f64,
    /// Quadratic coefficients scanned; the centre curve's offset from the
    /// central line is `a * (h² − (row − vertex)²)` with `h` half the
    /// line's row span, so every candidate meets the line at the clamps.
    pub bend_candidates: Vec<f64>,
    /// Row of the apex; mid-span when `None`.
    pub vertex_row: Option<f64>,
}

impl ParabolaBandConfig {
    /// `count` candidates whose apex offsets sweep `[-width/2, width/2]`
    /// uniformly.
    pub fn for_patch(width: usize, line: &CentralLine, separation_d: f64, count: usize) -> Self {
        let half_span = line.row_span() / 2.0;
        let reach = width as f64 / 2.0;
        let bend_candidates = if count <= 1 {
            vec![0.0]
        } else {
            (0..count)
                .map(|i| {
                    let apex = -reach + 2.0 * reach * i as f64 / (count - 1) as f64;
                    apex / (half_span * half_span)
                })
                .collect()
        };
        Self {
            separation_d,
            bend_candidates,
            vertex_row: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.separation_d > 0.0) {
            return Err(Error::InvalidConfig("separation_d must be > 0".into()));
        }
        if self.bend_candidates.is_empty() {
            return Err(Error::InvalidConfig(
                "bend_candidates must not be empty".into(),
            ));
        }
        Ok(())
    }
}

/// One parabola of the family, anchored to the central line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolaCurve {
    pub bend: f64,
    pub vertex_row: f64,
    pub half_span: f64,
}

impl ParabolaCurve {
    pub fn new(bend: f64, line: &CentralLine, vertex_row: Option<f64>) -> Self {
        Self {
            bend,
            vertex_row: vertex_row.unwrap_or((line.top.row + line.bottom.row) / 2.0),
            half_span: line.row_span() / 2.0,
        }
    }

    pub fn offset(&self, row: f64) -> f64 {
        let dy = row - self.vertex_row;
        self.bend * (self.half_span * self.half_span - dy * dy)
    }

    pub fn center_col(&self, row: f64, line: &CentralLine) -> f64 {
        line.col_at(row) + self.offset(row)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandSelection {
    pub points: TrackPointSet,
    pub curve: ParabolaCurve,
    pub inliers: usize,
}

/// Scans every bend candidate and keeps the band holding the most active
/// points. Ties prefer the smaller `|a|`, then the earlier candidate.
/// Surviving points become [`PointStatus::Kept`].
pub fn parabola_band_filter(
    points: &TrackPointSet,
    cfg: &ParabolaBandConfig,
    line: &CentralLine,
) -> Result<BandSelection> {
    cfg.validate()?;
    let active: Vec<&TrackPoint> = points.active().collect();
    if active.is_empty() {
        return Err(Error::InsufficientData(
            "no active points for band filter".into(),
        ));
    }
    let half = cfg.separation_d / 2.0;
    let inside = |curve: &ParabolaCurve, p: &TrackPoint| {
        let row = p.row as f64;
        (p.col as f64 - curve.center_col(row, line)).abs() <= half
    };

    let mut best: Option<(ParabolaCurve, usize)> = None;
    for &bend in &cfg.bend_candidates {
        let curve = ParabolaCurve::new(bend, line, cfg.vertex_row);
        let count = active.iter().filter(|p| inside(&curve, p)).count();
        let better = match &best {
            None => true,
            Some((b, c)) => count > *c || (count == *c && bend.abs() < b.bend.abs()),
        };
        if better {
            best = Some((curve, count));
        }
    }
    let (curve, inliers) = best.expect("non-empty candidates");

    let points = points
        .points
        .iter()
        .map(|p| {
            let mut p = *p;
            if p.status.is_active() {
                p.status = if inside(&curve, &p) {
                    PointStatus::Kept
                } else {
                    PointStatus::RemovedByParabola
                };
            }
            p
        })
        .collect();
    Ok(BandSelection {
        points: TrackPointSet { points },
        curve,
        inliers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::locator::Point;
    use proptest::prelude::*;

    fn vertical_line(col: f64, top: f64, bottom: f64) -> CentralLine {
        CentralLine::new(Point::new(top, col), Point::new(bottom, col)).unwrap()
    }

    fn survivors(set: &TrackPointSet) -> Vec<(usize, usize)> {
        set.active().map(|p| (p.row, p.col)).collect()
    }

    #[test]
    fn row_maxima_ties_and_zero_rows() {
        let f = Frame::new(4, 2, vec![3, 9, 9, 1, 0, 0, 0, 0]).unwrap();
        let pts = row_maxima(&f);
        assert_eq!(pts.len(), 1);
        assert_eq!(
            (pts.all()[0].row, pts.all()[0].col, pts.all()[0].intensity),
            (0, 1, 9)
        );
    }

    #[test]
    fn row_maxima_respects_range() {
        let f = Frame::filled(3, 10, 5).unwrap();
        let pts = row_maxima_in(&f, 2..5);
        assert_eq!(
            pts.all().iter().map(|p| p.row).collect::<Vec<_>>(),
            vec![2, 3, 4]
        );
        assert!(row_maxima_in(&f, 8..40).len() == 2);
    }

    #[test]
    fn continuity_hand_trace() {
        let set = TrackPointSet::from_cols(&[(0, 50), (1, 51), (2, 52), (3, 80), (4, 53)]).unwrap();
        let out = continuity_filter(
            &set,
            &ContinuityConfig {
                margin: 3,
                doubling: true,
            },
        );
        assert_eq!(survivors(&out), vec![(0, 50), (1, 51), (2, 52), (4, 53)]);
        assert_eq!(out.all()[3].status, PointStatus::RemovedByContinuity);
    }

    #[test]
    fn continuity_vertical_and_single() {
        let set = TrackPointSet::from_cols(&(0..30).map(|r| (r, 7)).collect::<Vec<_>>()).unwrap();
        let out = continuity_filter(
            &set,
            &ContinuityConfig {
                margin: 1,
                doubling: false,
            },
        );
        assert_eq!(out.active_count(), 30);

        let one = TrackPointSet::from_cols(&[(4, 90)]).unwrap();
        assert_eq!(
            continuity_filter(&one, &ContinuityConfig::default()).active_count(),
            1
        );
        assert!(
            continuity_filter(&TrackPointSet::default(), &ContinuityConfig::default()).is_empty()
        );
    }

    #[test]
    fn doubling_widens_the_cone() {
        // Two outliers, then a point 14 px from the last good one at gap 3.
        let set = TrackPointSet::from_cols(&[(0, 10), (1, 60), (2, 60), (3, 24)]).unwrap();
        let with = continuity_filter(
            &set,
            &ContinuityConfig {
                margin: 3,
                doubling: true,
            },
        );
        // Down pass: 24 vs 10 within 12*3; up pass starts at 24, rejects 60s,
        // then 10 is within 12*3 of 24.
        assert_eq!(survivors(&with), vec![(0, 10), (3, 24)]);
        let without = continuity_filter(
            &set,
            &ContinuityConfig {
                margin: 3,
                doubling: false,
            },
        );
        assert_eq!(survivors(&without), vec![]);
    }

    #[test]
    fn doubling_breaks_idempotence() {
        // Accepted at 2× margin in the first run, but the rerun, which no
        // longer sees the outlier, only grants 1× margin across the gap.
        let cfg = ContinuityConfig {
            margin: 3,
            doubling: true,
        };
        let set = TrackPointSet::from_cols(&[(0, 0), (1, 100), (2, 8)]).unwrap();
        let once = continuity_filter(&set, &cfg);
        assert_eq!(survivors(&once), vec![(0, 0), (2, 8)]);
        let twice = continuity_filter(&once, &cfg);
        assert_eq!(twice.active_count(), 0);
    }

    #[test]
    fn parabola_points_on_candidate_are_kept() {
        let line = vertical_line(50.0, 0.0, 200.0);
        let cfg = ParabolaBandConfig::for_patch(105, &line, 2.0, 41);
        let curve = ParabolaCurve::new(cfg.bend_candidates[30], &line, None);
        let pts: Vec<_> = (0..=200)
            .map(|r| (r, curve.center_col(r as f64, &line).round() as usize))
            .collect();
        let set = TrackPointSet::from_cols(&pts).unwrap();
        let out = parabola_band_filter(&set, &cfg, &line).unwrap();
        assert_eq!(out.inliers, 201);
        assert_eq!(out.curve.bend, cfg.bend_candidates[30]);
        assert_eq!(out.points.count_with(PointStatus::Kept), 201);
    }

    #[test]
    fn parabola_removes_far_outliers() {
        let line = vertical_line(50.0, 0.0, 100.0);
        let cfg = ParabolaBandConfig::for_patch(105, &line, 10.0, 41);
        let curve = ParabolaCurve::new(cfg.bend_candidates[25], &line, None);
        let mut pts: Vec<_> = (0..=100)
            .filter(|r| ![20, 50, 80].contains(r))
            .map(|r| (r, curve.center_col(r as f64, &line).round() as usize))
            .collect();
        pts.extend([(20, 2), (50, 100), (80, 0)]);
        let set = TrackPointSet::from_cols(&pts).unwrap();
        let out = parabola_band_filter(&set, &cfg, &line).unwrap();
        let removed: Vec<_> = out
            .points
            .all()
            .iter()
            .filter(|p| p.status == PointStatus::RemovedByParabola)
            .map(|p| p.row)
            .collect();
        assert_eq!(removed, vec![20, 50, 80]);
    }

    #[test]
    fn parabola_rejects_empty_and_bad_config() {
        let line = vertical_line(5.0, 0.0, 10.0);
        let cfg = ParabolaBandConfig::for_patch(10, &line, 4.0, 5);
        assert!(parabola_band_filter(&TrackPointSet::default(), &cfg, &line).is_err());
        let bad = ParabolaBandConfig {
            separation_d: 0.0,
            ..cfg
        };
        let set = TrackPointSet::from_cols(&[(1, 5)]).unwrap();
        assert!(parabola_band_filter(&set, &bad, &line).is_err());
    }

    #[test]
    fn candidates_span_half_width() {
        let line = vertical_line(52.0, 13.5, 335.5);
        let cfg = ParabolaBandConfig::for_patch(105, &line, 10.0, 41);
        assert_eq!(cfg.bend_candidates.len(), 41);
        let apex = |a: f64| ParabolaCurve::new(a, &line, None).offset(174.5);
        assert!((apex(cfg.bend_candidates[0]) + 52.5).abs() < 1e-9);
        assert!((apex(cfg.bend_candidates[40]) - 52.5).abs() < 1e-9);
        assert_eq!(cfg.bend_candidates[20], 0.0);
        // Every candidate meets the line at the clamps.
        assert!(
            ParabolaCurve::new(cfg.bend_candidates[3], &line, None)
                .offset(13.5)
                .abs()
                < 1e-9
        );
    }

    fn point_cloud() -> impl Strategy<Value = TrackPointSet> {
        proptest::collection::btree_map(0usize..120, 0usize..60, 1..80)
            .prop_map(|m| TrackPointSet::from_cols(&m.into_iter().collect::<Vec<_>>()).unwrap())
    }

    proptest! {
        #[test]
        fn continuity_is_a_selection(set in point_cloud(), margin in 1u32..6, doubling in any::<bool>()) {
            let out = continuity_filter(&set, &ContinuityConfig { margin, doubling });
            prop_assert_eq!(out.len(), set.len());
            for (a, b) in out.all().iter().zip(set.all()) {
                prop_assert_eq!((a.row, a.col, a.intensity), (b.row, b.col, b.intensity));
            }
            prop_assert!(out.active_count() <= set.active_count());
        }

        #[test]
        fn continuity_idempotent_without_doubling(set in point_cloud(), margin in 1u32..6) {
            let cfg = ContinuityConfig { margin, doubling: false };
            let once = continuity_filter(&set, &cfg);
            let twice = continuity_filter(&once, &cfg);
            prop_assert_eq!(survivors(&once), survivors(&twice));
        }

        #[test]
        fn continuity_mirror_symmetry(set in point_cloud(), margin in 1u32..6, doubling in any::<bool>()) {
            let cfg = ContinuityConfig { margin, doubling };
            let max_row = 200;
            let mirrored = TrackPointSet::from_cols(
                &set.all().iter().map(|p| (max_row - p.row, p.col)).collect::<Vec<_>>(),
            ).unwrap();
            let direct: std::collections::BTreeSet<_> = survivors(&continuity_filter(&set, &cfg))
                .into_iter().map(|(r, c)| (max_row - r, c)).collect();
            let via_mirror: std::collections::BTreeSet<_> =
                survivors(&continuity_filter(&mirrored, &cfg)).into_iter().collect();
            prop_assert_eq!(direct, via_mirror);
        }

        #[test]
        fn band_survivors_within_half_d(set in point_cloud(), d in 1.0f64..20.0, count in 1usize..50) {
            let line = vertical_line(30.0, 0.0, 119.0);
            let cfg = ParabolaBandConfig::for_patch(60, &line, d, count);
            let out = parabola_band_filter(&set, &cfg, &line).unwrap();
            prop_assert_eq!(out.inliers, out.points.count_with(PointStatus::Kept));
            for p in out.points.active() {
                let c = out.curve.center_col(p.row as f64, &line);
                prop_assert!((p.col as f64 - c).abs() <= d / 2.0);
            }
        }
    }
}
