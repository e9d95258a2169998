//! Per-frame tracking: locate → denoise → row maxima → continuity →
//! parabolic band → Gauss–Newton → deflection.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::analysis::{deflection, to_nm, DeflectionSample, SampleStatus};
use crate::config::PipelineConfig;
use crate::error::Result;
use crate::fitter::{gauss_newton_fit, BeamFit};
use crate::imaging::{crop, denoise_mask, Frame};
use crate::locator::{locate_clamps, ClampLocation};
use crate::tracker::{
    continuity_filter, parabola_band_filter, row_maxima_in, ParabolaBandConfig, ParabolaCurve,
    TrackPointSet,
};

/// Wall time spent in each stage of one frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub locate: Duration,
    pub denoise: Duration,
    pub maxima: Duration,
    pub continuity: Duration,
    pub parabola: Duration,
    pub fit: Duration,
}

impl StageTimings {
    pub const NAMES: [&'static str; 6] = [
        "locate",
        "denoise",
        "maxima",
        "continuity",
        "parabola",
        "fit",
    ];

    pub fn as_array(&self) -> [Duration; 6] {
        [
            self.locate,
            self.denoise,
            self.maxima,
            self.continuity,
            self.parabola,
            self.fit,
        ]
    }

    pub fn total(&self) -> Duration {
        self.as_array().iter().sum()
    }

    pub fn accumulate(&mut self, other: &StageTimings) {
        self.locate += other.locate;
        self.denoise += other.denoise;
        self.maxima += other.maxima;
        self.continuity += other.continuity;
        self.parabola += other.parabola;
        self.fit += other.fit;
    }
}

/// Everything one frame produced, including intermediates for overlays.
#[derive(Debug, Clone)]
pub struct FrameAnalysis {
    pub sample: DeflectionSample,
    pub location: Option<ClampLocation>,
    /// Row maxima annotated with the filter that removed them, if any.
    pub points: TrackPointSet,
    pub curve: Option<ParabolaCurve>,
    /// Why the frame failed, when it did.
    pub error: Option<String>,
    pub timings: StageTimings,
}

impl FrameAnalysis {
    pub fn fit(&self) -> Option<&BeamFit> {
        self.sample.fit.as_ref()
    }
}

/// Applies the configured region of interest; frames pass through unchanged
/// without one.
pub fn prepare_frame(frame: Frame, cfg: &PipelineConfig) -> Result<Frame> {
    let mut frame = match cfg.roi {
        Some(roi) => crop(&frame, roi)?,
        None => frame,
    };
    if frame.scale_nm_per_px.is_none() {
        frame.scale_nm_per_px = cfg.scale_nm_per_px;
    }
    Ok(frame)
}

pub fn locate_frame(frame: &Frame, cfg: &PipelineConfig) -> Result<ClampLocation> {
    locate_clamps(
        frame,
        cfg.blur_window,
        cfg.min_area(frame.width(), frame.height()),
    )
}

/// Runs the pipeline on one (already cropped) frame. With `fixed` the
/// clamps are taken from it; otherwise they are located on this frame.
/// Never fails: problems are reported through the sample status.
pub fn analyze_frame(
    frame: &Frame,
    cfg: &PipelineConfig,
    fixed: Option<&ClampLocation>,
) -> FrameAnalysis {
    let mut timings = StageTimings::default();
    let failed = |status, location, points, curve, err: String, timings| FrameAnalysis {
        sample: DeflectionSample::failed(frame.index, frame.timestamp_s, status),
        location,
        points,
        curve,
        error: Some(err),
        timings,
    };

    let t = Instant::now();
    let location = match fixed {
        Some(loc) => loc.clone(),
        None => match locate_frame(frame, cfg) {
            Ok(loc) => loc,
            Err(e) => {
                timings.locate = t.elapsed();
                let empty = TrackPointSet::default();
                return failed(
                    SampleStatus::LocateFailed,
                    None,
                    empty,
                    None,
                    e.to_string(),
                    timings,
                );
            }
        },
    };
    timings.locate = t.elapsed();
    let line = location.line;

    let t = Instant::now();
    let masked = denoise_mask(frame, &cfg.denoise());
    timings.denoise = t.elapsed();
    let masked = match masked {
        Ok(m) => m,
        Err(e) => {
            let empty = TrackPointSet::default();
            return failed(
                SampleStatus::FitFailed,
                Some(location),
                empty,
                None,
                e.to_string(),
                timings,
            );
        }
    };

    let t = Instant::now();
    let raw = row_maxima_in(&masked, location.free_rows(cfg.clamp_clearance));
    timings.maxima = t.elapsed();

    let t = Instant::now();
    let filtered = continuity_filter(&raw, &cfg.continuity());
    timings.continuity = t.elapsed();

    let t = Instant::now();
    let band_cfg =
        ParabolaBandConfig::for_patch(frame.width(), &line, cfg.separation_d, cfg.bend_candidates);
    let band = parabola_band_filter(&filtered, &band_cfg, &line);
    timings.parabola = t.elapsed();
    let band = match band {
        Ok(b) => b,
        Err(e) => {
            return failed(
                SampleStatus::FitFailed,
                Some(location),
                filtered,
                None,
                e.to_string(),
                timings,
            );
        }
    };

    let t = Instant::now();
    let fit = gauss_newton_fit(&band.points, &line, &cfg.gauss_newton());
    let defl = fit
        .as_ref()
        .map_err(|e| e.to_string())
        .and_then(|f| deflection(f, &line).map_err(|e| e.to_string()));
    timings.fit = t.elapsed();
    let (fit, px) = match (fit, defl) {
        (Ok(fit), Ok(px)) => (fit, px),
        (_, Err(e)) => {
            return failed(
                SampleStatus::FitFailed,
                Some(location),
                band.points,
                Some(band.curve),
                e,
                timings,
            );
        }
        (Err(_), Ok(_)) => unreachable!("deflection requires a fit"),
    };

    let kept = band.points.active_count();
    FrameAnalysis {
        sample: DeflectionSample {
            frame_index: frame.index,
            time_s: frame.timestamp_s,
            deflection_px: Some(px),
            deflection_nm: to_nm(px, frame.scale_nm_per_px).ok(),
            fit: Some(fit),
            point_count_kept: kept,
            status: SampleStatus::Ok,
        },
        location: Some(location),
        points: band.points,
        curve: Some(band.curve),
        error: None,
        timings,
    }
}

/// Reference clamps for a recording: the first frame, in order, on which
/// locating succeeds.
pub fn reference_location<'a>(
    frames: impl IntoIterator<Item = &'a Frame>,
    cfg: &PipelineConfig,
) -> Option<ClampLocation> {
    frames.into_iter().find_map(|f| locate_frame(f, cfg).ok())
}

/// Sequential multi-frame run. Locates once unless
/// `cfg.relocate_per_frame` is set.
pub fn track_frames(frames: &[Frame], cfg: &PipelineConfig) -> Vec<FrameAnalysis> {
    if cfg.relocate_per_frame {
        return frames.iter().map(|f| analyze_frame(f, cfg, None)).collect();
    }
    match reference_location(frames, cfg) {
        Some(loc) => frames
            .iter()
            .map(|f| analyze_frame(f, cfg, Some(&loc)))
            .collect(),
        None => frames.iter().map(|f| analyze_frame(f, cfg, None)).collect(),
    }
}
