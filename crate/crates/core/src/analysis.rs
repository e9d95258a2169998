//! Physics-facing outputs computed from per-frame fits.
//!
//! Sign convention: positive deflection means the beam sits at larger
//! column indices than the central line (to the right in image
//! coordinates).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fitter::BeamFit;
use crate::locator::CentralLine;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStatus {
    Ok,
    LocateFailed,
    FitFailed,
}

impl SampleStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleStatus::Ok => "ok",
            SampleStatus::LocateFailed => "locate_failed",
            SampleStatus::FitFailed => "fit_failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeflectionSample {
    pub frame_index: u64,
    pub time_s: f64,
    pub deflection_px: Option<f64>,
    pub deflection_nm: Option<f64>,
    pub fit: Option<BeamFit>,
    pub point_count_kept: usize,
    pub status: SampleStatus,
}

impl DeflectionSample {
    pub fn failed(frame_index: u64, time_s: f64, status: SampleStatus) -> Self {
        Self {
            frame_index,
            time_s,
            deflection_px: None,
            deflection_nm: None,
            fit: None,
            point_count_kept: 0,
            status,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == SampleStatus::Ok
    }
}

/// Signed maximum orthogonal distance between the fitted curve and the
/// central line, scanned at one sample per row over the line's span.
pub fn deflection(fit: &BeamFit, line: &CentralLine) -> Result<f64> {
    if !fit.converged {
        return Err(Error::NotConverged);
    }
    let span = line.length_px;
    let last = span.floor() as usize;
    let mut best = 0.0f64;
    let grid = (0..=last)
        .map(|y| y as f64)
        .chain((span > last as f64).then_some(span));
    for y in grid {
        let off = fit.offset(y);
        if off.abs() > best.abs() {
            best = off;
        }
    }
    Ok(best * line.orthogonal_factor())
}

pub fn to_nm(px: f64, scale_nm_per_px: Option<f64>) -> Result<f64> {
    match scale_nm_per_px {
        Some(s) if s > 0.0 => Ok(px * s),
        Some(s) => Err(Error::InvalidConfig(format!("scale must be > 0, got {s}"))),
        None => Err(Error::MissingScale),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WellClass {
    IntraWell,
    InterWell,
    Indeterminate,
}

impl WellClass {
    pub fn as_str(self) -> &'static str {
        match self {
            WellClass::IntraWell => "intra-well",
            WellClass::InterWell => "inter-well",
            WellClass::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct WellDwell {
    /// Samples beyond the hysteresis band on this side.
    pub sample_count: usize,
    pub dwell_fraction: f64,
    pub dwell_time_s: f64,
    pub mean_deflection_px: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WellReport {
    pub classification: WellClass,
    pub crossing_count: usize,
    pub transition_rate_hz: f64,
    pub mean_abs_deflection_px: f64,
    pub duration_s: f64,
    pub ok_samples: usize,
    pub excluded_samples: usize,
    pub positive_well: WellDwell,
    pub negative_well: WellDwell,
}

/// Counts well-to-well crossings with hysteresis and classifies the motion.
///
/// A side is established once `|deflection| > hysteresis_px`; a crossing is
/// registered when the opposite side is subsequently established. Only ok
/// samples participate; `duration_s` is their count divided by `fps`.
pub fn classify_wells(
    samples: &[DeflectionSample],
    fps: f64,
    hysteresis_px: f64,
) -> Result<WellReport> {
    if !(fps > 0.0) {
        return Err(Error::InvalidConfig(format!("fps must be > 0, got {fps}")));
    }
    if !(hysteresis_px >= 0.0) {
        return Err(Error::InvalidConfig("hysteresis must be >= 0".into()));
    }
    let values: Vec<f64> = samples
        .iter()
        .filter(|s| s.is_ok())
        .filter_map(|s| s.deflection_px)
        .collect();
    if values.is_empty() {
        return Err(Error::InsufficientData("no ok samples".into()));
    }

    let mut side = 0i8;
    let mut crossings = 0;
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for &d in &values {
        let new_side = if d > hysteresis_px {
            1
        } else if d < -hysteresis_px {
            -1
        } else {
            0
        };
        match new_side {
            1 => pos.push(d),
            -1 => neg.push(d),
            _ => {}
        }
        if new_side != 0 && new_side != side {
            if side != 0 {
                crossings += 1;
            }
            side = new_side;
        }
    }

    let n = values.len();
    let duration_s = n as f64 / fps;
    let mean_abs = values.iter().map(|d| d.abs()).sum::<f64>() / n as f64;
    let dwell = |side: &[f64]| WellDwell {
        sample_count: side.len(),
        dwell_fraction: side.len() as f64 / n as f64,
        dwell_time_s: side.len() as f64 / fps,
        mean_deflection_px: if side.is_empty() {
            0.0
        } else {
            side.iter().sum::<f64>() / side.len() as f64
        },
    };
    let classification = if crossings >= 2 {
        WellClass::InterWell
    } else if crossings == 0 && mean_abs > hysteresis_px {
        WellClass::IntraWell
    } else {
        WellClass::Indeterminate
    };

    Ok(WellReport {
        classification,
        crossing_count: crossings,
        transition_rate_hz: crossings as f64 / (2.0 * duration_s),
        mean_abs_deflection_px: mean_abs,
        duration_s,
        ok_samples: n,
        excluded_samples: samples.len() - n,
        positive_well: dwell(&pos),
        negative_well: dwell(&neg),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitter::wavenumber;
    use crate::locator::Point;
    use proptest::prelude::*;

    fn ok_series(values: &[f64]) -> Vec<DeflectionSample> {
        values
            .iter()
            .enumerate()
            .map(|(i, &d)| DeflectionSample {
                frame_index: i as u64,
                time_s: i as f64 / 10.0,
                deflection_px: Some(d),
                deflection_nm: None,
                fit: None,
                point_count_kept: 100,
                status: SampleStatus::Ok,
            })
            .collect()
    }

    fn vertical(len: f64) -> CentralLine {
        CentralLine::new(Point::new(0.0, 50.0), Point::new(len, 50.0)).unwrap()
    }

    #[test]
    fn deflection_simple_cases() {
        let line = vertical(350.0);
        let k = wavenumber(&line);
        assert_eq!(
            deflection(&BeamFit::with_coefficients([0.0; 3], k), &line).unwrap(),
            0.0
        );
        assert_eq!(
            deflection(&BeamFit::with_coefficients([0.0, 0.0, 7.0], k), &line).unwrap(),
            7.0
        );
        assert_eq!(
            deflection(&BeamFit::with_coefficients([0.0, 0.0, -7.0], k), &line).unwrap(),
            -7.0
        );
        let mut unconverged = BeamFit::with_coefficients([0.0; 3], k);
        unconverged.converged = false;
        assert!(matches!(
            deflection(&unconverged, &line),
            Err(Error::NotConverged)
        ));
    }

    #[test]
    fn deflection_matches_dense_scan() {
        let line = vertical(350.0);
        let fit = BeamFit::with_coefficients([5.0, 2.0, 1.0], 2.0 * std::f64::consts::PI / 350.0);
        let mut best = 0.0f64;
        for row in 0..=350 {
            let y = row as f64;
            let v = 5.0 * (fit.k * y).sin() + 2.0 * (fit.k * y).cos() + 1.0;
            if v.abs() > best.abs() {
                best = v;
            }
        }
        assert!((deflection(&fit, &line).unwrap() - best).abs() < 1e-12);
        // sqrt(29) + 1 is the continuous maximum.
        assert!((best - (29f64.sqrt() + 1.0)).abs() < 1e-3);
    }

    #[test]
    fn tilted_line_uses_orthogonal_distance() {
        let line = CentralLine::new(Point::new(0.0, 0.0), Point::new(300.0, 400.0)).unwrap();
        let fit = BeamFit::with_coefficients([0.0, 0.0, 10.0], wavenumber(&line));
        assert!((deflection(&fit, &line).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn nm_conversion() {
        assert!((to_nm(1.0, Some(71.4)).unwrap() - 71.4).abs() < 1e-12);
        assert_eq!(to_nm(0.0, Some(71.4)).unwrap(), 0.0);
        assert!((to_nm(2.0, Some(71.4)).unwrap() - 142.8).abs() < 1e-12);
        assert!(matches!(to_nm(1.0, None), Err(Error::MissingScale)));
        assert!(to_nm(1.0, Some(0.0)).is_err());
    }

    #[test]
    fn constant_series_is_intra_well() {
        let r = classify_wells(&ok_series(&[8.0; 50]), 10.0, 2.0).unwrap();
        assert_eq!(r.classification, WellClass::IntraWell);
        assert_eq!(r.transition_rate_hz, 0.0);
        assert_eq!(r.positive_well.sample_count, 50);
    }

    #[test]
    fn square_wave_is_inter_well() {
        // 0.5 Hz square wave, 10 fps, 10 s.
        let values: Vec<f64> = (0..100)
            .map(|i| if (i / 10) % 2 == 0 { 8.0 } else { -8.0 })
            .collect();
        let r = classify_wells(&ok_series(&values), 10.0, 2.0).unwrap();
        assert_eq!(r.classification, WellClass::InterWell);
        assert_eq!(r.crossing_count, 9);
        assert!((r.transition_rate_hz - 0.5).abs() <= 1.0 / r.duration_s);
        assert_eq!(r.positive_well.sample_count, 50);
        assert_eq!(r.negative_well.mean_deflection_px, -8.0);
    }

    #[test]
    fn zero_series_is_indeterminate() {
        let r = classify_wells(&ok_series(&[0.0; 20]), 10.0, 2.0).unwrap();
        assert_eq!(r.classification, WellClass::Indeterminate);
    }

    #[test]
    fn failed_samples_are_excluded() {
        let mut s = ok_series(&[5.0, -5.0, 5.0, 5.0]);
        s[1] = DeflectionSample::failed(1, 0.1, SampleStatus::FitFailed);
        let r = classify_wells(&s, 10.0, 2.0).unwrap();
        assert_eq!(r.crossing_count, 0);
        assert_eq!(r.excluded_samples, 1);
        assert_eq!(r.ok_samples, 3);
        assert_eq!(
            classify_wells(&s[..1], 10.0, 2.0).unwrap().classification,
            WellClass::IntraWell
        );
        assert!(classify_wells(&s[1..2], 10.0, 2.0).is_err());
    }

    #[test]
    fn hysteresis_suppresses_chatter() {
        let values = [5.0, 1.0, -1.5, 1.2, -1.9, 6.0];
        let r = classify_wells(&ok_series(&values), 10.0, 2.0).unwrap();
        assert_eq!(r.crossing_count, 0);
    }

    proptest! {
        #[test]
        fn crossings_invariant_under_scaling(
            values in proptest::collection::vec(-20.0f64..20.0, 2..200),
            factor in 1.0f64..10.0,
        ) {
            let a = classify_wells(&ok_series(&values), 10.0, 2.0).unwrap();
            let scaled: Vec<f64> = values.iter().map(|v| v * factor).collect();
            let b = classify_wells(&ok_series(&scaled), 10.0, 2.0 * factor).unwrap();
            prop_assert_eq!(a.crossing_count, b.crossing_count);
            prop_assert!(a.transition_rate_hz >= 0.0);
        }

        #[test]
        fn mirror_flips_sign(c1 in -10.0f64..10.0, c2 in -10.0f64..10.0, c3 in -10.0f64..10.0) {
            let line = vertical(300.0);
            let k = wavenumber(&line);
            let d = deflection(&BeamFit::with_coefficients([c1, c2, c3], k), &line).unwrap();
            let m = deflection(&BeamFit::with_coefficients([-c1, -c2, -c3], k), &line).unwrap();
            prop_assert!((d + m).abs() < 1e-12);
        }
    }
}
