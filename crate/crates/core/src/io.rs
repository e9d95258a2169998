//! Disk formats: PNG frames, overlays, CSV tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, RgbImage};

use crate::analysis::DeflectionSample;
use crate::error::{Error, Result};
use crate::imaging::{to_grayscale, Frame, RawImage};
use crate::pipeline::FrameAnalysis;
use crate::synth::{render_frame, GroundTruth, SceneSpec};
use crate::tracker::PointStatus;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn image_err(path: &Path, source: image::ImageError) -> Error {
    Error::Image {
        path: path.display().to_string(),
        source,
    }
}

/// Decodes an 8-bit grayscale or RGB PNG.
pub fn read_png(path: &Path) -> Result<Frame> {
    let img = image::open(path).map_err(|e| image_err(path, e))?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    let (channels, data) = match img {
        DynamicImage::ImageLuma8(g) => (1, g.into_raw()),
        DynamicImage::ImageRgb8(rgb) => (3, rgb.into_raw()),
        DynamicImage::ImageLumaA8(_) => return Err(Error::UnsupportedChannels(2)),
        DynamicImage::ImageRgba8(_) => return Err(Error::UnsupportedChannels(4)),
        other => {
            return Err(Error::InvalidFrame(format!(
                "{}: unsupported pixel format {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    to_grayscale(&RawImage {
        width,
        height,
        channels,
        data,
    })
}

pub fn write_png(frame: &Frame, path: &Path) -> Result<()> {
    let img = GrayImage::from_raw(
        frame.width() as u32,
        frame.height() as u32,
        frame.pixels().to_vec(),
    )
    .expect("frame buffer matches its dimensions");
    img.save(path).map_err(|e| image_err(path, e))
}

/// Numeric key of a file stem: its last run of digits.
fn frame_number(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    let end = stem.rfind(|c: char| c.is_ascii_digit())? + 1;
    let start = stem[..end]
        .rfind(|c: char| !c.is_ascii_digit())
        .map_or(0, |i| i + 1);
    stem[start..end].parse().ok()
}

/// PNG files in `dir`, ordered by the number in their name; files without
/// a number sort last, by name.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            paths.push(path);
        }
    }
    paths.sort_by(|a, b| {
        let key = |p: &PathBuf| {
            (
                frame_number(p).map_or((1, 0), |n| (0, n)),
                p.file_name().map(|n| n.to_owned()),
            )
        };
        key(a).cmp(&key(b))
    });
    Ok(paths)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

pub const RESULTS_HEADER: &str =
    "frame,time_s,status,deflection_px,deflection_nm,c1,c2,c3,k,residual_rms,points_kept,iterations";

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(String::new, |x| format!("{x:.digits$}"))
}

/// Per-frame table; missing values are empty fields.
pub fn results_csv(samples: &[DeflectionSample]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for s in samples {
        let fit = s.fit.as_ref();
        let _ = writeln!(
            out,
            "{},{:.6},{},{},{},{},{},{},{},{},{},{}",
            s.frame_index,
            s.time_s,
            s.status.as_str(),
            opt(s.deflection_px, 6),
            opt(s.deflection_nm, 3),
            opt(fit.map(|f| f.c1), 6),
            opt(fit.map(|f| f.c2), 6),
            opt(fit.map(|f| f.c3), 6),
            opt(fit.map(|f| f.k), 9),
            opt(fit.map(|f| f.residual_rms), 6),
            s.point_count_kept,
            fit.map_or_else(String::new, |f| f.iterations.to_string()),
        );
    }
    out
}

pub const GROUND_TRUTH_HEADER: &str = "frame,deflection_px,c1,c2,c3";

pub fn ground_truth_csv(truths: &[GroundTruth]) -> String {
    let mut out = String::from(GROUND_TRUTH_HEADER);
    out.push('\n');
    for t in truths {
        let [c1, c2, c3] = t.coefficients;
        let _ = writeln!(
            out,
            "{},{:.6},{c1:.6},{c2:.6},{c3:.6}",
            t.frame_index, t.deflection_px
        );
    }
    out
}

/// Parses a table written by [`ground_truth_csv`].
pub fn parse_ground_truth_csv(text: &str) -> Result<Vec<(u64, f64)>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let mut next = || {
            fields.next().ok_or_else(|| {
                Error::InvalidConfig(format!("ground truth line {}: too few fields", i + 1))
            })
        };
        let frame = next()?
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("ground truth line {}: bad frame", i + 1)))?;
        let defl = next()?.parse().map_err(|_| {
            Error::InvalidConfig(format!("ground truth line {}: bad deflection", i + 1))
        })?;
        rows.push((frame, defl));
    }
    Ok(rows)
}

/// Renders `n_frames` frames to `dir/frame_00000.png` … plus
/// `ground_truth.csv`.
pub fn render_sequence(
    spec: &SceneSpec,
    n_frames: usize,
    seed: u64,
    dir: &Path,
) -> Result<Vec<GroundTruth>> {
    if n_frames == 0 {
        return Err(Error::InvalidScene("n_frames must be >= 1".into()));
    }
    spec.validate()?;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut truths = Vec::with_capacity(n_frames);
    for i in 0..n_frames as u64 {
        let (frame, truth) = render_frame(spec, i, seed)?;
        write_png(&frame, &dir.join(format!("frame_{i:05}.png")))?;
        truths.push(truth);
    }
    write_text(&dir.join("ground_truth.csv"), &ground_truth_csv(&truths))?;
    Ok(truths)
}

const GREEN: [u8; 3] = [0, 220, 0];
const RED: [u8; 3] = [230, 0, 0];
const YELLOW: [u8; 3] = [240, 220, 0];
const CYAN: [u8; 3] = [0, 220, 230];
const MAGENTA: [u8; 3] = [220, 0, 220];
const PINK: [u8; 3] = [255, 150, 190];

/// Frame in gray with the tracking result drawn on top.
///
/// green kept points, red continuity rejects, yellow band rejects,
/// cyan fitted curve, magenta central line, pink clamp centres.
pub fn render_overlay(frame: &Frame, analysis: &FrameAnalysis) -> RgbImage {
    let (w, h) = (frame.width(), frame.height());
    let mut img = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let v = frame.get(y as usize, x as usize);
        image::Rgb([v, v, v])
    });
    let mut put = |row: f64, col: f64, color: [u8; 3]| {
        let (r, c) = (row.round(), col.round());
        if r >= 0.0 && c >= 0.0 && (r as usize) < h && (c as usize) < w {
            img.put_pixel(c as u32, r as u32, image::Rgb(color));
        }
    };
    if let Some(loc) = &analysis.location {
        let line = &loc.line;
        let (r0, r1) = (line.top.row.ceil() as i64, line.bottom.row.floor() as i64);
        for row in r0..=r1 {
            put(row as f64, line.col_at(row as f64), MAGENTA);
        }
        if let Some(fit) = analysis.fit() {
            for row in r0..=r1 {
                put(row as f64, fit.model_eval(line, row as f64), CYAN);
            }
        }
        for p in [line.top, line.bottom] {
            for (dr, dc) in [(0.0, 0.0), (-1.0, 0.0), (1.0, 0.0), (0.0, -1.0), (0.0, 1.0)] {
                put(p.row + dr, p.col + dc, PINK);
            }
        }
    }
    for p in analysis.points.all() {
        let color = match p.status {
            PointStatus::Kept | PointStatus::Candidate => GREEN,
            PointStatus::RemovedByContinuity => RED,
            PointStatus::RemovedByParabola => YELLOW,
        };
        put(p.row as f64, p.col as f64, color);
    }
    img
}

pub fn write_overlay(frame: &Frame, analysis: &FrameAnalysis, path: &Path) -> Result<()> {
    render_overlay(frame, analysis)
        .save(path)
        .map_err(|e| image_err(path, e))
}
