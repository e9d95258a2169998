//! Synthetic SEM-like frames of a buckling beam with exact ground truth.
//!
//! A scene is a dark patch with two bright clamp pads and a dimmer beam
//! running between the pad centres. The beam's horizontal offset from the
//! pad-to-pad line follows `c1·sin(k·y) + c2·cos(k·y) + c3` with
//! `k = 2π/L`. Noise is layered on after the ground truth is recorded:
//! Gaussian intensity noise, short horizontal streaks, salt pixels, and
//! optional motion blur (several beam positions blended within one frame
//! period).

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::imaging::Frame;
use crate::locator::{CentralLine, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PadRect {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

impl PadRect {
    pub fn center(&self) -> Point {
        Point::new(
            self.row as f64 + (self.height as f64 - 1.0) / 2.0,
            self.col as f64 + (self.width as f64 - 1.0) / 2.0,
        )
    }

    pub fn shifted(&self, drow: usize, dcol: usize) -> Self {
        Self {
            row: self.row + drow,
            col: self.col + dcol,
            ..*self
        }
    }
}

/// How the beam shape evolves over time.
#[derive(Debug, Clone, PartialEq)]
pub enum Trajectory {
    /// Fixed coefficients for every frame.
    Static([f64; 3]),
    /// Explicit coefficients per frame (index wraps around).
    PerFrame(Vec<[f64; 3]>),
    /// First clamped-clamped mode `A·(1 − cos(k·y))/2`, with `A` jumping
    /// between `+amplitude` and `−amplitude` (inter-well motion).
    SquareWave { amplitude: f64, freq_hz: f64 },
    /// First mode with `A = base + amplitude·sin(2π·f·t)` (intra-well
    /// motion when `|base| > amplitude`).
    Sinusoid {
        base: f64,
        amplitude: f64,
        freq_hz: f64,
    },
}

/// Coefficients of the first mode with apex deflection `amplitude`.
pub fn mode_coefficients(amplitude: f64) -> [f64; 3] {
    [0.0, -amplitude / 2.0, amplitude / 2.0]
}

impl Trajectory {
    pub fn coefficients_at(&self, index: u64, time_s: f64) -> [f64; 3] {
        match self {
            Trajectory::Static(c) => *c,
            Trajectory::PerFrame(cs) => {
                if cs.is_empty() {
                    [0.0; 3]
                } else {
                    cs[(index as usize) % cs.len()]
                }
            }
            Trajectory::SquareWave { amplitude, freq_hz } => {
                let phase = (freq_hz * time_s).rem_euclid(1.0);
                // Guard against 0.4999… from floating-point time products.
                let phase = if (phase - 0.5).abs() < 1e-9 {
                    0.5
                } else {
                    phase
                };
                mode_coefficients(if phase < 0.5 { *amplitude } else { -amplitude })
            }
            Trajectory::Sinusoid {
                base,
                amplitude,
                freq_hz,
            } => mode_coefficients(base + amplitude * (2.0 * PI * freq_hz * time_s).sin()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Fraction of pixels replaced by a random bright value.
    pub salt_density: f64,
    pub gaussian_sigma: f64,
    /// Per-row probability of a horizontal streak.
    pub streak_probability: f64,
    pub streak_length: usize,
    /// Beam positions blended per frame; 1 disables motion blur.
    pub motion_blur_frames: usize,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            salt_density: 0.0,
            gaussian_sigma: 0.0,
            streak_probability: 0.0,
            streak_length: 0,
            motion_blur_frames: 1,
        }
    }

    /// The mid-range operating point used by the accuracy checks.
    pub fn moderate() -> Self {
        Self {
            salt_density: 0.02,
            gaussian_sigma: 8.0,
            streak_probability: 0.03,
            streak_length: 15,
            motion_blur_frames: 1,
        }
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::moderate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub top_pad: PadRect,
    pub bottom_pad: PadRect,
    pub trajectory: Trajectory,
    /// Standard deviation of the Gaussian beam cross-section.
    pub beam_sigma_px: f64,
    pub beam_brightness: f64,
    pub background: f64,
    pub pad_brightness: f64,
    pub noise: NoiseSpec,
    pub fps: f64,
    pub scale_nm_per_px: Option<f64>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self::with_size(105, 350)
    }
}

impl SceneSpec {
    /// Default scene on a `width`×`height` patch: 41×20 pads centred
    /// horizontally, 4 rows in from the top and bottom edges.
    pub fn with_size(width: usize, height: usize) -> Self {
        let pad_w = 41.min(width);
        let pad_h = 20.min(height / 4);
        let col = (width - pad_w) / 2;
        let margin = 4.min(height / 8);
        Self {
            width,
            height,
            top_pad: PadRect {
                row: margin,
                col,
                height: pad_h,
                width: pad_w,
            },
            bottom_pad: PadRect {
                row: height.saturating_sub(margin + pad_h),
                col,
                height: pad_h,
                width: pad_w,
            },
            trajectory: Trajectory::SquareWave {
                amplitude: 8.0,
                freq_hz: 0.5,
            },
            beam_sigma_px: 1.0,
            beam_brightness: 90.0,
            background: 4.0,
            pad_brightness: 230.0,
            noise: NoiseSpec::moderate(),
            fps: 10.0,
            scale_nm_per_px: Some(71.4),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScene(msg));
        if self.width < 3 || self.height < 7 {
            return bad(format!("patch {}x{} too small", self.width, self.height));
        }
        for (name, pad) in [("top", &self.top_pad), ("bottom", &self.bottom_pad)] {
            if pad.width == 0 || pad.height == 0 {
                return bad(format!("{name} pad is empty"));
            }
            if pad.row + pad.height > self.height || pad.col + pad.width > self.width {
                return bad(format!("{name} pad exceeds the patch"));
            }
        }
        if self.top_pad.row + self.top_pad.height >= self.bottom_pad.row {
            return bad("top pad must end above the bottom pad".into());
        }
        if !(self.beam_sigma_px > 0.0) {
            return bad("beam_sigma_px must be > 0".into());
        }
        for (name, v) in [
            ("beam_brightness", self.beam_brightness),
            ("background", self.background),
            ("pad_brightness", self.pad_brightness),
        ] {
            if !(0.0..=255.0).contains(&v) {
                return bad(format!("{name} must be in [0, 255]"));
            }
        }
        let n = &self.noise;
        if !(0.0..=1.0).contains(&n.salt_density) || !(0.0..=1.0).contains(&n.streak_probability) {
            return bad("noise densities must be in [0, 1]".into());
        }
        if !(n.gaussian_sigma >= 0.0) {
            return bad("gaussian_sigma must be >= 0".into());
        }
        if n.motion_blur_frames == 0 {
            return bad("motion_blur_frames must be >= 1".into());
        }
        if !(self.fps > 0.0) {
            return bad("fps must be > 0".into());
        }
        Ok(())
    }

    /// Ground-truth central line through the pad centres.
    pub fn central_line(&self) -> Result<CentralLine> {
        CentralLine::new(self.top_pad.center(), self.bottom_pad.center())
    }

    pub fn time_of(&self, index: u64) -> f64 {
        index as f64 / self.fps
    }
}

/// Pre-noise truth for one rendered frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub frame_index: u64,
    pub time_s: f64,
    pub line: CentralLine,
    pub coefficients: [f64; 3],
    /// Signed maximum orthogonal distance from the line.
    pub deflection_px: f64,
    /// `(row, exact centre column)` for every row between the pads.
    pub centerline: Vec<(usize, f64)>,
    /// `(row, column of the brightest beam pixel)` for the same rows.
    pub peak_cols: Vec<(usize, usize)>,
}

/// Exact signed extreme of `c1·sin + c2·cos + c3` over one full period.
pub fn exact_deflection(c: [f64; 3], line: &CentralLine) -> f64 {
    let r = c[0].hypot(c[1]);
    let extreme = if c[2] >= 0.0 { c[2] + r } else { c[2] - r };
    extreme * line.orthogonal_factor()
}

fn beam_offset(c: [f64; 3], k: f64, y: f64) -> f64 {
    let (s, co) = (k * y).sin_cos();
    c[0] * s + c[1] * co + c[2]
}

fn frame_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Renders frame `index`. Deterministic in `(spec, index, seed)`.
pub fn render_frame(spec: &SceneSpec, index: u64, seed: u64) -> Result<(Frame, GroundTruth)> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let line = spec.central_line()?;
    let k = 2.0 * PI / line.length_px;
    let time_s = spec.time_of(index);
    let coefficients = spec.trajectory.coefficients_at(index, time_s);

    let free_rows = (spec.top_pad.row + spec.top_pad.height)..spec.bottom_pad.row;
    let beam_rows = line.top.row.ceil() as usize..=(line.bottom.row.floor() as usize).min(h - 1);

    let mut canvas = vec![spec.background; w * h];
    let ghosts = spec.noise.motion_blur_frames;
    let reach = (4.0 * spec.beam_sigma_px).ceil() as i64;
    let two_var = 2.0 * spec.beam_sigma_px * spec.beam_sigma_px;
    for ghost in 0..ghosts {
        let t = time_s - ghost as f64 / (ghosts as f64 * spec.fps);
        let c = if ghost == 0 {
            coefficients
        } else {
            let virtual_index = (t * spec.fps).round().max(0.0) as u64;
            spec.trajectory.coefficients_at(virtual_index, t)
        };
        let weight = spec.beam_brightness / ghosts as f64;
        for row in beam_rows.clone() {
            let center = line.col_at(row as f64) + beam_offset(c, k, row as f64 - line.top.row);
            let nearest = center.round() as i64;
            for col in (nearest - reach).max(0)..=(nearest + reach).min(w as i64 - 1) {
                let dx = col as f64 - center;
                canvas[row * w + col as usize] += weight * (-dx * dx / two_var).exp();
            }
        }
    }

    let mut pixels: Vec<u8> = canvas
        .iter()
        .map(|v| v.round().clamp(0.0, 255.0) as u8)
        .collect();

    let mut centerline = Vec::with_capacity(free_rows.len());
    let mut peak_cols = Vec::with_capacity(free_rows.len());
    for row in free_rows.clone() {
        let center =
            line.col_at(row as f64) + beam_offset(coefficients, k, row as f64 - line.top.row);
        centerline.push((row, center));
        let peak = center.round().clamp(0.0, (w - 1) as f64) as usize;
        peak_cols.push((row, peak));
        if ghosts == 1 {
            // The pixel nearest the centreline is strictly the row maximum.
            let row_px = &mut pixels[row * w..(row + 1) * w];
            let top = row_px[peak].max(1);
            row_px[peak] = top;
            for (col, v) in row_px.iter_mut().enumerate() {
                if col != peak && *v >= top {
                    *v = top - 1;
                }
            }
        }
    }

    let pad_value = spec.pad_brightness.round() as u8;
    for pad in [&spec.top_pad, &spec.bottom_pad] {
        for row in pad.row..pad.row + pad.height {
            pixels[row * w + pad.col..row * w + pad.col + pad.width].fill(pad_value);
        }
    }

    apply_noise(&mut pixels, w, h, &spec.noise, &mut frame_rng(seed, index));

    let frame = Frame::new(w, h, pixels)?
        .with_index(index, spec.fps)
        .with_scale(spec.scale_nm_per_px);
    let truth = GroundTruth {
        frame_index: index,
        time_s,
        line,
        coefficients,
        deflection_px: exact_deflection(coefficients, &line),
        centerline,
        peak_cols,
    };
    Ok((frame, truth))
}

fn apply_noise(pixels: &mut [u8], w: usize, h: usize, noise: &NoiseSpec, rng: &mut ChaCha8Rng) {
    if noise.gaussian_sigma > 0.0 {
        let normal = Normal::new(0.0, noise.gaussian_sigma).expect("sigma validated");
        for p in pixels.iter_mut() {
            let v = f64::from(*p) + normal.sample(rng);
            *p = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    if noise.streak_probability > 0.0 && noise.streak_length > 0 {
        for row in 0..h {
            if rng.random_bool(noise.streak_probability) {
                let start = rng.random_range(0..w);
                let value: u8 = rng.random_range(128..=255);
                let end = (start + noise.streak_length).min(w);
                for p in &mut pixels[row * w + start..row * w + end] {
                    *p = (*p).max(value);
                }
            }
        }
    }
    if noise.salt_density > 0.0 {
        for p in pixels.iter_mut() {
            if rng.random_bool(noise.salt_density) {
                *p = rng.random_range(128..=255);
            }
        }
    }
}

/// Renders frames `0..n_frames` in memory.
pub fn render_sequence_frames(
    spec: &SceneSpec,
    n_frames: usize,
    seed: u64,
) -> Result<Vec<(Frame, GroundTruth)>> {
    if n_frames == 0 {
        return Err(Error::InvalidScene("n_frames must be >= 1".into()));
    }
    (0..n_frames as u64)
        .map(|i| render_frame(spec, i, seed))
        .collect()
}
