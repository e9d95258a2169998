//! Flat `key = value` configuration files.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.
//! Unknown keys are rejected so typos surface before any processing.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fitter::GaussNewtonOptions;
use crate::imaging::{DenoiseConfig, Roi};
use crate::synth::{NoiseSpec, PadRect, SceneSpec, Trajectory};
use crate::tracker::ContinuityConfig;

/// Parses `key = value` lines into ordered pairs.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!(
                "line {}: expected `key = value`, got `{line}`",
                lineno + 1
            ))
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "line {}: empty key",
                lineno + 1
            )));
        }
        out.push((key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::InvalidConfig(format!(
            "{key}: expected a boolean, got `{value}`"
        ))),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str, n: usize) -> Result<Vec<T>> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != n {
        return Err(Error::InvalidConfig(format!(
            "{key}: expected {n} comma-separated values"
        )));
    }
    parts.iter().map(|p| parse_value(key, p)).collect()
}

fn parse_optional_scale(key: &str, value: &str) -> Result<Option<f64>> {
    if value.is_empty() || value.eq_ignore_ascii_case("none") {
        Ok(None)
    } else {
        parse_value(key, value).map(Some)
    }
}

/// Every tunable of the tracking pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub blur_window: usize,
    /// Clamp area gate as a fraction of the patch pixel count.
    pub min_area_fraction: f64,
    pub mask_threshold: u8,
    pub continuity_margin: u32,
    pub continuity_doubling: bool,
    pub separation_d: f64,
    pub bend_candidates: usize,
    pub gn_tol: f64,
    pub gn_max_iter: usize,
    pub hysteresis_px: f64,
    pub fps: f64,
    pub scale_nm_per_px: Option<f64>,
    pub roi: Option<Roi>,
    pub relocate_per_frame: bool,
    /// Rows skipped next to each clamp region before tracking starts.
    pub clamp_clearance: usize,
    /// Worker threads for multi-frame runs; 0 picks automatically.
    pub threads: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            blur_window: 3,
            min_area_fraction: 0.02,
            mask_threshold: 20,
            continuity_margin: 3,
            continuity_doubling: true,
            separation_d: 10.0,
            bend_candidates: 41,
            gn_tol: 1e-8,
            gn_max_iter: 20,
            hysteresis_px: 2.0,
            fps: 10.0,
            scale_nm_per_px: None,
            roi: None,
            relocate_per_frame: false,
            clamp_clearance: 2,
            threads: 0,
        }
    }
}

impl PipelineConfig {
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (key, value) in parse_kv(text)? {
            cfg.set(&key, &value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "blur_window" => self.blur_window = parse_value(key, value)?,
            "min_area_fraction" => self.min_area_fraction = parse_value(key, value)?,
            "mask_threshold" => {
                let v: u32 = parse_value(key, value)?;
                self.mask_threshold = u8::try_from(v)
                    .map_err(|_| Error::InvalidConfig(format!("mask_threshold {v} exceeds 255")))?;
            }
            "continuity_margin" => self.continuity_margin = parse_value(key, value)?,
            "continuity_doubling" => self.continuity_doubling = parse_bool(key, value)?,
            "separation_d" => self.separation_d = parse_value(key, value)?,
            "bend_candidates" => self.bend_candidates = parse_value(key, value)?,
            "gn_tol" => self.gn_tol = parse_value(key, value)?,
            "gn_max_iter" => self.gn_max_iter = parse_value(key, value)?,
            "hysteresis_px" => self.hysteresis_px = parse_value(key, value)?,
            "fps" => self.fps = parse_value(key, value)?,
            "scale_nm_per_px" => self.scale_nm_per_px = parse_optional_scale(key, value)?,
            "roi" => {
                self.roi = if value.is_empty() || value.eq_ignore_ascii_case("none") {
                    None
                } else {
                    let v: Vec<usize> = parse_list(key, value, 4)?;
                    Some(Roi::new(v[0], v[1], v[2], v[3]))
                }
            }
            "relocate_per_frame" => self.relocate_per_frame = parse_bool(key, value)?,
            "clamp_clearance" => self.clamp_clearance = parse_value(key, value)?,
            "threads" => self.threads = parse_value(key, value)?,
            _ => return Err(Error::InvalidConfig(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.blur_window == 0 || self.blur_window.is_multiple_of(2) {
            return bad("blur_window must be odd and >= 1");
        }
        if !(self.min_area_fraction > 0.0 && self.min_area_fraction < 1.0) {
            return bad("min_area_fraction must be in (0, 1)");
        }
        self.continuity().validate()?;
        if !(self.separation_d > 0.0) {
            return bad("separation_d must be > 0");
        }
        if self.bend_candidates == 0 {
            return bad("bend_candidates must be >= 1");
        }
        self.gauss_newton().validate()?;
        if !(self.hysteresis_px >= 0.0) {
            return bad("hysteresis_px must be >= 0");
        }
        if !(self.fps > 0.0) {
            return bad("fps must be > 0");
        }
        if let Some(s) = self.scale_nm_per_px {
            if !(s > 0.0) {
                return bad("scale_nm_per_px must be > 0");
            }
        }
        if let Some(roi) = self.roi {
            if roi.width == 0 || roi.height == 0 {
                return bad("roi must have positive size");
            }
        }
        Ok(())
    }

    pub fn denoise(&self) -> DenoiseConfig {
        DenoiseConfig::with_threshold(self.mask_threshold)
    }

    pub fn continuity(&self) -> ContinuityConfig {
        ContinuityConfig {
            margin: self.continuity_margin,
            doubling: self.continuity_doubling,
        }
    }

    pub fn gauss_newton(&self) -> GaussNewtonOptions {
        GaussNewtonOptions {
            max_iter: self.gn_max_iter,
            tol: self.gn_tol,
            ..GaussNewtonOptions::default()
        }
    }

    pub fn min_area(&self, width: usize, height: usize) -> usize {
        ((width * height) as f64 * self.min_area_fraction)
            .ceil()
            .max(1.0) as usize
    }
}

/// A synthetic recording: scene, length, and RNG seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec {
    pub scene: SceneSpec,
    pub n_frames: usize,
    pub seed: u64,
}

impl Default for SequenceSpec {
    fn default() -> Self {
        Self {
            scene: SceneSpec::default(),
            n_frames: 100,
            seed: 1,
        }
    }
}

impl SequenceSpec {
    /// Parses a scene file. `width`/`height` are applied first so pad
    /// defaults follow the patch size; other keys override.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let pairs = parse_kv(text)?;
        let lookup = |k: &str| {
            pairs
                .iter()
                .rev()
                .find(|(key, _)| key == k)
                .map(|(_, v)| v.as_str())
        };
        let defaults = SceneSpec::default();
        let width = lookup("width")
            .map(|v| parse_value("width", v))
            .transpose()?
            .unwrap_or(defaults.width);
        let height = lookup("height")
            .map(|v| parse_value("height", v))
            .transpose()?
            .unwrap_or(defaults.height);
        let mut spec = Self {
            scene: SceneSpec::with_size(width, height),
            ..Self::default()
        };

        let mut kind = String::from("square");
        let (mut amplitude, mut base, mut freq) = (8.0, 0.0, 0.5);
        let mut coeffs = [0.0; 3];
        let mut noise = NoiseSpec::moderate();
        for (key, value) in &pairs {
            let (key, value) = (key.as_str(), value.as_str());
            let s = &mut spec.scene;
            match key {
                "width" | "height" => {}
                "n_frames" => spec.n_frames = parse_value(key, value)?,
                "seed" => spec.seed = parse_value(key, value)?,
                "fps" => s.fps = parse_value(key, value)?,
                "scale_nm_per_px" => s.scale_nm_per_px = parse_optional_scale(key, value)?,
                "top_pad" | "bottom_pad" => {
                    let v: Vec<usize> = parse_list(key, value, 4)?;
                    let pad = PadRect {
                        row: v[0],
                        col: v[1],
                        height: v[2],
                        width: v[3],
                    };
                    if key == "top_pad" {
                        s.top_pad = pad;
                    } else {
                        s.bottom_pad = pad;
                    }
                }
                "trajectory" => kind = value.to_ascii_lowercase(),
                "amplitude_px" => amplitude = parse_value(key, value)?,
                "base_px" => base = parse_value(key, value)?,
                "freq_hz" => freq = parse_value(key, value)?,
                "c1" => coeffs[0] = parse_value(key, value)?,
                "c2" => coeffs[1] = parse_value(key, value)?,
                "c3" => coeffs[2] = parse_value(key, value)?,
                "beam_sigma_px" => s.beam_sigma_px = parse_value(key, value)?,
                "beam_brightness" => s.beam_brightness = parse_value(key, value)?,
                "background" => s.background = parse_value(key, value)?,
                "pad_brightness" => s.pad_brightness = parse_value(key, value)?,
                "salt_density" => noise.salt_density = parse_value(key, value)?,
                "gaussian_sigma" => noise.gaussian_sigma = parse_value(key, value)?,
                "streak_probability" => noise.streak_probability = parse_value(key, value)?,
                "streak_length" => noise.streak_length = parse_value(key, value)?,
                "motion_blur_frames" => noise.motion_blur_frames = parse_value(key, value)?,
                _ => return Err(Error::InvalidConfig(format!("unknown key `{key}`"))),
            }
        }
        spec.scene.noise = noise;
        spec.scene.trajectory = match kind.as_str() {
            "square" => Trajectory::SquareWave {
                amplitude,
                freq_hz: freq,
            },
            "sine" | "sinusoid" => Trajectory::Sinusoid {
                base,
                amplitude,
                freq_hz: freq,
            },
            "static" => Trajectory::Static(coeffs),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "trajectory must be square, sine or static, got `{other}`"
                )))
            }
        };
        if spec.n_frames == 0 {
            return Err(Error::InvalidScene("n_frames must be >= 1".into()));
        }
        spec.scene.validate()?;
        Ok(spec)
    }
}
