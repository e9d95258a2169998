//! Subcommand implementations behind the `beamtrack` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use beamtrack::io::{
    list_frames, read_png, read_text, render_sequence, results_csv, write_overlay, write_text,
};
use beamtrack::pipeline::{analyze_frame, prepare_frame, reference_location};
use beamtrack::synth::GroundTruth;
use beamtrack::{
    classify_wells, DeflectionSample, Frame, FrameAnalysis, PipelineConfig, SequenceSpec,
    StageTimings, WellReport,
};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("no frame could be tracked ({0} frames processed)")]
    NoOkFrames(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Config(_) => 2,
            CliError::NoOkFrames(_) => 3,
        }
    }
}

impl From<beamtrack::Error> for CliError {
    fn from(e: beamtrack::Error) -> Self {
        match e {
            beamtrack::Error::InvalidConfig(_) | beamtrack::Error::InvalidScene(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Reads and validates a pipeline config; defaults when `path` is `None`.
pub fn load_config(path: Option<&Path>) -> CliResult<PipelineConfig> {
    match path {
        None => Ok(PipelineConfig::default()),
        Some(p) => {
            let text = read_text(p).map_err(|e| CliError::Config(e.to_string()))?;
            PipelineConfig::from_kv_text(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
    }
}

fn pool(threads: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

/// Decoded, cropped frames of a directory in frame order.
pub fn load_frames(dir: &Path, cfg: &PipelineConfig) -> CliResult<Vec<Frame>> {
    if !dir.is_dir() {
        return Err(CliError::Input(format!(
            "{} is not a directory",
            dir.display()
        )));
    }
    let paths = list_frames(dir)?;
    if paths.is_empty() {
        return Err(CliError::Input(format!(
            "no PNG frames in {}",
            dir.display()
        )));
    }
    let decoded: Vec<beamtrack::Result<Frame>> = pool(cfg.threads)?.install(|| {
        paths
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let frame = read_png(p)?.with_index(i as u64, cfg.fps);
                prepare_frame(frame, cfg)
            })
            .collect()
    });
    let frames = decoded.into_iter().collect::<beamtrack::Result<Vec<_>>>()?;
    let (w, h) = (frames[0].width(), frames[0].height());
    if let Some(f) = frames.iter().find(|f| (f.width(), f.height()) != (w, h)) {
        return Err(CliError::Input(format!(
            "frame {} is {}x{}, expected {w}x{h}",
            f.index,
            f.width(),
            f.height()
        )));
    }
    Ok(frames)
}

/// Runs the pipeline over all frames. The output is in frame order and
/// identical whether or not `parallel` is set.
pub fn process_frames(
    frames: &[Frame],
    cfg: &PipelineConfig,
    parallel: bool,
) -> CliResult<Vec<FrameAnalysis>> {
    let fixed = if cfg.relocate_per_frame {
        None
    } else {
        reference_location(frames, cfg)
    };
    let run = |f: &Frame| analyze_frame(f, cfg, fixed.as_ref());
    if parallel {
        Ok(pool(cfg.threads)?.install(|| frames.par_iter().map(run).collect()))
    } else {
        Ok(frames.iter().map(run).collect())
    }
}

#[derive(Debug, Clone)]
pub struct TrackOptions {
    pub input_dir: PathBuf,
    pub config_path: Option<PathBuf>,
    /// Defaults to `<input_dir>/results`.
    pub out_dir: Option<PathBuf>,
    pub overlay: bool,
    pub relocate_per_frame: bool,
    pub parallel: bool,
}

impl TrackOptions {
    pub fn new(input_dir: impl Into<PathBuf>) -> Self {
        Self {
            input_dir: input_dir.into(),
            config_path: None,
            out_dir: None,
            overlay: false,
            relocate_per_frame: false,
            parallel: true,
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .unwrap_or_else(|| self.input_dir.join("results"))
    }
}

#[derive(Debug, Clone)]
pub struct TrackOutcome {
    pub samples: Vec<DeflectionSample>,
    pub report: WellReport,
    pub out_dir: PathBuf,
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))
}

/// Tracks a frame directory and writes `results.csv`, `summary.json` and
/// optionally `overlays/`.
pub fn cmd_track(opts: &TrackOptions) -> CliResult<TrackOutcome> {
    let mut cfg = load_config(opts.config_path.as_deref())?;
    cfg.relocate_per_frame |= opts.relocate_per_frame;
    let frames = load_frames(&opts.input_dir, &cfg)?;
    let analyses = process_frames(&frames, &cfg, opts.parallel)?;
    let samples: Vec<DeflectionSample> = analyses.iter().map(|a| a.sample.clone()).collect();

    let out_dir = opts.out_dir();
    create_dir(&out_dir)?;
    write_text(&out_dir.join("results.csv"), &results_csv(&samples))?;
    if opts.overlay {
        let dir = out_dir.join("overlays");
        create_dir(&dir)?;
        for (frame, a) in frames.iter().zip(&analyses) {
            write_overlay(
                frame,
                a,
                &dir.join(format!("overlay_{:05}.png", frame.index)),
            )?;
        }
    }

    let ok = samples.iter().filter(|s| s.is_ok()).count();
    if ok == 0 {
        return Err(CliError::NoOkFrames(samples.len()));
    }
    let report = classify_wells(&samples, cfg.fps, cfg.hysteresis_px)?;
    let json = serde_json::to_string_pretty(&report).expect("report serialises");
    write_text(&out_dir.join("summary.json"), &(json + "\n"))?;
    Ok(TrackOutcome {
        samples,
        report,
        out_dir,
    })
}

/// Renders a synthetic sequence described by a scene file. Alongside the
/// frames and `ground_truth.csv` a `pipeline.conf` carrying the scene's
/// frame rate and scale is written for use with `track --config`.
pub fn cmd_synth(spec_path: &Path, out_dir: &Path) -> CliResult<Vec<GroundTruth>> {
    let text = read_text(spec_path).map_err(|e| CliError::Config(e.to_string()))?;
    let spec = SequenceSpec::from_kv_text(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", spec_path.display())))?;
    synth_to_dir(&spec, out_dir)
}

pub fn synth_to_dir(spec: &SequenceSpec, out_dir: &Path) -> CliResult<Vec<GroundTruth>> {
    let truths = render_sequence(&spec.scene, spec.n_frames, spec.seed, out_dir)?;
    let mut conf = format!("fps = {}\n", spec.scene.fps);
    if let Some(s) = spec.scene.scale_nm_per_px {
        conf += &format!("scale_nm_per_px = {s}\n");
    }
    write_text(&out_dir.join("pipeline.conf"), &conf)?;
    Ok(truths)
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub frames: usize,
    pub ok_frames: usize,
    pub decode_s: f64,
    /// Wall time of the pipeline alone, single-threaded.
    pub pipeline_s: f64,
    pub fps: f64,
    /// Mean milliseconds per frame for each stage.
    pub stage_ms: Vec<(String, f64)>,
    pub stage_total_ms: f64,
    pub samples: Vec<DeflectionSample>,
}

impl BenchReport {
    pub fn render(&self) -> String {
        let mut s = format!(
            "frames: {} ({} ok)\ndecode: {:.3} s\npipeline: {:.3} s\nthroughput: {:.2} frames/s\nper-stage mean (ms/frame):\n",
            self.frames, self.ok_frames, self.decode_s, self.pipeline_s, self.fps
        );
        for (name, ms) in &self.stage_ms {
            s += &format!("  {name:<11}{ms:>9.3}\n");
        }
        s += &format!("  {:<11}{:>9.3}\n", "total", self.stage_total_ms);
        s
    }
}

/// Times the per-frame pipeline on one thread. PNG decode is timed
/// separately and excluded from the throughput figure.
pub fn cmd_bench(input_dir: &Path, cfg: &PipelineConfig) -> CliResult<BenchReport> {
    let t = Instant::now();
    let frames = load_frames(input_dir, cfg)?;
    let decode = t.elapsed();

    let t = Instant::now();
    let analyses = process_frames(&frames, cfg, false)?;
    let pipeline = t.elapsed();

    let mut sum = StageTimings::default();
    for a in &analyses {
        sum.accumulate(&a.timings);
    }
    let n = frames.len() as f64;
    let per_frame_ms = |d: Duration| d.as_secs_f64() * 1e3 / n;
    let samples: Vec<DeflectionSample> = analyses.into_iter().map(|a| a.sample).collect();
    Ok(BenchReport {
        frames: frames.len(),
        ok_frames: samples.iter().filter(|s| s.is_ok()).count(),
        decode_s: decode.as_secs_f64(),
        pipeline_s: pipeline.as_secs_f64(),
        fps: n / pipeline.as_secs_f64().max(f64::MIN_POSITIVE),
        stage_ms: StageTimings::NAMES
            .iter()
            .zip(sum.as_array())
            .map(|(name, d)| (name.to_string(), per_frame_ms(d)))
            .collect(),
        stage_total_ms: per_frame_ms(sum.total()),
        samples,
    })
}
