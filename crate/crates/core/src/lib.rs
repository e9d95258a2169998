//! Tracking of a clamped, buckling beam in noisy grayscale video.
//!
//! Each frame goes through clamp location, a neighbourhood denoising mask,
//! per-row maxima, two outlier filters and a least-squares fit of
//! `c1·sin(ky) + c2·cos(ky) + c3`. The fitted curves give a deflection
//! time series which is then classified as intra- or inter-well motion.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod error;
pub mod fitter;
pub mod imaging;
pub mod io;
pub mod locator;
pub mod pipeline;
pub mod synth;
pub mod tracker;

pub use analysis::{
    classify_wells, deflection, DeflectionSample, SampleStatus, WellClass, WellReport,
};
pub use config::{PipelineConfig, SequenceSpec};
pub use error::{Error, Result};
pub use fitter::{gauss_newton_fit, BeamFit, GaussNewtonOptions};
pub use imaging::Frame;
pub use locator::{locate, CentralLine, Point};
pub use pipeline::{analyze_frame, track_frames, FrameAnalysis, StageTimings};
pub use synth::{render_frame, SceneSpec, Trajectory};
