use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("unsupported channel count {0} (expected 1 or 3)")]
    UnsupportedChannels(usize),

    #[error("region {x},{y} {width}x{height} exceeds frame bounds {frame_width}x{frame_height}")]
    RoiOutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
        frame_width: usize,
        frame_height: usize,
    },

    #[error("median window must be odd and at least 1, got {0}")]
    InvalidWindow(usize),

    #[error("degenerate input: {0}")]
    DegenerateImage(String),

    #[error("frame {width}x{height} is smaller than the {kernel_cols}x{kernel_rows} kernel")]
    FrameSmallerThanKernel {
        width: usize,
        height: usize,
        kernel_cols: usize,
        kernel_rows: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("failed to locate beam clamps: {0}")]
    LocateFailed(String),

    #[error("invalid central line: {0}")]
    InvalidCentralLine(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("singular normal equations (rank-deficient design matrix)")]
    SingularSystem,

    #[error("fit did not converge")]
    NotConverged,

    #[error("no physical scale available")]
    MissingScale,

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error on {path}: {source}")]
    Image {
        path: String,
        #[source]
        source: image::ImageError,
    },
}
