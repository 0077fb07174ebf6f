use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported bit width {0} (expected 4, 8 or 16)")]
    UnsupportedWidth(u32),

    #[error("value {value} is not representable in {bits} bits ({signedness})")]
    OutOfRange {
        value: i64,
        bits: u32,
        signedness: crate::types::Signedness,
    },

    #[error("{role} operand is {actual} bits but the configuration expects {expected}")]
    WidthMismatch {
        role: crate::types::Role,
        expected: u32,
        actual: u32,
    },

    #[error("accumulator overflow: {value} does not fit in {width} bits")]
    AccumulatorOverflow { value: i128, width: u32 },

    #[error("operand lists differ in length ({weights} weights, {activations} activations)")]
    LengthMismatch { weights: usize, activations: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("tensors mix dtype widths {0} and {1}")]
    MixedDtype(u32, u32),

    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported OZTD version {0}")]
    UnsupportedVersion(u16),

    #[error("malformed header: {0}")]
    BadHeader(String),

    #[error("dimension mismatch: header describes {expected} elements, payload holds {actual}")]
    DimMismatch { expected: u64, actual: u64 },

    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),

    #[error("element {index} value out of range for dtype: {detail}")]
    ValueOutOfRange { index: usize, detail: String },

    #[error("layer {layer}: {source}")]
    Layer {
        layer: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },

    #[error("negative input: {0}")]
    NegativeInput(&'static str),

    #[error("power must be positive")]
    NonPositivePower,

    #[error("frequency must be positive, got {0}")]
    NonPositiveFrequency(f64),

    #[error("input must be positive: {0}")]
    NonPositiveInput(&'static str),

    #[error("baseline must be positive, got {0}")]
    NonPositiveBaseline(f64),

    #[error("sparsity {0} outside [0, 1]")]
    SparsityOutOfRange(f64),

    #[error("no calibration record for {0}")]
    MissingRecord(String),

    #[error("calibration: {0}")]
    Calibration(String),
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    /// True for errors caused by missing calibration data rather than bad input.
    pub fn is_missing_calibration(&self) -> bool {
        match self {
            Error::MissingRecord(_) => true,
            Error::Layer { source, .. } => source.is_missing_calibration(),
            _ => false,
        }
    }
}
