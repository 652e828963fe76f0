use thiserror::Error;

/// Errors produced anywhere in the codec.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("frame dimensions {width}x{height} are not positive multiples of 16")]
    BadDimensions { width: usize, height: usize },
    #[error("luma buffer holds {got} samples, expected {expected}")]
    BadBufferSize { expected: usize, got: usize },
    #[error("stream ends with a partial frame ({trailing} of {frame_bytes} bytes)")]
    TruncatedStream { trailing: usize, frame_bytes: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("block size {block} does not tile a {width}x{height} frame")]
    BadBlockSize { block: usize, width: usize, height: usize },
    #[error("sequence has no frames")]
    EmptySequence,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("inconsistent coefficient bands: {0}")]
    InconsistentBands(String),
    #[error("level count {0} is not a supported power of two")]
    BadLevels(u32),
    #[error("bin {bin} outside the range allowed by {levels} levels")]
    BinOutOfRange { bin: i32, levels: u32 },
    #[error("expected {expected} bit planes, got {got}")]
    InconsistentPlaneCount { expected: usize, got: usize },
    #[error("LDPCA construction failed for n={n} after {attempts} seeds")]
    ConstructionFailed { n: usize, attempts: u32 },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("bit plane {0} has not been decoded yet")]
    MissingPlane(usize),
    #[error("operation needs band {expected}, got band {got}")]
    WrongBand { expected: &'static str, got: usize },
    #[error("operation not valid for bit plane {plane} of {bits}")]
    WrongPlane { plane: usize, bits: usize },
    #[error("corrupt intra payload: {0}")]
    CorruptPayload(String),
    #[error("unknown intra codec id {0}")]
    UnknownIntraCodec(u8),
    #[error("malformed bitstream: {0}")]
    MalformedBitstream(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
