use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("event at t={t}us lies outside the interval [{start}, {end})")]
    EventOutsideInterval { t: u64, start: u64, end: u64 },

    #[error("event at ({x}, {y}) lies outside a {side}x{side} frame")]
    EventOutsideFrame { x: u32, y: u32, side: u32 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: String, actual: String },

    #[error("shape {index} leaves the {side}x{side} frame at frame {frame}")]
    ShapeLeavesFrame { index: usize, frame: usize, side: u32 },

    #[error("bitstream truncated at bit {offset}")]
    Truncated { offset: usize },

    #[error("malformed event payload in leaf {leaf}: {reason}")]
    MalformedLeaf { leaf: usize, reason: String },

    #[error("packet version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u8, expected: u8 },

    #[error("packet length mismatch: {0}")]
    LengthMismatch(String),

    #[error("bad packet magic")]
    BadMagic,

    #[error("sampled count {sampled} exceeds original count {original} at ({x}, {y})")]
    SampledExceedsOriginal { x: u32, y: u32, sampled: u32, original: u32 },

    #[error("confidence scorer returned {0}, outside [0, 1]")]
    ScoreOutOfRange(f64),

    #[error("MOTA is undefined without ground-truth objects")]
    NoGroundTruth,

    #[error("enumeration guard exceeded: frame side {0} > 16")]
    EnumerationGuard(u32),

    #[error("dataset inconsistency: {0}")]
    Dataset(String),

    #[error("loop ordering violated: {0}")]
    Ordering(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
