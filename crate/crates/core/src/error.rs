use thiserror::Error;

pub type Result<T> = std::result::Result<T, DociError>;

#[derive(Debug, Error)]
pub enum DociError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("gate window [{start_ns}, {end_ns}] ns lies outside the sampled domain [{domain_start_ns}, {domain_end_ns}] ns")]
    WindowOutsideDomain {
        start_ns: f64,
        end_ns: f64,
        domain_start_ns: f64,
        domain_end_ns: f64,
    },

    #[error("reference minus background is {value:e}, at or below the floor {floor:e}")]
    DenominatorTooSmall { value: f64, floor: f64 },

    #[error("raster shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("region of interest contains no valid pixels")]
    EmptyRoi,

    #[error("singular covariance matrix; add regularization or drop collinear channels")]
    SingularCovariance,

    #[error("training data is missing class `{0}`")]
    MissingClass(&'static str),

    #[error("channel {0} is not present")]
    UnknownChannel(u8),

    #[error("block sets differ between truth and prediction")]
    BlockSetMismatch,

    #[error("overlapping regions: {0}")]
    OverlappingRegions(String),

    #[error("spacing of {spacing_px:.3} px is below the two-pixel sampling limit")]
    BelowNyquist { spacing_px: f64 },

    #[error("bad magic bytes")]
    BadMagic,

    #[error("unsupported raster format version {0}")]
    UnsupportedVersion(u16),

    #[error("unsupported raster dtype code {0}")]
    UnsupportedDtype(u8),

    #[error("payload length mismatch: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("checksum mismatch for {0}")]
    ChecksumMismatch(String),

    #[error("non-finite raster value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl DociError {
    /// Stable machine-readable code, used by the CLI and HTTP error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            DociError::InvalidParameter(_) => "InvalidParameter",
            DociError::WindowOutsideDomain { .. } => "WindowOutsideDomain",
            DociError::DenominatorTooSmall { .. } => "DenominatorTooSmall",
            DociError::ShapeMismatch { .. } => "ShapeMismatch",
            DociError::EmptyRoi => "EmptyRoi",
            DociError::SingularCovariance => "SingularCovariance",
            DociError::MissingClass(_) => "MissingClass",
            DociError::UnknownChannel(_) => "UnknownChannel",
            DociError::BlockSetMismatch => "BlockSetMismatch",
            DociError::OverlappingRegions(_) => "OverlappingRegions",
            DociError::BelowNyquist { .. } => "BelowNyquist",
            DociError::BadMagic => "BadMagic",
            DociError::UnsupportedVersion(_) => "UnsupportedVersion",
            DociError::UnsupportedDtype(_) => "UnsupportedDtype",
            DociError::TruncatedPayload { .. } => "TruncatedPayload",
            DociError::ChecksumMismatch(_) => "ChecksumMismatch",
            DociError::NonFinite { .. } => "NonFinite",
            DociError::Manifest(_) => "Manifest",
            DociError::Io(_) => "Io",
            DociError::Json(_) => "Json",
            DociError::Image(_) => "Image",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> DociError {
    DociError::InvalidParameter(msg.into())
}
