use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid coordinate ({n1}, {n2}, {p}, {q}) lies outside the {dims:?} grid")]
    CoordOutOfRange {
        n1: usize,
        n2: usize,
        p: usize,
        q: usize,
        dims: [usize; 4],
    },

    #[error("flat index {index} out of range for grid of {len} cells")]
    FlatIndexOutOfRange { index: usize, len: usize },

    #[error("azimuth speed {vy} m/s equals platform speed; zero-Doppler time is undefined")]
    SingularZeroDoppler { vy: f64 },

    #[error("echo has no energy; SNR is undefined")]
    ZeroEnergyEcho,

    #[error("cannot select {requested} measurements from {available} samples")]
    InvalidSelection { requested: usize, available: usize },

    #[error("sparsity {k} exceeds the {visible} atoms visible to the selection")]
    SparsityTooLarge { k: usize, visible: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("ground truth profile has zero norm")]
    ZeroTruth,

    #[error("image is empty")]
    EmptyImage,

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
