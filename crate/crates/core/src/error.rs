use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite weight {value} at index (o={}, i={}, p={}, q={})", index[0], index[1], index[2], index[3])]
    NonFiniteWeight { index: [usize; 4], value: f64 },

    #[error("{what} must be at least 1")]
    ZeroDimension { what: &'static str },

    #[error("shape mismatch: expected {expected} elements, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("allocation of {requested} bytes exceeds the memory budget of {budget} bytes")]
    AllocationFailure { requested: u64, budget: u64 },

    #[error("Jacobi SVD did not converge within {sweeps} sweeps{}", frequency_suffix(*frequency))]
    ConvergenceFailure {
        sweeps: usize,
        frequency: Option<(usize, usize)>,
    },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("kernel {kernel_h}x{kernel_w} does not fit on a {height}x{width} torus")]
    KernelLargerThanTorus {
        kernel_h: usize,
        kernel_w: usize,
        height: usize,
        width: usize,
    },

    #[error("explicit matrix of {rows}x{cols} exceeds the size cap of {cap}")]
    SizeCapExceeded { rows: usize, cols: usize, cap: usize },

    #[error("spectrum is empty")]
    EmptySpectrum,

    #[error("{axis} fit for {method} needs at least {required} distinct points, found {found}")]
    InsufficientPoints {
        method: String,
        axis: &'static str,
        found: usize,
        required: usize,
    },

    #[error("{what}: spectra disagree (max relative difference {max_relative:e})")]
    CrossCheckFailed { what: String, max_relative: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Npy(#[from] NpyError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn frequency_suffix(frequency: Option<(usize, usize)>) -> String {
    match frequency {
        Some((i, j)) => format!(" at frequency index ({i}, {j})"),
        None => String::new(),
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NpyError {
    #[error("not an NPY file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported NPY format version {0}.{1}")]
    UnsupportedVersion(u8, u8),
    #[error("unsupported dtype descriptor {0:?}")]
    UnsupportedDescr(String),
    #[error("fortran-ordered arrays are not supported")]
    FortranOrderUnsupported,
    #[error("expected a rank-4 array, found rank {0}")]
    ShapeRankNot4(usize),
    #[error("payload truncated: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
}

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SizeCapExceeded { .. } | Error::AllocationFailure { .. } => 3,
            Error::ConvergenceFailure { .. } | Error::CrossCheckFailed { .. } => 4,
            _ => 2,
        }
    }
}
