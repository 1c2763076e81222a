use thiserror::Error;

/// Errors produced by the numerical routines.
///
/// Variants are grouped so that callers (the CLI in particular) can tell a
/// bad argument from a numerical guard tripping and from an I/O failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grids do not match: {0}")]
    GridMismatch(String),

    #[error("truncation check failed: {0}")]
    Truncation(String),

    #[error(
        "angle {phi} rad is outside (-pi, pi) where d_t = tan(phi/2), d_omega = sin(phi) describe a single lens stage"
    )]
    AngleOutOfRange { phi: f64 },

    #[error("aliasing guard violated: {0}")]
    Aliasing(String),

    #[error("input not representable in the Hermite-Gaussian basis: relative residual {residual:.3e} exceeds {tolerance:.1e}")]
    BasisResidual { residual: f64, tolerance: f64 },

    #[error("bandwidth budget violated: beta*L = {available:.6e} rad/s < B' = {required:.6e} rad/s")]
    Budget { available: f64, required: f64 },

    #[error("{requested} modes requested but the time-bandwidth area holds {capacity}")]
    ModeCapacity { capacity: usize, requested: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("phase unwrap ambiguous between modes {from} and {to}")]
    UnwrapAmbiguity { from: usize, to: usize },

    #[error("axis mismatch: {0}")]
    AxisMismatch(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of a numerical guard (aliasing, truncation, basis
    /// residual, budget, angle domain, degenerate fits).
    pub fn is_numeric_guard(&self) -> bool {
        matches!(
            self,
            Error::Truncation(_)
                | Error::AngleOutOfRange { .. }
                | Error::Aliasing(_)
                | Error::BasisResidual { .. }
                | Error::Budget { .. }
                | Error::ModeCapacity { .. }
                | Error::DegenerateFit(_)
                | Error::UnwrapAmbiguity { .. }
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
