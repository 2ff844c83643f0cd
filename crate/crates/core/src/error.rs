use thiserror::Error;

/// Errors raised by the numerical laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// The grid cannot place enough nodes inside the boundary layer.
    #[error("layer under-resolved: {0}")]
    Sizing(String),

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("conormal order {order} exceeds cap {cap}")]
    OrderCap { order: usize, cap: usize },

    #[error("unknown recipe `{0}`")]
    UnknownRecipe(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("elliptic solve failed: {0}")]
    Elliptic(String),

    #[error("implicit solve failed: {0}")]
    Implicit(String),

    #[error("CFL violated at t={time}: {cfl:.4} > {limit}")]
    Cfl { time: f64, cfl: f64, limit: f64 },

    #[error("blow-up at t={time}: non-finite values in {what}")]
    BlowUp { time: f64, what: String },

    #[error("fast decay violated at z_max: {value:e} > {tol:e}")]
    Decay { value: f64, tol: f64 },

    #[error("unsupported expansion order K={0} (supported: 1, 2)")]
    UnsupportedOrder(usize),

    #[error("time {t} outside stored range [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("rate fit: {0}")]
    Fit(String),

    #[error("audit: {0}")]
    Audit(String),

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics themselves (blow-up, CFL, solver breakdown).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Cfl { .. }
                | Error::BlowUp { .. }
                | Error::Implicit(_)
                | Error::Elliptic(_)
                | Error::Decay { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
