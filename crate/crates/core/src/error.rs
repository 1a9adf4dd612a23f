use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("point leaves both charts (group element {0} overflows)")]
    ChartOverflow(i64),
    #[error("symbols belong to different actions")]
    ActionMismatch,
    #[error("symbol is not invertible at tolerance (best residual {best_residual:.3e})")]
    NotInvertible { best_residual: f64 },
    #[error("inverse support exceeds {max_support} (edge norm {edge_norm:.3e})")]
    SupportExceeded { max_support: usize, edge_norm: f64 },
    #[error("truncation window {n} is smaller than the symbol support {support}")]
    WindowTooSmall { n: usize, support: usize },
    #[error("bandwidth {bandwidth} exceeds truncation {n}")]
    BandwidthExceedsTruncation { bandwidth: usize, n: usize },
    #[error("symbol vanishes on the integration contour (min modulus {min_modulus:.3e})")]
    VanishingSymbol { min_modulus: f64 },
    #[error("winding integral {raw} is not an integer (distance {distance:.3e})")]
    NonIntegerWinding { raw: f64, distance: f64 },
    #[error("inverse residual {residual:.3e} too large")]
    InverseResidualTooLarge { residual: f64 },
    #[error("function does not decay inside the grid (edge value {edge:.3e})")]
    InsufficientDecay { edge: f64 },
    #[error("grid step does not divide theta")]
    GridMismatch,
    #[error("operator is not transversally elliptic: {0}")]
    NotTransverselyElliptic(String),
    #[error("index did not stabilize over the truncation list")]
    NoStabilization,
}
