use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("transform requires positive u (got {0})")]
    NonPositiveTransform(f64),

    #[error("negative density {value} in cell {cell}")]
    NegativeDensity { cell: usize, value: f64 },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("blow-up: dt too large (non-finite value at t = {time})")]
    BlowUp { time: f64 },

    #[error("CFL violation: dt = {dt} exceeds limit {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("Newton did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("shooting bracket failure: slopes tried in [{low}, {high}]")]
    Bracket { low: f64, high: f64 },

    #[error("domain too small: front reached the boundary at t = {time}")]
    DomainTooSmall { time: f64 },

    #[error("ball exceeds the grid interior")]
    BallOutsideDomain,

    #[error("grid or discretization mismatch: {0}")]
    Mismatch(String),

    #[error("apex outside the spacetime domain")]
    ApexOutside,

    #[error("singular linear system at row {0}")]
    Singular(usize),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}
