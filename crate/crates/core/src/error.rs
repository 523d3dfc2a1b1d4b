use thiserror::Error;

/// Grid index `(i, j)` of a node, column first.
pub type NodeIndex = (usize, usize);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension m = {0} is not supported here: {1}")]
    Dimension(u32, &'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("geometry rejected: {0}")]
    Geometry(String),

    #[error("region too small for the 5-point stencil")]
    RegionTooSmall,

    #[error("evaluation point {x:?} lies outside the region where the field is defined")]
    OutsideRegion { x: (f64, f64) },

    #[error("field is not subharmonic at {} node(s)", violations.len())]
    NotSubharmonic { violations: Vec<NodeIndex> },

    #[error("precondition violated: {what} ({} witness node(s))", witnesses.len())]
    Precondition {
        what: String,
        witnesses: Vec<NodeIndex>,
    },

    #[error("relaxation did not converge: {sweeps} sweeps, last step {last_step:e}")]
    NotConverged { sweeps: usize, last_step: f64 },

    #[error("not a Jensen potential: normalization ratio {ratio} exceeds 1 + {tolerance}")]
    NormalizationExceeded { ratio: f64, tolerance: f64 },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("grids are not compatible: {0}")]
    GridMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
