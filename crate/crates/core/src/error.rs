use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("singular input: {0}")]
    Singular(String),
    #[error("unknown triad id `{0}`")]
    UnknownTriad(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("stencil leaves the domain: {0}")]
    Boundary(String),
    #[error("no closed orbit found: {0}")]
    NoOrbit(String),
    #[error("operator assembly failed: {0}")]
    Assembly(String),
    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("insufficient cylinder length: {0}")]
    InsufficientLength(String),
    #[error("charge does not vanish (|Q| = {0:e})")]
    ChargeNotVanishing(f64),
    #[error("w*λ∘j is not exact: {0}")]
    NotExact(String),
    #[error("line search stalled after {iters} iterations (F = {value:e})")]
    Stall {
        iters: usize,
        value: f64,
        last: Box<crate::cylfield::MapField>,
    },
    #[error("solver did not converge: {0}")]
    NotConverged(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
