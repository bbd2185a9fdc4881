use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("parameter `{name}` out of range: {value} ({expected})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("sets overlap on {cells} sampled cells")]
    Overlapping { cells: usize },
    #[error("field has no exterior datum; required for the exterior contribution")]
    MissingExterior,
    #[error("field value {value} at cell {cell} outside declared range {range}")]
    ValueOutOfRange { cell: usize, value: f64, range: String },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("set is not contained in the container")]
    NotContained,
    #[error("ball of radius {radius} exits the sampled region")]
    BallOutsideRegion { radius: f64 },
    #[error("functional `{0}` acts on sets and has no field gradient")]
    NotDifferentiable(&'static str),
    #[error("degenerate rate fit: {0}")]
    DegenerateFit(String),
    #[error("value alphabet mismatch: {0}")]
    Alphabet(String),
    #[error("malformed field file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
