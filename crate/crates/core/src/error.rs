use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate vertex id `{0}`")]
    DuplicateVertex(String),
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("missing length for edge {0}|{1}")]
    MissingEdgeLength(String, String),
    #[error("edge {a}|{b} has non-positive length {length}")]
    NonPositiveLength { a: String, b: String, length: f64 },
    #[error("simplex {0:?} is not in the complex")]
    UnknownSimplex(Vec<String>),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("maps are defined on different complexes")]
    DomainMismatch,
    #[error("map is not strictly short (margin {margin:e} on {simplex:?})")]
    NotStrictlyShort { margin: f64, simplex: Vec<String> },
    #[error("edge {edge:?} has image length {image_length} > intrinsic length {length}")]
    NotShort { edge: [String; 2], image_length: f64, length: f64 },
    #[error("ambient dimension {actual} is below the required {required}")]
    DimensionTooSmall { required: usize, actual: usize },
    #[error("operation needs a complex of dimension {expected}, got {actual}")]
    WrongDimension { expected: usize, actual: usize },
    #[error("chain step {chain_eps} is below the sample mesh {mesh}; use a finer level")]
    ChainTooFine { chain_eps: f64, mesh: f64 },
    #[error("input map is not an embedding")]
    NotAnEmbedding,
    #[error("no admissible position for vertex `{vertex}` after exhausting retries")]
    RetryExhausted { vertex: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("schema error in {path}: {element}")]
    Schema { path: String, element: String },
}

impl Error {
    /// Failures caused by the numerics rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::RetryExhausted { .. } | Error::Numerical(_))
    }

    pub fn is_schema(&self) -> bool {
        matches!(self, Error::Schema { .. })
    }
}
